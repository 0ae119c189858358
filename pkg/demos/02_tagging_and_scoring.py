"""From words to character tags and back, and how output is scored.

Segmentation is character classification: each character receives one of
B/M/E/S (begin, middle, end, single). The codec in mcseg.corpus converts
between word lists and tag strings, repairing any invalid tag sequence a
model might emit. Scores are word-level precision/recall/F1 over exact
span matches.
"""

from mcseg.corpus import bmes_to_words, normalize_width, tokenize, words_to_bmes
from mcseg.metrics import evaluate_segmentation

sentence = ["今天", "天气", "不错"]
tags = words_to_bmes(sentence)
print("words:", sentence)
print("tags :", " ".join(tags))
print("round trip:", bmes_to_words(tokenize("".join(sentence)), tags))

# invalid tag sequences still decode; the codec inserts boundaries
chars = tokenize("今天天气")
broken = ["M", "E", "B", "M"]
print("\nrepairing", broken, "->", bmes_to_words(chars, broken))

# full-width forms and digit runs normalize before tagging
raw = "价格１２３元"
print("\nnormalized:", normalize_width(raw))

# scoring: pred splits one gold word and merges two others
gold = [["他", "来到", "北京", "大学"]]
pred = [["他", "来", "到", "北京大学"]]
scores = evaluate_segmentation(gold, pred)
print("\ngold:", gold[0])
print("pred:", pred[0])
print(f"precision {scores.precision:.4f}  recall {scores.recall:.4f}"
      f"  f1 {scores.f1:.4f}")
print(f"({scores.n_correct} of {scores.n_pred} predicted spans match"
      f" {scores.n_gold} gold spans)")

# unseen-word recall: pass the training word set
scores = evaluate_segmentation(gold, pred, training_words={"他", "来到", "北京"})
print(f"recall on words outside the training set: {scores.oov_recall:.2f}")
