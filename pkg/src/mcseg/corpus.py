"""Corpus loading, preprocessing, BMES label codec, and vocabularies.

Corpora are plain UTF-8 text, one sentence per line, words separated by
single spaces (the bakeoff layout). Preprocessing normalizes full-width
ASCII to half-width and collapses ASCII digit/letter runs into the marker
tokens ``<NUM>`` / ``<LAT>``; a replaced run counts as a single token from
then on. Preprocessing is idempotent because the tokenizer recognizes the
markers and passes them through.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD = "<PAD>"
UNK = "<UNK>"
BOS = "<BOS>"
EOS = "<EOS>"
NUM = "<NUM>"
LAT = "<LAT>"
RESERVED = (PAD, UNK, BOS, EOS, NUM, LAT)

_MARKERS = (NUM, LAT)

# sentence/clause punctuation; full-width members listed before their
# half-width counterparts (width normalization maps ！？；，． into ASCII)
CLAUSE_PUNCT = frozenset("。，！？；、.,!?;")

LABELS = ("B", "M", "E", "S")
LABEL_TO_ID = {lab: i for i, lab in enumerate(LABELS)}


def normalize_width(text: str) -> str:
    """Map full-width ASCII (U+FF01..U+FF5E) to half-width, U+3000 to space."""
    out = []
    for ch in text:
        code = ord(ch)
        if 0xFF01 <= code <= 0xFF5E:
            out.append(chr(code - 0xFEE0))
        elif code == 0x3000:
            out.append(" ")
        else:
            out.append(ch)
    return "".join(out)


def tokenize(text: str) -> list[str]:
    """Split into single characters, keeping marker strings as one token."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        if text[i] == "<":
            matched = False
            for marker in _MARKERS:
                if text.startswith(marker, i):
                    tokens.append(marker)
                    i += len(marker)
                    matched = True
                    break
            if matched:
                continue
        tokens.append(text[i])
        i += 1
    return tokens


def _run_kind(token: str) -> str | None:
    if len(token) == 1 and "0" <= token <= "9":
        return NUM
    if len(token) == 1 and ("a" <= token <= "z" or "A" <= token <= "Z"):
        return LAT
    return None


def replace_runs(tokens: list[str]) -> list[str]:
    """Collapse maximal ASCII digit runs to <NUM> and letter runs to <LAT>."""
    out, _ = replace_runs_with_surfaces(tokens)
    return out


def replace_runs_with_surfaces(tokens: list[str]) -> tuple[list[str], list[str]]:
    """Like replace_runs, also returning the original text of every token."""
    out: list[str] = []
    surfaces: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        kind = _run_kind(tokens[i])
        if kind is None:
            out.append(tokens[i])
            surfaces.append(tokens[i])
            i += 1
            continue
        j = i
        while j < n and _run_kind(tokens[j]) == kind:
            j += 1
        out.append(kind)
        surfaces.append("".join(tokens[i:j]))
        i = j
    return out, surfaces


def preprocess_word(word: str) -> str:
    """Width-normalize one word and collapse runs inside it.

    Runs never cross word boundaries because each word is handled alone.
    """
    return "".join(replace_runs(tokenize(normalize_width(word))))


def split_clauses(words: list[str]) -> list[list[str]]:
    """Cut a word sequence after every single-character clause punctuation word.

    The punctuation stays with the clause it ends. A trailing stretch with no
    final punctuation becomes the last clause. Character content is preserved.
    """
    clauses: list[list[str]] = []
    current: list[str] = []
    for w in words:
        current.append(w)
        if len(w) == 1 and w in CLAUSE_PUNCT:
            clauses.append(current)
            current = []
    if current:
        clauses.append(current)
    return clauses


def words_to_bmes(words: list[str]) -> list[str]:
    """Per-token BMES labels: S for singletons, otherwise B M... E."""
    labels: list[str] = []
    for w in words:
        n = len(tokenize(w))
        if n == 0:
            continue
        if n == 1:
            labels.append("S")
        else:
            labels.append("B")
            labels.extend("M" * (n - 2))
            labels.append("E")
    return labels


def bmes_to_words(tokens: list[str], labels: list[str]) -> list[str]:
    """Rebuild words from labels, repairing ill-formed sequences.

    A boundary is placed before every B and S and after every E and S; any
    word still open at the end is closed. Well-formed input round-trips;
    arbitrary label sequences still yield a segmentation of all tokens.
    """
    if len(tokens) != len(labels):
        raise ValueError("tokens and labels must have equal length")
    n = len(tokens)
    bounds = {0, n}
    for i, lab in enumerate(labels):
        if lab in ("B", "S"):
            bounds.add(i)
        if lab in ("E", "S"):
            bounds.add(i + 1)
    cuts = sorted(bounds)
    return ["".join(tokens[a:b]) for a, b in zip(cuts, cuts[1:])]


# corpora -------------------------------------------------------------------


@dataclass
class RawCorpus:
    """A named, criterion-tagged collection of segmented sentences."""

    name: str
    criterion: str
    sentences: list[list[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass
class LabeledSentence:
    tokens: list[str]
    labels: list[str]
    criterion_id: int


def load_corpus(path, name: str, criterion: str) -> RawCorpus:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            words = line.split()
            if words:
                sentences.append(words)
    return RawCorpus(name=name, criterion=criterion, sentences=sentences)


def save_corpus(corpus: RawCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for words in corpus.sentences:
            fh.write(" ".join(words) + "\n")


def preprocess_corpus(corpus: RawCorpus, clause_split: bool) -> RawCorpus:
    """Normalize and run-replace every sentence; optionally split clauses.

    Test corpora must pass clause_split=False so line structure survives.
    """
    out: list[list[str]] = []
    for words in corpus.sentences:
        cleaned = [preprocess_word(w) for w in words]
        cleaned = [w for w in cleaned if w]
        if not cleaned:
            continue
        if clause_split:
            out.extend(split_clauses(cleaned))
        else:
            out.append(cleaned)
    return RawCorpus(name=corpus.name, criterion=corpus.criterion, sentences=out)


def sentence_tokens(words: list[str]) -> list[str]:
    toks: list[str] = []
    for w in words:
        toks.extend(tokenize(w))
    return toks


# vocabulary ------------------------------------------------------------------


def bigram_symbol(left: str, right: str) -> str:
    return left + right


class Vocab:
    """Unigram, bigram, and criterion symbol tables with UNK fallback.

    Reserved tokens sit at fixed low indices (0..5) in the unigram and
    bigram tables. Criterion indices are dense in registration order.
    """

    def __init__(self, unigrams: dict[str, int], bigrams: dict[str, int],
                 criteria: dict[str, int],
                 uni_freq: dict[str, int] | None = None,
                 bi_freq: dict[str, int] | None = None):
        self.unigrams = unigrams
        self.bigrams = bigrams
        self.criteria = criteria
        self.uni_freq = uni_freq or {}
        self.bi_freq = bi_freq or {}

    @property
    def n_unigrams(self) -> int:
        return len(self.unigrams)

    @property
    def n_bigrams(self) -> int:
        return len(self.bigrams)

    @property
    def n_criteria(self) -> int:
        return len(self.criteria)

    def uni_id(self, token: str) -> int:
        return self.unigrams.get(token, self.unigrams[UNK])

    def bi_id(self, left: str, right: str) -> int:
        return self.bigrams.get(bigram_symbol(left, right), self.bigrams[UNK])

    def criterion_id(self, name: str) -> int:
        if name not in self.criteria:
            known = ", ".join(sorted(self.criteria))
            raise KeyError(f"unknown criterion '{name}' (known: {known})")
        return self.criteria[name]

    def add_criterion(self, name: str) -> int:
        if name in self.criteria:
            raise ValueError(f"criterion '{name}' already registered")
        idx = len(self.criteria)
        self.criteria[name] = idx
        return idx

    def to_dict(self) -> dict:
        return {
            "unigrams": self.unigrams,
            "bigrams": self.bigrams,
            "criteria": self.criteria,
            "uni_freq": self.uni_freq,
            "bi_freq": self.bi_freq,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(dict(d["unigrams"]), dict(d["bigrams"]), dict(d["criteria"]),
                   dict(d.get("uni_freq", {})), dict(d.get("bi_freq", {})))

    def export_tsv(self, out_dir) -> None:
        """Write symbol/index/frequency tables, one file per symbol kind."""
        import os

        tables = [
            ("vocab.unigrams.tsv", self.unigrams, self.uni_freq),
            ("vocab.bigrams.tsv", self.bigrams, self.bi_freq),
            ("vocab.criteria.tsv", self.criteria, {}),
        ]
        for fname, table, freq in tables:
            path = os.path.join(out_dir, fname)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("symbol\tindex\tfrequency\n")
                for sym, idx in sorted(table.items(), key=lambda kv: kv[1]):
                    fh.write(f"{sym}\t{idx}\t{freq.get(sym, 0)}\n")


def build_vocab(corpora: list[RawCorpus], min_count_unigram: int = 1,
                min_count_bigram: int = 1) -> Vocab:
    """Count symbols over preprocessed training corpora and assign indices.

    Bigrams include the BOS/EOS padded pairs at sentence edges. Symbols
    below their minimum count fall back to UNK at lookup time. Corpora
    sharing a criterion name share one criterion index.
    """
    uni_counts: Counter[str] = Counter()
    bi_counts: Counter[str] = Counter()
    criteria: dict[str, int] = {}
    for corpus in corpora:
        if corpus.criterion not in criteria:
            criteria[corpus.criterion] = len(criteria)
        for words in corpus.sentences:
            toks = sentence_tokens(words)
            uni_counts.update(toks)
            padded = [BOS] + toks + [EOS]
            for a, b in zip(padded, padded[1:]):
                bi_counts.update((bigram_symbol(a, b),))

    def assign(counts: Counter, min_count: int) -> dict[str, int]:
        table = {tok: i for i, tok in enumerate(RESERVED)}
        kept = [(s, c) for s, c in counts.items()
                if c >= min_count and s not in table]
        kept.sort(key=lambda sc: (-sc[1], sc[0]))
        for sym, _ in kept:
            table[sym] = len(table)
        return table

    return Vocab(
        unigrams=assign(uni_counts, min_count_unigram),
        bigrams=assign(bi_counts, min_count_bigram),
        criteria=criteria,
        uni_freq=dict(uni_counts),
        bi_freq=dict(bi_counts),
    )


def split_train_dev(corpus: RawCorpus, ratio: float = 0.10,
                    seed: int = 0) -> tuple[RawCorpus, RawCorpus]:
    """Seeded sentence-level split; dev gets max(1, floor(ratio * n))."""
    n = len(corpus.sentences)
    if n < 2:
        raise ValueError(f"corpus '{corpus.name}' too small to split ({n} sentences)")
    n_dev = max(1, int(n * ratio))
    perm = np.random.default_rng(seed).permutation(n)
    dev_idx = set(perm[:n_dev].tolist())
    train = [s for i, s in enumerate(corpus.sentences) if i not in dev_idx]
    dev = [s for i, s in enumerate(corpus.sentences) if i in dev_idx]
    mk = lambda sents: RawCorpus(corpus.name, corpus.criterion, sents)
    return mk(train), mk(dev)


def training_word_set(corpora: list[RawCorpus]) -> set[str]:
    words: set[str] = set()
    for corpus in corpora:
        for sentence in corpus.sentences:
            words.update(sentence)
    return words


def label_sentences(corpus: RawCorpus, vocab: Vocab) -> list[LabeledSentence]:
    cid = vocab.criterion_id(corpus.criterion)
    out = []
    for words in corpus.sentences:
        toks = sentence_tokens(words)
        labels = words_to_bmes(words)
        out.append(LabeledSentence(tokens=toks, labels=labels, criterion_id=cid))
    return out


def corpus_stats(corpus: RawCorpus, training_words: set[str] | None = None) -> dict:
    """Word/char token and type counts, plus OOV rate against a train word set."""
    n_words = 0
    n_chars = 0
    word_types: set[str] = set()
    char_types: set[str] = set()
    n_oov = 0
    for sentence in corpus.sentences:
        for w in sentence:
            n_words += 1
            word_types.add(w)
            toks = tokenize(w)
            n_chars += len(toks)
            char_types.update(toks)
            if training_words is not None and w not in training_words:
                n_oov += 1
    stats = {
        "words": n_words,
        "chars": n_chars,
        "word_types": len(word_types),
        "char_types": len(char_types),
    }
    if training_words is not None:
        stats["oov_rate"] = n_oov / n_words if n_words else 0.0
    return stats
