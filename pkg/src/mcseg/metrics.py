"""Segmentation scoring: word-level precision/recall/F1 and OOV recall.

A word is correct when its half-open token span appears in the gold
segmentation of the same sentence; precision, recall, and F1 are micro
averages over a corpus. OOV recall is recall restricted to gold words
absent from the training word set; when a corpus has no OOV words the
value is reported as 1.0 with a vacuous flag so callers never mistake
it for a measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import tokenize


@dataclass
class SegScores:
    precision: float
    recall: float
    f1: float
    oov_recall: float
    oov_vacuous: bool
    n_gold: int
    n_pred: int
    n_correct: int
    n_oov: int


def word_spans(words: list[str]) -> list[tuple[int, int]]:
    """Half-open token spans of each word; marker tokens count as one unit."""
    spans = []
    pos = 0
    for w in words:
        n = len(tokenize(w))
        spans.append((pos, pos + n))
        pos += n
    return spans


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate_segmentation(gold_sentences: list[list[str]],
                          pred_sentences: list[list[str]],
                          training_words: set[str] | None = None) -> SegScores:
    if len(gold_sentences) != len(pred_sentences):
        raise ValueError("gold and predicted corpora differ in sentence count")
    n_gold = n_pred = n_correct = 0
    n_oov = n_oov_found = 0
    for i, (gold, pred) in enumerate(zip(gold_sentences, pred_sentences)):
        g_spans = word_spans(gold)
        p_spans = word_spans(pred)
        if (g_spans and p_spans and g_spans[-1][1] != p_spans[-1][1]) \
                or bool(g_spans) != bool(p_spans):
            raise ValueError(
                f"sentence {i}: gold and prediction cover different tokens")
        p_set = set(p_spans)
        n_gold += len(g_spans)
        n_pred += len(p_spans)
        n_correct += len(set(g_spans) & p_set)
        if training_words is not None:
            for w, span in zip(gold, g_spans):
                if w not in training_words:
                    n_oov += 1
                    if span in p_set:
                        n_oov_found += 1

    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    vacuous = n_oov == 0
    return SegScores(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        oov_recall=1.0 if vacuous else n_oov_found / n_oov,
        oov_vacuous=vacuous,
        n_gold=n_gold,
        n_pred=n_pred,
        n_correct=n_correct,
        n_oov=n_oov,
    )


def macro_average(values: list[float]) -> float:
    if not values:
        raise ValueError("macro average of zero values")
    return sum(values) / len(values)


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def format_report(rows: list[tuple[str, SegScores]]) -> str:
    """TSV report, one criterion per row, percentages with two decimals."""
    lines = ["criterion\tprecision\trecall\tf1\toov_recall\toov_vacuous"]
    for name, s in rows:
        lines.append("\t".join([
            name, _pct(s.precision), _pct(s.recall), _pct(s.f1),
            _pct(s.oov_recall), "yes" if s.oov_vacuous else "no",
        ]))
    return "\n".join(lines) + "\n"
