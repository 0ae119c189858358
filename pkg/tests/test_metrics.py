"""Scoring tests, including a cross-check against the boundary-walk oracle."""

import numpy as np
import pytest

from mcseg.corpus import NUM
from mcseg.metrics import (SegScores, evaluate_segmentation, f1_score,
                           format_report, macro_average, word_spans)

from oracles import naive_word_prf


def test_worked_example():
    # gold "ab|c" against prediction "a|b|c": one of three predictions is a
    # gold word, one of two gold words is found
    s = evaluate_segmentation([["ab", "c"]], [["a", "b", "c"]])
    assert s.precision == pytest.approx(1 / 3)
    assert s.recall == pytest.approx(1 / 2)
    assert s.f1 == pytest.approx(0.4)
    assert (s.n_correct, s.n_pred, s.n_gold) == (1, 3, 2)


def test_perfect_prediction():
    gold = [["天气", "不错"], ["走"]]
    s = evaluate_segmentation(gold, [list(x) for x in gold])
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


def test_word_spans_are_half_open_token_ranges():
    assert word_spans(["ab", "c"]) == [(0, 2), (2, 3)]
    assert word_spans([]) == []


def test_marker_counts_as_single_token():
    assert word_spans([f"{NUM}年"]) == [(0, 2)]
    s = evaluate_segmentation([[f"{NUM}年"]], [[NUM, "年"]])
    assert s.n_correct == 0 and s.n_pred == 2 and s.n_gold == 1


def test_token_coverage_mismatch_rejected():
    with pytest.raises(ValueError, match="different tokens"):
        evaluate_segmentation([["ab"]], [["a"]])
    with pytest.raises(ValueError, match="sentence count"):
        evaluate_segmentation([["a"]], [])


def test_matches_boundary_walk_oracle():
    rng = np.random.default_rng(5)
    alphabet = "abcdefghij"

    def random_segmentation(chars):
        words, i = [], 0
        while i < len(chars):
            n = int(rng.integers(1, 4))
            words.append(chars[i:i + n])
            i += n
        return words

    for _ in range(200):
        chars = "".join(rng.choice(list(alphabet), size=rng.integers(1, 15)))
        gold = [random_segmentation(chars)]
        pred = [random_segmentation(chars)]
        s = evaluate_segmentation(gold, pred)
        p, r, f = naive_word_prf(gold, pred)
        assert s.precision == pytest.approx(p)
        assert s.recall == pytest.approx(r)
        assert s.f1 == pytest.approx(f)


def test_oov_recall_counts_only_unseen_gold_words():
    gold = [["天气", "不错"], ["新词"]]
    pred = [["天气", "不", "错"], ["新词"]]
    s = evaluate_segmentation(gold, pred, training_words={"天气"})
    # OOV gold words: 不错 (missed), 新词 (found)
    assert s.n_oov == 2
    assert s.oov_recall == pytest.approx(0.5)
    assert not s.oov_vacuous


def test_oov_recall_vacuous_when_nothing_unseen():
    gold = [["天气"]]
    s = evaluate_segmentation(gold, gold, training_words={"天气"})
    assert s.oov_recall == 1.0
    assert s.oov_vacuous


def test_f1_degenerate():
    assert f1_score(0.0, 0.0) == 0.0


def test_macro_average():
    per_corpus = [98.07, 96.06, 96.39, 96.41, 95.66, 96.32, 95.57, 97.08]
    assert macro_average(per_corpus) == pytest.approx(96.445)
    with pytest.raises(ValueError):
        macro_average([])


def test_report_layout():
    s = SegScores(precision=0.5, recall=0.25, f1=f1_score(0.5, 0.25),
                  oov_recall=1.0, oov_vacuous=True,
                  n_gold=4, n_pred=2, n_correct=1, n_oov=0)
    text = format_report([("pku", s)])
    lines = text.splitlines()
    assert lines[0] == "criterion\tprecision\trecall\tf1\toov_recall\toov_vacuous"
    assert lines[1] == "pku\t50.00\t25.00\t33.33\t100.00\tyes"
    assert text.endswith("\n")
