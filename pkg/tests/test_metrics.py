from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import f1_score

from namegauge.errors import MetricError
from namegauge.metrics import (
    ConfusionCounts,
    EditCounts,
    binarize_score,
    confusion_accuracy,
    corpus_wer,
    detect_target,
    edit_ops,
    f1_macro,
    normalize_text,
    wer,
)


def oracle_distance(ref, hyp):
    """Top-down exhaustive edit search, memoized; independent of the
    bottom-up table in the implementation."""

    ref = tuple(ref)
    hyp = tuple(hyp)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        best = go(i + 1, j + 1) + (0 if ref[i] == hyp[j] else 1)
        best = min(best, go(i + 1, j) + 1)  # delete ref[i]
        best = min(best, go(i, j + 1) + 1)  # insert hyp[j]
        return best

    return go(0, 0)


class TestNormalize:
    def test_strips_punctuation_and_case(self):
        assert normalize_text("The Acorn.") == ["the", "acorn"]

    def test_non_words_pass_through(self):
        assert normalize_text("comg") == ["comg"]

    def test_whitespace_only(self):
        assert normalize_text("  ") == []

    def test_keeps_intra_word_marks(self):
        assert normalize_text("don't stop, forty-two!") == [
            "don't", "stop", "forty-two",
        ]

    def test_strips_edge_marks(self):
        assert normalize_text("'quoted' -dash-") == ["quoted", "dash"]


class TestEditOps:
    def test_identity(self):
        counts = edit_ops(["acorn"], ["acorn"])
        assert (counts.S, counts.I, counts.D, counts.N) == (0, 0, 0, 1)

    def test_mixed_ops(self):
        counts = edit_ops(["a", "b", "c"], ["a", "x", "c", "d"])
        assert (counts.S, counts.I, counts.D, counts.N) == (1, 1, 0, 3)
        assert counts.errors == oracle_distance("abc", "axcd")

    def test_substituted_nonword(self):
        counts = edit_ops(["comb"], ["comg"])
        assert counts.S == 1 and counts.N == 1

    def test_empty_reference_errors(self):
        with pytest.raises(MetricError, match="empty reference"):
            edit_ops([], ["a"])

    def test_minimality_against_oracle(self):
        rng = np.random.default_rng(12)
        alphabet = ["a", "b", "c", "d"]
        for _ in range(1000):
            ref = [alphabet[i] for i in rng.integers(0, 4, rng.integers(1, 7))]
            hyp = [alphabet[i] for i in rng.integers(0, 4, rng.integers(0, 7))]
            counts = edit_ops(ref, hyp)
            assert counts.errors == oracle_distance(ref, hyp)
            assert counts.S + counts.D <= counts.N

    def test_zero_wer_iff_equal_tokens(self):
        rng = np.random.default_rng(5)
        alphabet = ["x", "y", "z"]
        for _ in range(300):
            ref = [alphabet[i] for i in rng.integers(0, 3, rng.integers(1, 6))]
            hyp = [alphabet[i] for i in rng.integers(0, 3, rng.integers(0, 6))]
            counts = edit_ops(ref, hyp)
            assert (wer(counts) == 0.0) == (ref == hyp)


class TestWer:
    def test_two_thirds(self):
        assert wer(EditCounts(S=1, I=1, D=0, N=3)) == pytest.approx(66.6667, abs=5e-3)

    def test_identical_is_zero(self):
        assert wer(edit_ops(["a", "b"], ["a", "b"])) == 0.0

    def test_can_exceed_hundred(self):
        assert wer(EditCounts(S=1, I=1, D=0, N=1)) == 200.0

    def test_counts_invariants(self):
        with pytest.raises(MetricError):
            EditCounts(S=2, I=0, D=0, N=1)
        with pytest.raises(MetricError):
            EditCounts(S=-1, I=0, D=0, N=1)


class TestCorpusWer:
    def test_mean_of_two(self):
        result = corpus_wer([("a", "a"), ("b", "x")], mode="mean_per_trial")
        assert result.value == pytest.approx(50.0)

    def test_mode_divergence(self):
        pairs = [("a", "x"), ("b c d e f g h i j", "b c d e f g h i j")]
        mean = corpus_wer(pairs, mode="mean_per_trial")
        pooled = corpus_wer(pairs, mode="pooled")
        assert mean.value == pytest.approx(50.0)
        assert pooled.value == pytest.approx(10.0)

    def test_single_trial_modes_agree(self):
        pairs = [("a b", "a x")]
        assert corpus_wer(pairs, "mean_per_trial").value == corpus_wer(
            pairs, "pooled"
        ).value

    def test_empty_references_skipped_and_counted(self):
        result = corpus_wer([("", "x"), ("a", "a")])
        assert result.n_skipped == 1 and result.n_scored == 1

    def test_all_empty_errors(self):
        with pytest.raises(MetricError):
            corpus_wer([("", "x"), ("  ", "y")])


class TestDetectTarget:
    def test_present_in_both(self):
        assert detect_target("the acorn", "acorn", "acorn") == "TP"

    def test_phonological_error_false_positive(self):
        assert detect_target("comg", "comb", "comb") == "FP"

    def test_absent_in_both(self):
        assert detect_target("dog", "", "acorn") == "TN"

    def test_missed_target(self):
        assert detect_target("comb please", "come", "comb") == "FN"

    def test_exact_token_not_substring(self):
        assert detect_target("combs", "combs", "comb") == "TN"

    def test_multi_token_target_errors(self):
        with pytest.raises(MetricError):
            detect_target("a", "a", "two words")


class TestConfusionAccuracy:
    def test_published_grid_row(self):
        counts = ConfusionCounts(tp=256, tn=24, fp=0, fn=496)
        assert round(confusion_accuracy(counts), 2) == 0.36

    def test_high_row(self):
        counts = ConfusionCounts(tp=397, tn=86, fp=2, fn=39)
        assert round(confusion_accuracy(counts), 2) == 0.92

    def test_all_negative(self):
        assert confusion_accuracy(ConfusionCounts(tp=0, tn=5, fp=0, fn=0)) == 1.0

    def test_empty_errors(self):
        with pytest.raises(MetricError):
            confusion_accuracy(ConfusionCounts())

    def test_symmetry_under_swap(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            tp, tn, fp, fn = (int(x) for x in rng.integers(0, 50, 4))
            if tp + tn + fp + fn == 0:
                continue
            a = confusion_accuracy(ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn))
            b = confusion_accuracy(ConfusionCounts(tp=tn, tn=tp, fp=fn, fn=fp))
            assert a == pytest.approx(b)

    def test_from_outcomes(self):
        counts = ConfusionCounts.from_outcomes(["TP", "TP", "FN", "TN"])
        assert (counts.tp, counts.tn, counts.fp, counts.fn) == (2, 1, 0, 1)


class TestBinarize:
    def test_mapping(self):
        assert binarize_score(0) == 0
        assert binarize_score(1) == 0
        assert binarize_score(2) == 1

    def test_out_of_range(self):
        with pytest.raises(MetricError):
            binarize_score(3)


class TestF1Macro:
    def test_perfect(self):
        scores = f1_macro([0, 1, 0, 1], [0, 1, 0, 1])
        assert scores.macro == 1.0

    def test_hand_computed(self):
        scores = f1_macro([0, 1, 1, 1], [0, 0, 1, 1])
        assert scores.f1[0] == pytest.approx(2 / 3, abs=1e-12)
        assert scores.f1[1] == pytest.approx(0.8, abs=1e-12)
        assert scores.macro == pytest.approx(0.73333333, abs=1e-6)

    def test_absent_class_convention(self):
        scores = f1_macro([1, 1, 1], [1, 1, 1])
        assert scores.f1[0] == 0.0
        assert scores.macro == 0.5

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            f1_macro([0], [0, 1])

    def test_against_sklearn_oracle(self):
        rng = np.random.default_rng(77)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            labels = rng.integers(0, 2, n).tolist()
            preds = rng.integers(0, 2, n).tolist()
            mine = f1_macro(preds, labels).macro
            ref = f1_score(
                labels, preds, labels=[0, 1], average="macro", zero_division=0
            )
            assert mine == pytest.approx(ref, abs=1e-12)

    def test_binarize_relabel_invariance(self):
        # pre-merging raw score 1 into 0 cannot change the binarized F1
        rng = np.random.default_rng(3)
        raw_preds = rng.integers(0, 3, 60).tolist()
        raw_labels = rng.integers(0, 3, 60).tolist()
        relabel = lambda s: 0 if s == 1 else s
        direct = f1_macro(
            [binarize_score(s) for s in raw_preds],
            [binarize_score(s) for s in raw_labels],
        )
        merged = f1_macro(
            [binarize_score(relabel(s)) for s in raw_preds],
            [binarize_score(relabel(s)) for s in raw_labels],
        )
        assert direct == merged


@given(
    st.lists(st.sampled_from("ab"), min_size=1, max_size=6),
    st.lists(st.sampled_from("ab"), max_size=6),
)
@settings(max_examples=200, deadline=None)
def test_edit_ops_matches_oracle_property(ref, hyp):
    counts = edit_ops(ref, hyp)
    assert counts.errors == oracle_distance(ref, hyp)
