"""Verbatim-transcription scoring and target-word detection.

Word error rate is 100 * (S + I + D) / N over a minimal word-level edit
alignment; it can exceed 100 when insertions dominate. Target detection is
exact token membership after normalization, so "combs" never matches the
target "comb".
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MetricError

# Keep letters/digits plus apostrophes and hyphens; everything else is a
# separator. Non-words ("comg") survive normalization verbatim.
_STRIP = re.compile(r"[^\w\s'\-]+", re.UNICODE)
_EDGE = re.compile(r"^['\-]+|['\-]+$")


def normalize_text(text: str) -> list:
    """Lowercased tokens with punctuation stripped.

    Intra-word apostrophes and hyphens are preserved ("don't",
    "forty-two"); leading/trailing ones are stripped.
    """
    cleaned = _STRIP.sub(" ", text.lower())
    tokens = []
    for token in cleaned.split():
        token = _EDGE.sub("", token)
        if token:
            tokens.append(token)
    return tokens


@dataclass(frozen=True)
class EditCounts:
    """Substitutions, insertions, deletions against an N-word reference."""

    S: int
    I: int
    D: int
    N: int

    def __post_init__(self):
        if min(self.S, self.I, self.D, self.N) < 0:
            raise MetricError("edit counts must be non-negative")
        if self.S + self.D > self.N:
            raise MetricError(
                f"S + D = {self.S + self.D} exceeds reference length {self.N}"
            )

    @property
    def errors(self) -> int:
        return self.S + self.I + self.D


def edit_ops(ref, hyp) -> EditCounts:
    """Minimal-cost word-level alignment (unit costs).

    S + I + D equals the Levenshtein distance between the token
    sequences. Ties during backtracking prefer substitution, then
    deletion, then insertion; the total is invariant to that choice.
    """
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        raise MetricError("WER is undefined for an empty reference (N = 0)")
    rows, cols = len(ref) + 1, len(hyp) + 1
    dist = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        dist[i][0] = i
    for j in range(cols):
        dist[0][j] = j
    for i in range(1, rows):
        ref_tok = ref[i - 1]
        for j in range(1, cols):
            same = ref_tok == hyp[j - 1]
            dist[i][j] = min(
                dist[i - 1][j - 1] + (0 if same else 1),
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
            )
    subs = ins = dels = 0
    i, j = len(ref), len(hyp)
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (
            0 if ref[i - 1] == hyp[j - 1] else 1
        ):
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i -= 1
            j -= 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(S=subs, I=ins, D=dels, N=len(ref))


def wer(counts: EditCounts) -> float:
    """Word error rate as a percentage; may exceed 100."""
    if counts.N < 1:
        raise MetricError("WER is undefined for N = 0")
    return 100.0 * counts.errors / counts.N


@dataclass(frozen=True)
class CorpusWer:
    """Aggregate WER over a set of trials."""

    value: float
    mode: str
    n_scored: int
    n_skipped: int


def corpus_wer(pairs, mode: str = "mean_per_trial") -> CorpusWer:
    """Aggregate WER over (reference, hypothesis) string pairs.

    mean_per_trial averages per-trial WER (the convention for reported
    averages); pooled divides total errors by total reference words.
    Trials whose reference normalizes to nothing are skipped and counted.
    """
    if mode not in ("mean_per_trial", "pooled"):
        raise MetricError(f"unknown corpus WER mode {mode!r}")
    per_trial = []
    total_errors = 0
    total_words = 0
    skipped = 0
    for ref_text, hyp_text in pairs:
        ref = normalize_text(ref_text)
        hyp = normalize_text(hyp_text)
        if not ref:
            skipped += 1
            continue
        counts = edit_ops(ref, hyp)
        per_trial.append(wer(counts))
        total_errors += counts.errors
        total_words += counts.N
    if not per_trial:
        raise MetricError("no trial has a non-empty reference")
    if mode == "mean_per_trial":
        value = sum(per_trial) / len(per_trial)
    else:
        value = 100.0 * total_errors / total_words
    return CorpusWer(
        value=value, mode=mode, n_scored=len(per_trial), n_skipped=skipped
    )


OUTCOMES = ("TP", "TN", "FP", "FN")


def detect_target(ref: str, hyp: str, target: str) -> str:
    """Classify one trial's target-word detection as TP/TN/FP/FN.

    Membership means the normalized target token appears in the
    normalized token set of the transcript.
    """
    target_tokens = normalize_text(target)
    if len(target_tokens) != 1:
        raise MetricError(
            f"target must normalize to exactly one token, got {target_tokens!r}"
        )
    token = target_tokens[0]
    in_ref = token in set(normalize_text(ref))
    in_hyp = token in set(normalize_text(hyp))
    if in_ref and in_hyp:
        return "TP"
    if in_ref:
        return "FN"
    if in_hyp:
        return "FP"
    return "TN"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise MetricError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_outcomes(cls, outcomes) -> "ConfusionCounts":
        tally = {k: 0 for k in OUTCOMES}
        for outcome in outcomes:
            if outcome not in tally:
                raise MetricError(f"unknown detection outcome {outcome!r}")
            tally[outcome] += 1
        return cls(tp=tally["TP"], tn=tally["TN"], fp=tally["FP"], fn=tally["FN"])


def confusion_accuracy(counts: ConfusionCounts) -> float:
    """(TP + TN) / total."""
    if counts.total < 1:
        raise MetricError("accuracy is undefined over zero outcomes")
    return (counts.tp + counts.tn) / counts.total


def binarize_score(score: int) -> int:
    """Merge score 1 into 0 (impaired); score 2 becomes 1 (unimpaired)."""
    if score not in (0, 1, 2):
        raise MetricError(f"score {score!r} outside {{0,1,2}}")
    return 1 if score == 2 else 0


@dataclass(frozen=True)
class ClassScores:
    """Per-class precision/recall/F1 plus their unweighted macro mean."""

    precision: tuple
    recall: tuple
    f1: tuple
    macro: float
    n: int


def f1_macro(preds, labels) -> ClassScores:
    """Binary per-class F1 and macro over classes {0, 1}.

    Zero-division convention: precision is 0 with no positive
    predictions, recall is 0 with no positive labels, and F1 is 0 when
    precision + recall is 0.
    """
    preds = list(preds)
    labels = list(labels)
    if len(preds) != len(labels):
        raise MetricError(
            f"length mismatch: {len(preds)} predictions vs {len(labels)} labels"
        )
    if not preds:
        raise MetricError("f1_macro needs at least one prediction")
    for value in preds + labels:
        if value not in (0, 1):
            raise MetricError(f"f1_macro expects binarized values, got {value!r}")
    precision, recall, f1 = [], [], []
    for cls in (0, 1):
        tp = sum(1 for p, l in zip(preds, labels) if p == cls and l == cls)
        pred_pos = sum(1 for p in preds if p == cls)
        label_pos = sum(1 for l in labels if l == cls)
        p = tp / pred_pos if pred_pos else 0.0
        r = tp / label_pos if label_pos else 0.0
        f = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
    return ClassScores(
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        macro=sum(f1) / 2.0,
        n=2,
    )
