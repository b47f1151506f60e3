"""Trial, manifest, and interchange data structures.

A manifest is an ordered list of naming-task trials. Each trial carries a
verbatim ground-truth transcript, the stimulus (target) word, and up to
four rater scores on a 0/1/2 scale. All types are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ManifestError

METRICS = ("semantic", "dysfluency", "self_correction", "phonology")
COHORTS = ("healthy", "patient", "synthetic")
VALID_SCORES = (0, 1, 2)


@dataclass(frozen=True)
class TrialRecord:
    """One naming-task trial.

    scores holds only the metrics that were actually rated; a missing key
    means the trial was not scored on that metric.
    """

    trial_id: str
    participant_id: str
    cohort: str
    audio_path: str
    transcript: str
    target_word: str
    scores: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.trial_id:
            raise ManifestError("trial_id must be non-empty")
        if self.cohort not in COHORTS:
            raise ManifestError(
                f"trial {self.trial_id!r}: unknown cohort {self.cohort!r}"
            )
        if not self.target_word or any(c.isspace() for c in self.target_word):
            raise ManifestError(
                f"trial {self.trial_id!r}: target_word must be a single "
                f"non-empty token, got {self.target_word!r}"
            )
        for metric, score in self.scores.items():
            if metric not in METRICS:
                raise ManifestError(
                    f"trial {self.trial_id!r}: unknown metric {metric!r}"
                )
            if score not in VALID_SCORES:
                raise ManifestError(
                    f"trial {self.trial_id!r}: metric {metric!r} score "
                    f"{score!r} outside {{0,1,2}}"
                )

    def has_any_score(self) -> bool:
        return len(self.scores) > 0

    def score_for(self, metric: str):
        if metric not in METRICS:
            raise ManifestError(f"unknown metric {metric!r}")
        return self.scores.get(metric)


@dataclass(frozen=True)
class Manifest:
    """Ordered trials plus the stimulus word list they were drawn from."""

    records: tuple
    stimuli: tuple

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.trial_id in seen:
                raise ManifestError(f"duplicate trial_id {rec.trial_id!r}")
            seen.add(rec.trial_id)
        stimulus_set = set(self.stimuli)
        for rec in self.records:
            if rec.target_word not in stimulus_set:
                raise ManifestError(
                    f"trial {rec.trial_id!r}: target_word "
                    f"{rec.target_word!r} not in stimulus list"
                )

    def __len__(self):
        return len(self.records)

    def participant_ids(self) -> list:
        """Participants in order of first appearance."""
        seen = []
        known = set()
        for rec in self.records:
            if rec.participant_id not in known:
                known.add(rec.participant_id)
                seen.append(rec.participant_id)
        return seen

    def subset(self, predicate) -> "Manifest":
        return Manifest(
            records=tuple(r for r in self.records if predicate(r)),
            stimuli=self.stimuli,
        )


def make_manifest(records, stimuli=None) -> Manifest:
    """Build a Manifest; stimuli default to the sorted target words seen."""
    records = tuple(records)
    if stimuli is None:
        stimuli = tuple(sorted({r.target_word for r in records}))
    return Manifest(records=records, stimuli=tuple(stimuli))


def filter_scored(manifest: Manifest) -> Manifest:
    """Trials with at least one rated metric, in the original order.

    Trials with no ground-truth score on any metric cannot be used for
    score prediction and are dropped. Idempotent.
    """
    return manifest.subset(TrialRecord.has_any_score)


def generate_synthetic_manifest(stimuli, accents) -> Manifest:
    """One synthetic trial per (stimulus, accent) pair.

    Synthesized speech is unimpaired by construction, so every record
    carries score 2 on all four metrics (toolkit convention; see README).
    transcript == target_word == stimulus, and audio_path follows
    synthetic/<accent>/<word>.wav. The audio itself is produced externally.
    """
    stimuli = list(stimuli)
    accents = list(accents)
    if not stimuli or not accents:
        raise ManifestError("stimuli and accents must both be non-empty")
    if len(set(stimuli)) != len(stimuli):
        dupes = sorted({s for s in stimuli if stimuli.count(s) > 1})
        raise ManifestError(f"duplicate stimuli: {dupes}")
    records = []
    for accent in accents:
        for word in stimuli:
            records.append(
                TrialRecord(
                    trial_id=f"syn-{accent}-{word}",
                    participant_id=f"synthetic-{accent}",
                    cohort="synthetic",
                    audio_path=f"synthetic/{accent}/{word}.wav",
                    transcript=word,
                    target_word=word,
                    scores={m: 2 for m in METRICS},
                )
            )
    return Manifest(records=tuple(records), stimuli=tuple(stimuli))


class EmbeddingSet:
    """trial_id -> fixed-length float32 feature vector."""

    def __init__(self, dim: int, entries: dict):
        if dim < 1:
            raise ManifestError(f"embedding dim must be positive, got {dim}")
        self.dim = int(dim)
        self.entries = {}
        for trial_id, vec in entries.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise ManifestError(
                    f"embedding for {trial_id!r} has length {arr.shape}, "
                    f"expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise ManifestError(
                    f"embedding for {trial_id!r} contains non-finite values"
                )
            arr.setflags(write=False)
            self.entries[trial_id] = arr

    def __len__(self):
        return len(self.entries)

    def __contains__(self, trial_id):
        return trial_id in self.entries

    def __getitem__(self, trial_id):
        return self.entries[trial_id]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        if self.dim != other.dim or set(self.entries) != set(other.entries):
            return False
        return all(
            np.array_equal(vec, other.entries[tid])
            for tid, vec in self.entries.items()
        )


@dataclass(frozen=True)
class HypothesisSet:
    """trial_id -> predicted transcript (possibly empty string)."""

    entries: dict

    def __len__(self):
        return len(self.entries)

    def __contains__(self, trial_id):
        return trial_id in self.entries

    def __getitem__(self, trial_id):
        return self.entries[trial_id]
