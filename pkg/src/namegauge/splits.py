"""Participant-grouped partitioning and per-metric class balancing.

Splitting happens at the participant level so no speaker leaks across
train/validation/test. Partition sizes follow a floor rule: each partition
gets floor(ratio * P) participants and any remainder goes to train.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import SplitError
from .records import Manifest
from .rng import Xoshiro256StarStar
from .storage import atomic_write

PARTITIONS = ("train", "validation", "test")


@dataclass(frozen=True)
class SplitAssignment:
    """participant_id -> partition, plus the seed/ratios that produced it."""

    assignments: dict
    seed: int
    ratios: tuple

    def participants(self, partition: str) -> list:
        if partition not in PARTITIONS:
            raise SplitError(f"unknown partition {partition!r}")
        return sorted(p for p, part in self.assignments.items() if part == partition)

    def partition_of(self, participant_id: str) -> str:
        return self.assignments[participant_id]


def _check_ratios(ratios):
    if len(ratios) != 3:
        raise SplitError(f"expected 3 ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise SplitError(f"ratios must be non-negative: {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {sum(ratios)}")


def split_participant_ids(participant_ids, ratios, seed: int) -> dict:
    """Assign each participant to train/validation/test.

    Participants are shuffled by the seeded generator; the first
    floor(r_train * P) go to train, the next floor(r_val * P) to
    validation, the next floor(r_test * P) to test, and whatever the
    floors left over is appended to train.
    """
    _check_ratios(ratios)
    ids = list(participant_ids)
    if len(set(ids)) != len(ids):
        raise SplitError("participant ids must be unique")
    nonzero = sum(1 for r in ratios if r > 0)
    if len(ids) < nonzero:
        raise SplitError(
            f"{len(ids)} participants cannot fill {nonzero} non-empty partitions"
        )
    rng = Xoshiro256StarStar(seed)
    rng.shuffle(ids)
    counts = [int(r * len(ids)) for r in ratios]
    remainder = len(ids) - sum(counts)
    counts[0] += remainder
    assignments = {}
    cursor = 0
    for partition, count in zip(PARTITIONS, counts):
        for pid in ids[cursor : cursor + count]:
            assignments[pid] = partition
        cursor += count
    return assignments


def split_participants(manifest: Manifest, ratios, seed: int) -> SplitAssignment:
    """Split a manifest's participants (pooled over cohorts).

    Participant order is first appearance in the manifest, so the result
    depends only on manifest content and seed.
    """
    assignments = split_participant_ids(manifest.participant_ids(), ratios, seed)
    return SplitAssignment(assignments=assignments, seed=seed, ratios=tuple(ratios))


def split_per_cohort(manifest: Manifest, ratios, seed: int) -> SplitAssignment:
    """Split each cohort's participants separately, then union.

    Every cohort is partitioned with the same ratios and seed, so each
    partition mixes cohorts in roughly the requested proportions.
    """
    _check_ratios(ratios)
    cohorts = []
    for rec in manifest.records:
        if rec.cohort not in cohorts:
            cohorts.append(rec.cohort)
    assignments = {}
    for cohort in cohorts:
        sub = manifest.subset(lambda r, c=cohort: r.cohort == c)
        assignments.update(split_participant_ids(sub.participant_ids(), ratios, seed))
    return SplitAssignment(assignments=assignments, seed=seed, ratios=tuple(ratios))


def trials_in_partition(
    manifest: Manifest, split: SplitAssignment, partition: str
) -> list:
    if partition not in PARTITIONS:
        raise SplitError(f"unknown partition {partition!r}")
    missing = sorted(
        {r.participant_id for r in manifest.records} - set(split.assignments)
    )
    if missing:
        raise SplitError(f"participants not covered by split: {missing}")
    return [
        r
        for r in manifest.records
        if split.assignments[r.participant_id] == partition
    ]


def downsample_to_minority(trials, metric: str, seed: int) -> list:
    """Balance a trial list so classes 0/1/2 each keep minority-class many.

    Every trial must carry a score for `metric` and each class must occur
    at least once. Retained trials are chosen uniformly without
    replacement by the seeded generator and returned in their original
    relative order.
    """
    trials = list(trials)
    by_class = {0: [], 1: [], 2: []}
    for index, trial in enumerate(trials):
        score = trial.score_for(metric)
        if score is None:
            raise SplitError(
                f"trial {trial.trial_id!r} has no score for metric {metric!r}"
            )
        by_class[score].append(index)
    for cls, members in by_class.items():
        if not members:
            raise SplitError(
                f"class {cls} has zero trials for metric {metric!r}; "
                "cannot balance"
            )
    minority = min(len(m) for m in by_class.values())
    rng = Xoshiro256StarStar(seed)
    keep = []
    for cls in (0, 1, 2):
        keep.extend(rng.sample(by_class[cls], minority))
    return [trials[i] for i in sorted(keep)]


def save_split(split: SplitAssignment, path) -> None:
    payload = {
        "assignments": dict(sorted(split.assignments.items())),
        "seed": split.seed,
        "ratios": list(split.ratios),
    }
    with atomic_write(path, encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def load_split(path) -> SplitAssignment:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    assignments = payload["assignments"]
    for pid, part in assignments.items():
        if part not in PARTITIONS:
            raise SplitError(f"participant {pid!r} has unknown partition {part!r}")
    return SplitAssignment(
        assignments=assignments,
        seed=int(payload["seed"]),
        ratios=tuple(payload["ratios"]),
    )
