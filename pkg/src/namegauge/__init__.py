"""Desk-scale evaluation toolkit for single-word clinical speech assessment.

Subpackages cover the full pipeline: manifest/embedding data structures
(records, storage), participant-grouped splitting and class balancing
(splits), the audio frontend (audio, features), transcription and
detection metrics (metrics), the frozen-feature probe (probe), the
statistical battery (stats, validity), and reporting (report, cli).
"""

from .metrics import (
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
from .records import (
    EmbeddingSet,
    HypothesisSet,
    Manifest,
    TrialRecord,
    filter_scored,
    generate_synthetic_manifest,
    make_manifest,
)
from .splits import (
    SplitAssignment,
    downsample_to_minority,
    split_participants,
    split_per_cohort,
)
from .storage import (
    load_hypotheses,
    load_manifest,
    read_embeddings,
    save_hypotheses,
    save_manifest,
    write_embeddings,
)

__all__ = [
    "ConfusionCounts",
    "EditCounts",
    "EmbeddingSet",
    "HypothesisSet",
    "Manifest",
    "SplitAssignment",
    "TrialRecord",
    "binarize_score",
    "confusion_accuracy",
    "corpus_wer",
    "detect_target",
    "downsample_to_minority",
    "edit_ops",
    "f1_macro",
    "filter_scored",
    "generate_synthetic_manifest",
    "load_hypotheses",
    "load_manifest",
    "make_manifest",
    "normalize_text",
    "read_embeddings",
    "save_hypotheses",
    "save_manifest",
    "split_participants",
    "split_per_cohort",
    "wer",
    "write_embeddings",
]
