"""Foundation-model bridge for the namegauge evaluation toolkit.

Exports per-trial transcription hypotheses and time-pooled encoder
embeddings in the toolkit's interchange formats, and drives transcription
fine-tuning. The `tiny` backend runs fully offline; the `whisper` backend
wraps Hugging Face checkpoints when available.
"""

from .config import AdapterConfig
from .export import export_embeddings, export_hypotheses
from .finetune import finetune, word_error_rate

__all__ = [
    "AdapterConfig",
    "export_embeddings",
    "export_hypotheses",
    "finetune",
    "word_error_rate",
]
