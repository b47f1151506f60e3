"""Adapter configuration.

Fine-tune defaults follow the transcription recipe: at most 1000 steps at
batch 16, peak learning rate 1e-5 with 250 linear warmup steps then
linear decay, validation every 50 steps at batch 8, best checkpoint by
validation WER.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

SIZES = ("small", "medium")


@dataclass
class AdapterConfig:
    manifest: Path
    out: Path
    size: str = "small"
    backend: str = "tiny"          # tiny | whisper
    checkpoint: Path = None        # None = baseline weights
    device: str = "cpu"
    seed: int = 42
    layer: int = -1                # encoder layer to pool for embeddings
    # fine-tune recipe
    max_steps: int = 1000
    batch_size: int = 16
    peak_lr: float = 1e-5
    warmup_steps: int = 250
    eval_interval: int = 50
    eval_batch_size: int = 8

    def __post_init__(self):
        if self.size not in SIZES:
            raise ValueError(f"size must be one of {SIZES}, got {self.size!r}")
        if self.backend not in ("tiny", "whisper"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.warmup_steps > self.max_steps:
            raise ValueError("warmup_steps exceeds max_steps")
        self.manifest = Path(self.manifest)
        self.out = Path(self.out)
        if self.checkpoint is not None:
            self.checkpoint = Path(self.checkpoint)
