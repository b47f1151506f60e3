"""Recognizer backends.

TinyRecognizer is a self-contained character-level encoder-decoder that
runs and trains offline; it exists so exports, fine-tuning, and the
format contracts are exercisable without downloading a foundation model.
WhisperBackend wraps a Hugging Face Whisper checkpoint behind the same
interface when `transformers` and weights are available.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .audio_io import N_MELS, log_mel_frames

VOCAB = ["<pad>", "<sos>", "<eos>"] + list("abcdefghijklmnopqrstuvwxyz '-")
CHAR_TO_ID = {c: i for i, c in enumerate(VOCAB)}
PAD, SOS, EOS = 0, 1, 2
MAX_DECODE_LEN = 48

_WIDTHS = {"small": (64, 96), "medium": (96, 128)}


def encode_text(text: str) -> list:
    ids = [CHAR_TO_ID[c] for c in text.lower() if c in CHAR_TO_ID and c != "<pad>"]
    return [SOS] + ids + [EOS]


def decode_ids(ids) -> str:
    chars = []
    for i in ids:
        if i == EOS:
            break
        if i > EOS:
            chars.append(VOCAB[i])
    return "".join(chars).strip()


class TinyRecognizer(nn.Module):
    """Conv + GRU encoder, attention-GRU char decoder."""

    def __init__(self, size: str = "small", seed: int = 42):
        super().__init__()
        conv_width, hidden = _WIDTHS[size]
        self.size = size
        self.hidden = hidden
        torch.manual_seed(seed)
        self.conv = nn.Conv1d(N_MELS, conv_width, kernel_size=3, stride=2, padding=1)
        self.encoder = nn.GRU(conv_width, hidden, batch_first=True)
        self.embed = nn.Embedding(len(VOCAB), hidden)
        self.decoder = nn.GRUCell(hidden * 2, hidden)
        self.out = nn.Linear(hidden, len(VOCAB))

    def encode(self, mel: torch.Tensor) -> torch.Tensor:
        """(B, T, N_MELS) -> (B, T', hidden) encoder states."""
        x = self.conv(mel.transpose(1, 2)).transpose(1, 2)
        x = torch.relu(x)
        states, _ = self.encoder(x)
        return states

    def _attend(self, query: torch.Tensor, states: torch.Tensor) -> torch.Tensor:
        scores = torch.einsum("bh,bth->bt", query, states) / self.hidden**0.5
        weights = torch.softmax(scores, dim=1)
        return torch.einsum("bt,bth->bh", weights, states)

    def step_logits(self, states, tokens):
        """Teacher-forced logits for a (B, L) token matrix (SOS first)."""
        batch, length = tokens.shape
        hidden = states.mean(dim=1)
        logits = []
        for position in range(length - 1):
            emb = self.embed(tokens[:, position])
            context = self._attend(hidden, states)
            hidden = self.decoder(torch.cat([emb, context], dim=1), hidden)
            logits.append(self.out(hidden))
        return torch.stack(logits, dim=1)  # (B, L-1, vocab)

    @torch.no_grad()
    def greedy_decode(self, states: torch.Tensor) -> list:
        batch = states.shape[0]
        hidden = states.mean(dim=1)
        token = torch.full((batch,), SOS, dtype=torch.long, device=states.device)
        finished = torch.zeros(batch, dtype=torch.bool, device=states.device)
        outputs = [[] for _ in range(batch)]
        for _ in range(MAX_DECODE_LEN):
            emb = self.embed(token)
            context = self._attend(hidden, states)
            hidden = self.decoder(torch.cat([emb, context], dim=1), hidden)
            token = self.out(hidden).argmax(dim=1)
            for b in range(batch):
                if not finished[b]:
                    if token[b].item() == EOS:
                        finished[b] = True
                    else:
                        outputs[b].append(token[b].item())
            if bool(finished.all()):
                break
        return [decode_ids(ids + [EOS]) for ids in outputs]


class TinyBackend:
    """Offline backend over TinyRecognizer."""

    name = "tiny"

    def __init__(self, size: str, device: str = "cpu", seed: int = 42):
        self.device = torch.device(device)
        self.model = TinyRecognizer(size=size, seed=seed).to(self.device)
        self.model.eval()

    @classmethod
    def load(cls, checkpoint: Path, device: str = "cpu") -> "TinyBackend":
        meta = json.loads((Path(checkpoint) / "config.json").read_text())
        backend = cls(size=meta["size"], device=device, seed=meta.get("seed", 42))
        state = torch.load(
            Path(checkpoint) / "model.pt", map_location=backend.device,
            weights_only=True,
        )
        backend.model.load_state_dict(state)
        backend.model.eval()
        return backend

    def save(self, out_dir: Path, extra: dict = None) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        torch.save(self.model.state_dict(), out_dir / "model.pt")
        meta = {"backend": self.name, "size": self.model.size}
        if extra:
            meta.update(extra)
        (out_dir / "config.json").write_text(json.dumps(meta, indent=2) + "\n")

    def _mel_tensor(self, samples: np.ndarray) -> torch.Tensor:
        mel = log_mel_frames(samples)
        return torch.from_numpy(mel)[None, :, :].to(self.device)

    @torch.no_grad()
    def transcribe(self, samples: np.ndarray) -> str:
        states = self.model.encode(self._mel_tensor(samples))
        return self.model.greedy_decode(states)[0]

    @torch.no_grad()
    def transcribe_mel(self, mel: np.ndarray) -> str:
        states = self.model.encode(torch.from_numpy(mel)[None].to(self.device))
        return self.model.greedy_decode(states)[0]

    @torch.no_grad()
    def embed(self, samples: np.ndarray) -> np.ndarray:
        """Time-pooled final-encoder-layer states for one clip."""
        states = self.model.encode(self._mel_tensor(samples))
        return states.mean(dim=1)[0].cpu().numpy().astype(np.float32)

    @property
    def embedding_dim(self) -> int:
        return self.model.hidden

    def loss(self, mels: list, texts: list) -> torch.Tensor:
        """Teacher-forced cross-entropy over a batch."""
        max_t = max(m.shape[0] for m in mels)
        batch_mel = torch.zeros(len(mels), max_t, N_MELS)
        for i, m in enumerate(mels):
            batch_mel[i, : m.shape[0]] = torch.from_numpy(m)
        tokens = [encode_text(t) for t in texts]
        max_l = max(len(t) for t in tokens)
        batch_tok = torch.full((len(tokens), max_l), PAD, dtype=torch.long)
        for i, t in enumerate(tokens):
            batch_tok[i, : len(t)] = torch.tensor(t)
        states = self.model.encode(batch_mel.to(self.device))
        logits = self.model.step_logits(states, batch_tok.to(self.device))
        targets = batch_tok[:, 1:].to(self.device)
        return nn.functional.cross_entropy(
            logits.reshape(-1, len(VOCAB)), targets.reshape(-1),
            ignore_index=PAD,
        )

    def parameters(self):
        return self.model.parameters()

    def train_mode(self, on: bool) -> None:
        self.model.train(on)


class WhisperBackend:
    """Hugging Face Whisper checkpoints behind the same interface.

    Needs `transformers` plus local or downloadable weights; untested in
    offline environments by nature, kept deliberately thin.
    """

    name = "whisper"
    _MODEL_IDS = {"small": "openai/whisper-small", "medium": "openai/whisper-medium"}

    def __init__(self, size: str, checkpoint=None, device: str = "cpu",
                 layer: int = -1):
        from transformers import WhisperForConditionalGeneration, WhisperProcessor

        source = str(checkpoint) if checkpoint else self._MODEL_IDS[size]
        self.device = torch.device(device)
        self.layer = layer
        self.processor = WhisperProcessor.from_pretrained(source)
        self.model = WhisperForConditionalGeneration.from_pretrained(source)
        self.model.to(self.device)
        self.model.eval()

    @torch.no_grad()
    def transcribe(self, samples: np.ndarray) -> str:
        inputs = self.processor(
            samples, sampling_rate=16000, return_tensors="pt"
        ).input_features.to(self.device)
        generated = self.model.generate(inputs, num_beams=1, do_sample=False)
        return self.processor.batch_decode(generated, skip_special_tokens=True)[0].strip()

    @torch.no_grad()
    def embed(self, samples: np.ndarray) -> np.ndarray:
        inputs = self.processor(
            samples, sampling_rate=16000, return_tensors="pt"
        ).input_features.to(self.device)
        encoder = self.model.get_encoder()
        outputs = encoder(inputs, output_hidden_states=True)
        states = outputs.hidden_states[self.layer]
        return states.mean(dim=1)[0].cpu().numpy().astype(np.float32)

    @property
    def embedding_dim(self) -> int:
        return self.model.config.d_model

    def save(self, out_dir: Path, extra: dict = None) -> None:
        self.model.save_pretrained(out_dir)
        self.processor.save_pretrained(out_dir)

    def parameters(self):
        return self.model.parameters()

    def train_mode(self, on: bool) -> None:
        self.model.train(on)


def load_backend(cfg) -> object:
    if cfg.backend == "tiny":
        if cfg.checkpoint is not None:
            return TinyBackend.load(cfg.checkpoint, device=cfg.device)
        return TinyBackend(size=cfg.size, device=cfg.device, seed=cfg.seed)
    return WhisperBackend(
        size=cfg.size, checkpoint=cfg.checkpoint, device=cfg.device,
        layer=cfg.layer,
    )
