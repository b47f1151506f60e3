"""Hypothesis and embedding export.

Exports cover exactly the manifest's trial ids minus those listed in the
error sidecar; unreadable audio never fails the run.
"""

from __future__ import annotations

from .audio_io import AudioReadError, load_wav_16k
from .backends import load_backend
from .config import AdapterConfig
from .formats import read_manifest, write_cseb, write_error_sidecar, write_hypotheses


def _iter_audio(cfg: AdapterConfig):
    trials = read_manifest(cfg.manifest)
    base = cfg.manifest.parent
    errors = []
    readable = []
    for trial in trials:
        try:
            samples = load_wav_16k(base / trial["audio_path"])
        except AudioReadError as exc:
            errors.append((trial["trial_id"], str(exc)))
            continue
        readable.append((trial["trial_id"], samples))
    return readable, errors


def export_hypotheses(cfg: AdapterConfig) -> dict:
    backend = load_backend(cfg)
    readable, errors = _iter_audio(cfg)
    entries = {}
    for trial_id, samples in readable:
        entries[trial_id] = backend.transcribe(samples)
    cfg.out.mkdir(parents=True, exist_ok=True)
    hyp_path = cfg.out / "hypotheses.jsonl"
    sidecar = cfg.out / "export_errors.jsonl"
    write_hypotheses(entries, hyp_path)
    write_error_sidecar(errors, sidecar)
    return {"hypotheses": hyp_path, "errors": sidecar, "n": len(entries),
            "n_errors": len(errors)}


def export_embeddings(cfg: AdapterConfig) -> dict:
    backend = load_backend(cfg)
    readable, errors = _iter_audio(cfg)
    entries = {}
    for trial_id, samples in readable:
        entries[trial_id] = backend.embed(samples)
    cfg.out.mkdir(parents=True, exist_ok=True)
    cseb_path = cfg.out / "embeddings.cseb"
    sidecar = cfg.out / "export_errors.jsonl"
    write_cseb(entries, backend.embedding_dim, cseb_path)
    write_error_sidecar(errors, sidecar)
    return {"embeddings": cseb_path, "errors": sidecar, "n": len(entries),
            "n_errors": len(errors)}
