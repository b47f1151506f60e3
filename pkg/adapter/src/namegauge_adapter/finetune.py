"""Transcription fine-tuning.

Cross-entropy over teacher-forced tokens, AdamW at peak lr 1e-5 with 250
linear warmup steps then linear decay over at most 1000 steps, validation
decoding every 50 steps at batch 8, best checkpoint by validation WER
(step 0 included, ties keep the earlier step).
"""

from __future__ import annotations

import torch

from .audio_io import AudioReadError, load_wav_16k, log_mel_frames
from .backends import load_backend
from .config import AdapterConfig
from .formats import read_manifest, write_tsv


def word_error_rate(reference: str, hypothesis: str) -> float:
    """Word-level Levenshtein over whitespace tokens, as a percentage."""
    ref = reference.lower().split()
    hyp = hypothesis.lower().split()
    if not ref:
        return 0.0 if not hyp else 100.0 * len(hyp)
    previous = list(range(len(hyp) + 1))
    for i, ref_tok in enumerate(ref, start=1):
        current = [i]
        for j, hyp_tok in enumerate(hyp, start=1):
            current.append(
                min(
                    previous[j - 1] + (ref_tok != hyp_tok),
                    previous[j] + 1,
                    current[-1] + 1,
                )
            )
        previous = current
    return 100.0 * previous[-1] / len(ref)


def _lr_at(step: int, cfg: AdapterConfig) -> float:
    if cfg.warmup_steps > 0 and step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    if cfg.max_steps == cfg.warmup_steps:
        return cfg.peak_lr
    return cfg.peak_lr * (cfg.max_steps - step) / (cfg.max_steps - cfg.warmup_steps)


def _load_partition(cfg: AdapterConfig, split: dict, partition: str) -> list:
    base = cfg.manifest.parent
    rows = []
    for trial in read_manifest(cfg.manifest):
        if split.get(trial["participant_id"]) != partition:
            continue
        try:
            samples = load_wav_16k(base / trial["audio_path"])
        except AudioReadError:
            continue
        rows.append((log_mel_frames(samples), trial["transcript"]))
    return rows


def _validation_wer(backend, rows, batch_size: int) -> float:
    backend.train_mode(False)
    total = 0.0
    for start in range(0, len(rows), batch_size):
        for mel, text in rows[start : start + batch_size]:
            total += word_error_rate(text, backend.transcribe_mel(mel))
    return total / len(rows)


def finetune(cfg: AdapterConfig, split: dict) -> dict:
    """Run the recipe; returns paths to the checkpoint dir and history TSV.

    split maps participant_id -> train|validation|test (the toolkit's
    split.json `assignments` object).
    """
    backend = load_backend(cfg)
    if not hasattr(backend, "loss") or not hasattr(backend, "transcribe_mel"):
        raise ValueError(f"backend {backend.name!r} does not support fine-tuning")
    train_rows = _load_partition(cfg, split, "train")
    val_rows = _load_partition(cfg, split, "validation")
    if not train_rows or not val_rows:
        raise ValueError(
            f"need train and validation data, got {len(train_rows)} / {len(val_rows)}"
        )
    optimizer = torch.optim.AdamW(backend.parameters(), lr=cfg.peak_lr)
    generator = torch.Generator().manual_seed(cfg.seed)

    history = []

    def evaluate(step, train_loss):
        wer = _validation_wer(backend, val_rows, cfg.eval_batch_size)
        if step > 0:  # step 0 is the selection baseline, not a history row
            history.append((step, f"{train_loss:.6f}", f"{wer:.4f}",
                            f"{_lr_at(step, cfg):.3e}"))
        return wer

    first_wer = evaluate(0, float("nan"))
    state = {k: v.detach().clone() for k, v in backend.model.state_dict().items()}
    best = (state, first_wer, 0)  # (state_dict, wer, step)

    order = []
    cursor = 0
    running_loss = 0.0
    running_count = 0
    for step in range(1, cfg.max_steps + 1):
        if cursor >= len(order):
            order = torch.randperm(len(train_rows), generator=generator).tolist()
            cursor = 0
        batch = [train_rows[i] for i in order[cursor : cursor + cfg.batch_size]]
        cursor += cfg.batch_size
        backend.train_mode(True)
        lr = _lr_at(step, cfg)
        for group in optimizer.param_groups:
            group["lr"] = lr
        optimizer.zero_grad()
        loss = backend.loss([m for m, _ in batch], [t for _, t in batch])
        loss.backward()
        optimizer.step()
        running_loss += float(loss.detach())
        running_count += 1
        if step % cfg.eval_interval == 0 or step == cfg.max_steps:
            wer = evaluate(step, running_loss / running_count)
            running_loss = 0.0
            running_count = 0
            if wer < best[1]:
                state = {
                    k: v.detach().clone()
                    for k, v in backend.model.state_dict().items()
                }
                best = (state, wer, step)

    backend.model.load_state_dict(best[0])
    checkpoint_dir = cfg.out / "checkpoint"
    backend.save(
        checkpoint_dir,
        extra={"best_step": best[2], "best_val_wer": best[1], "seed": cfg.seed},
    )
    history_path = cfg.out / "finetune_history.tsv"
    write_tsv(history_path, ("step", "train_loss", "val_wer", "lr"), history)
    # one-row summary in the evaluation toolkit's wer_summary layout so
    # the primary `report` command can merge it directly
    summary_path = cfg.out / f"wer_summary__ft-{cfg.size}.tsv"
    write_tsv(
        summary_path,
        ("dataset", "size", "model", "mode", "wer", "n_trials", "n_skipped"),
        [("validation", cfg.size, f"ft-{cfg.size}", "mean_per_trial",
          f"{best[1]:.4f}", len(val_rows), 0)],
    )
    return {
        "checkpoint": checkpoint_dir,
        "history": history_path,
        "summary": summary_path,
        "best_step": best[2],
        "best_val_wer": best[1],
        "step0_val_wer": first_wer,
    }
