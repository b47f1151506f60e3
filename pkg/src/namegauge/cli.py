"""Command-line pipeline driver.

Each subcommand realizes one stage: split, balance, featurize, wer,
detect, probe-train, probe-eval, validity, report. Every run writes its
artifacts atomically plus a run_<subcommand>.json audit record. Exit
codes: 0 success, 1 validation/input error (single-line diagnostic on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import audio, features, metrics, probe, report, splits, storage, validity
from .errors import ToolkitError
from .records import METRICS

DEFAULT_SEED = 42
THREADS_ENV = "NAMEGAUGE_THREADS"

_PATH_FIELDS = (
    "manifest",
    "embeddings",
    "hypotheses",
    "covariates",
    "predictions",
    "probe",
    "split",
    "artifacts",
)


@dataclass
class RunConfig:
    """Validated inputs for one subcommand invocation."""

    subcommand: str
    out: Path
    seed: int = DEFAULT_SEED
    manifest: Path = None
    embeddings: Path = None
    hypotheses: Path = None
    covariates: Path = None
    predictions: Path = None
    probe: Path = None
    split: Path = None
    artifacts: Path = None
    metric: str = None
    mode: str = "mean"
    ratios: tuple = (0.7, 0.1, 0.2)
    partition: str = "train"
    cohort: str = None
    per_cohort: bool = True
    stratify_by: str = None
    label: str = None
    size: str = "-"
    pad_to: float = 30.0
    max_steps: int = None
    warmup: int = None
    batch: int = None
    lr: float = None
    hidden: int = None
    eval_interval: int = None
    inputs: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        cfg = cls(
            subcommand=args.subcommand,
            out=Path(args.out),
            seed=args.seed if args.seed is not None else DEFAULT_SEED,
        )
        for name in (
            "metric", "mode", "partition", "cohort", "per_cohort", "label",
            "size", "pad_to", "max_steps", "warmup", "batch", "lr", "hidden",
            "eval_interval", "stratify_by",
        ):
            if hasattr(args, name) and getattr(args, name) is not None:
                setattr(cfg, name, getattr(args, name))
        if getattr(args, "ratios", None):
            cfg.ratios = _parse_ratios(args.ratios)
        for name in _PATH_FIELDS:
            value = getattr(args, name, None)
            if value is None:
                continue
            path = Path(value)
            if not path.exists():
                raise ToolkitError(f"{name} path does not exist: {path}")
            setattr(cfg, name, path)
            cfg.inputs[name] = str(path)
        return cfg

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ToolkitError(
                    f"{self.subcommand} requires --{name.replace('_', '-')}"
                )


def _parse_ratios(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise ToolkitError(f"--ratios wants a:b:c, got {text!r}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ToolkitError(f"--ratios must be numeric, got {text!r}")
    total = sum(values)
    if total <= 0 or any(v < 0 for v in values):
        raise ToolkitError(f"--ratios must be non-negative with a positive sum")
    return tuple(v / total for v in values)


def _version() -> str:
    try:
        return metadata.version("namegauge")
    except metadata.PackageNotFoundError:
        return "0.0.0+local"


def _thread_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ToolkitError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return min(8, os.cpu_count() or 1)


def _train_config(cfg: RunConfig) -> probe.TrainConfig:
    kwargs = {"seed": cfg.seed}
    if cfg.max_steps is not None:
        kwargs["max_steps"] = cfg.max_steps
    if cfg.warmup is not None:
        kwargs["warmup_steps"] = cfg.warmup
    if cfg.batch is not None:
        kwargs["batch_size"] = cfg.batch
    if cfg.lr is not None:
        kwargs["peak_lr"] = cfg.lr
    if cfg.hidden is not None:
        kwargs["hidden"] = cfg.hidden
    if cfg.eval_interval is not None:
        kwargs["eval_interval"] = cfg.eval_interval
    return probe.TrainConfig(**kwargs)


def _check_metric(cfg: RunConfig):
    cfg.require("metric")
    if cfg.metric not in METRICS:
        raise ToolkitError(
            f"--metric must be one of {'|'.join(METRICS)}, got {cfg.metric!r}"
        )


def _load_pairs(cfg: RunConfig):
    """Manifest plus hypotheses with full trial coverage."""
    manifest = storage.load_manifest(cfg.manifest)
    hyps = storage.load_hypotheses(cfg.hypotheses)
    for rec in manifest.records:
        if rec.trial_id not in hyps:
            raise ToolkitError(
                f"hypotheses file lacks trial_id {rec.trial_id!r}"
            )
    return manifest, hyps


def cmd_split(cfg: RunConfig) -> list:
    cfg.require("manifest")
    if cfg.stratify_by is not None:
        raise ToolkitError(
            "--stratify-by is reserved but not implemented; splits are not "
            "stratified by severity"
        )
    manifest = storage.load_manifest(cfg.manifest)
    if cfg.per_cohort:
        assignment = splits.split_per_cohort(manifest, cfg.ratios, cfg.seed)
    else:
        assignment = splits.split_participants(manifest, cfg.ratios, cfg.seed)
    out = cfg.out / "split.json"
    splits.save_split(assignment, out)
    return [out]


def cmd_balance(cfg: RunConfig) -> list:
    cfg.require("manifest", "split")
    _check_metric(cfg)
    manifest = storage.load_manifest(cfg.manifest)
    assignment = splits.load_split(cfg.split)
    pool = splits.trials_in_partition(manifest, assignment, cfg.partition)
    scored = [t for t in pool if t.score_for(cfg.metric) is not None]
    if not scored:
        raise ToolkitError(
            f"no {cfg.partition} trial carries a {cfg.metric} score"
        )
    balanced = splits.downsample_to_minority(scored, cfg.metric, cfg.seed)
    from .records import make_manifest

    out = cfg.out / f"balanced__{cfg.metric}__{cfg.partition}.jsonl"
    storage.save_manifest(
        make_manifest(balanced, manifest.stimuli), out
    )
    return [out]


def cmd_featurize(cfg: RunConfig) -> list:
    cfg.require("manifest")
    manifest = storage.load_manifest(cfg.manifest)
    if len(manifest) == 0:
        raise ToolkitError("manifest has no records to featurize")
    base = cfg.manifest.parent

    def one(rec):
        buf = audio.load_wav(base / rec.audio_path)
        return features.featurize_buffer(buf, pad_to=cfg.pad_to).values

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        vectors = list(pool.map(one, manifest.records))
    from .records import EmbeddingSet

    entries = {
        rec.trial_id: vec for rec, vec in zip(manifest.records, vectors)
    }
    embedding_set = EmbeddingSet(dim=2 * features.N_MELS, entries=entries)
    out = cfg.out / "features.cseb"
    storage.write_embeddings(embedding_set, out)
    return [out]


def cmd_wer(cfg: RunConfig) -> list:
    cfg.require("manifest", "hypotheses")
    manifest, hyps = _load_pairs(cfg)
    mode = "mean_per_trial" if cfg.mode == "mean" else "pooled"
    label = cfg.label or cfg.hypotheses.stem
    tag = report.safe_label(label)

    trial_rows = []
    for rec in manifest.records:
        ref = metrics.normalize_text(rec.transcript)
        hyp = metrics.normalize_text(hyps[rec.trial_id])
        outcome = metrics.detect_target(
            rec.transcript, hyps[rec.trial_id], rec.target_word
        )
        if ref:
            counts = metrics.edit_ops(ref, hyp)
            trial_rows.append(
                (rec.trial_id, counts.N, counts.S, counts.I, counts.D,
                 f"{metrics.wer(counts):.4f}", outcome)
            )
        else:
            trial_rows.append((rec.trial_id, 0, "", "", "", "", outcome))
    trials_path = cfg.out / f"wer_trials__{tag}.tsv"
    report.write_tsv(
        trials_path,
        ("trial_id", "N", "S", "I", "D", "wer", "detection_outcome"),
        trial_rows,
    )

    summary_rows = []
    cohorts = sorted({r.cohort for r in manifest.records})
    groups = [(c, [r for r in manifest.records if r.cohort == c]) for c in cohorts]
    if len(cohorts) > 1:
        groups.append(("all", list(manifest.records)))
    for dataset, records in groups:
        pairs = [(r.transcript, hyps[r.trial_id]) for r in records]
        result = metrics.corpus_wer(pairs, mode=mode)
        summary_rows.append(
            (dataset, cfg.size, label, result.mode,
             f"{result.value:.4f}", result.n_scored, result.n_skipped)
        )
    summary_path = cfg.out / f"wer_summary__{tag}.tsv"
    report.write_tsv(
        summary_path,
        ("dataset", "size", "model", "mode", "wer", "n_trials", "n_skipped"),
        summary_rows,
    )
    return [trials_path, summary_path]


def cmd_detect(cfg: RunConfig) -> list:
    cfg.require("manifest", "hypotheses")
    manifest, hyps = _load_pairs(cfg)
    label = cfg.label or cfg.hypotheses.stem
    tag = report.safe_label(label)

    trial_rows = []
    outcomes_by_cohort = {}
    for rec in manifest.records:
        outcome = metrics.detect_target(
            rec.transcript, hyps[rec.trial_id], rec.target_word
        )
        trial_rows.append((rec.trial_id, rec.target_word, outcome))
        outcomes_by_cohort.setdefault(rec.cohort, []).append(outcome)
    trials_path = cfg.out / f"detect_trials__{tag}.tsv"
    report.write_tsv(
        trials_path, ("trial_id", "target_word", "outcome"), trial_rows
    )

    summary_rows = []
    groups = dict(sorted(outcomes_by_cohort.items()))
    if len(groups) > 1:
        groups["all"] = [o for outs in outcomes_by_cohort.values() for o in outs]
    for dataset, outcomes in groups.items():
        counts = metrics.ConfusionCounts.from_outcomes(outcomes)
        summary_rows.append(
            (dataset, cfg.size, label,
             f"{metrics.confusion_accuracy(counts):.4f}",
             counts.tp, counts.tn, counts.fp, counts.fn)
        )
    summary_path = cfg.out / f"detect_summary__{tag}.tsv"
    report.write_tsv(
        summary_path,
        ("dataset", "size", "model", "accuracy", "tp", "tn", "fp", "fn"),
        summary_rows,
    )
    return [trials_path, summary_path]


def _labelled_features(manifest, embeddings, metric, participant_filter=None):
    xs, ys, ids = [], [], []
    for rec in manifest.records:
        score = rec.score_for(metric)
        if score is None:
            continue
        if participant_filter and rec.participant_id not in participant_filter:
            continue
        if rec.trial_id not in embeddings:
            raise ToolkitError(
                f"embeddings file lacks trial_id {rec.trial_id!r}"
            )
        xs.append(embeddings[rec.trial_id])
        ys.append(score)
        ids.append(rec.trial_id)
    return np.array(xs, dtype=np.float64), np.array(ys), ids


def cmd_probe_train(cfg: RunConfig) -> list:
    cfg.require("manifest", "embeddings", "split")
    _check_metric(cfg)
    manifest = storage.load_manifest(cfg.manifest)
    if cfg.cohort is not None:
        manifest = manifest.subset(lambda r: r.cohort == cfg.cohort)
    assignment = splits.load_split(cfg.split)
    embeddings = storage.read_embeddings(cfg.embeddings)
    train_pids = set(assignment.participants("train"))
    val_pids = set(assignment.participants("validation"))
    train_x, train_y, _ = _labelled_features(
        manifest, embeddings, cfg.metric, train_pids
    )
    val_x, val_y, _ = _labelled_features(manifest, embeddings, cfg.metric, val_pids)
    if len(train_x) == 0:
        raise ToolkitError(f"no train trials scored on {cfg.metric}")
    if len(val_x) == 0:
        raise ToolkitError(f"no validation trials scored on {cfg.metric}")
    trained, history = probe.train_probe(
        train_x, train_y, val_x, val_y, _train_config(cfg)
    )
    tag = report.safe_label(cfg.metric)
    probe_path = cfg.out / f"probe__{tag}.csph"
    history_path = cfg.out / f"history__{tag}.tsv"
    probe.save_probe(trained, probe_path)
    history.to_tsv(history_path)
    return [probe_path, history_path]


def cmd_probe_eval(cfg: RunConfig) -> list:
    cfg.require("manifest", "embeddings", "probe")
    _check_metric(cfg)
    manifest = storage.load_manifest(cfg.manifest)
    if cfg.cohort is not None:
        manifest = manifest.subset(lambda r: r.cohort == cfg.cohort)
    embeddings = storage.read_embeddings(cfg.embeddings)
    trained = probe.load_probe(cfg.probe)
    participant_filter = None
    if cfg.split is not None:
        assignment = splits.load_split(cfg.split)
        participant_filter = set(assignment.participants(cfg.partition))
    label = cfg.label or cfg.metric
    tag = report.safe_label(label)

    rows = []
    preds_bin, truth_bin = [], []
    for rec in manifest.records:
        if participant_filter and rec.participant_id not in participant_filter:
            continue
        if rec.trial_id not in embeddings:
            raise ToolkitError(f"embeddings file lacks trial_id {rec.trial_id!r}")
        score, probs = probe.predict(trained.head, embeddings[rec.trial_id])
        truth = rec.score_for(cfg.metric)
        rows.append(
            (rec.trial_id, rec.participant_id, rec.cohort,
             "" if truth is None else truth, int(score),
             f"{probs[0]:.6f}", f"{probs[1]:.6f}", f"{probs[2]:.6f}")
        )
        if truth is not None:
            preds_bin.append(metrics.binarize_score(int(score)))
            truth_bin.append(metrics.binarize_score(truth))
    if not rows:
        raise ToolkitError("no trials selected for evaluation")
    pred_path = cfg.out / f"predictions__{tag}.tsv"
    report.write_tsv(
        pred_path,
        ("trial_id", "participant_id", "cohort", "true_score", "pred_score",
         "p0", "p1", "p2"),
        rows,
    )
    outputs = [pred_path]
    if truth_bin:
        scores = metrics.f1_macro(preds_bin, truth_bin)
        summary_path = cfg.out / f"eval_summary__{tag}.tsv"
        report.write_tsv(
            summary_path,
            ("label", "metric", "n_scored", "f1_macro",
             "f1_impaired", "f1_unimpaired"),
            [(label, cfg.metric, len(truth_bin), f"{scores.macro:.6f}",
              f"{scores.f1[0]:.6f}", f"{scores.f1[1]:.6f}")],
        )
        outputs.append(summary_path)
    return outputs


def cmd_validity(cfg: RunConfig) -> list:
    cfg.require("predictions", "covariates")
    _check_metric(cfg)
    covariates = validity.load_covariates(cfg.covariates)
    header, rows = report.read_tsv(cfg.predictions)
    needed = {"participant_id", "pred_score"}
    if not needed.issubset(header):
        raise ToolkitError(
            f"predictions file must have columns {sorted(needed)}"
        )
    by_patient = {}
    for row in rows:
        record = dict(zip(header, row))
        by_patient.setdefault(record["participant_id"], []).append(
            int(record["pred_score"])
        )
    status = validity.derive_patient_status(by_patient, cfg.metric)
    battery = validity.validity_analysis(status, covariates)
    tag = report.safe_label(cfg.metric)
    battery_path = cfg.out / f"battery__{tag}.tsv"
    validity.write_battery_report(battery, battery_path)
    status_path = cfg.out / f"status__{tag}.tsv"
    report.write_tsv(
        status_path,
        ("participant_id", "mean_pred_score", "status"),
        [
            (pid, f"{status.means[pid]:.4f}", status.status[pid])
            for pid in sorted(status.means)
        ],
    )
    return [battery_path, status_path]


def cmd_report(cfg: RunConfig) -> list:
    source = cfg.artifacts if cfg.artifacts is not None else cfg.out
    out = cfg.out / "report.md"
    report.emit_report(source, out)
    return [out]


_HANDLERS = {
    "split": cmd_split,
    "balance": cmd_balance,
    "featurize": cmd_featurize,
    "wer": cmd_wer,
    "detect": cmd_detect,
    "probe-train": cmd_probe_train,
    "probe-eval": cmd_probe_eval,
    "validity": cmd_validity,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="namegauge",
        description="Single-word speech assessment evaluation pipeline.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, *flags):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        for flag in flags:
            flag(p)
        return p

    manifest = lambda p: p.add_argument("--manifest")
    hypotheses = lambda p: p.add_argument("--hypotheses")
    embeddings = lambda p: p.add_argument("--embeddings")
    split_flag = lambda p: p.add_argument("--split")
    metric = lambda p: p.add_argument(
        "--metric", choices=list(METRICS)
    )
    label = lambda p: p.add_argument("--label")
    size = lambda p: p.add_argument("--size", default=None)
    partition = lambda p: p.add_argument(
        "--partition", choices=list(splits.PARTITIONS)
    )
    cohort = lambda p: p.add_argument(
        "--cohort", choices=["healthy", "patient", "synthetic"]
    )

    add(
        "split", "participant-grouped train/validation/test split",
        manifest,
        lambda p: p.add_argument("--ratios", default="7:1:2"),
        lambda p: p.add_argument(
            "--per-cohort", dest="per_cohort", action="store_true", default=None
        ),
        lambda p: p.add_argument(
            "--pooled", dest="per_cohort", action="store_false"
        ),
        lambda p: p.add_argument(
            "--stratify-by", dest="stratify_by",
            help="reserved; severity stratification is not implemented",
        ),
    )
    add("balance", "downsample one partition to the minority class",
        manifest, split_flag, metric, partition)
    add(
        "featurize", "pooled log-Mel fallback features to CSEB",
        manifest,
        lambda p: p.add_argument("--pad-to", dest="pad_to", type=float),
    )
    add(
        "wer", "score verbatim transcription",
        manifest, hypotheses, label, size,
        lambda p: p.add_argument("--mode", choices=["mean", "pooled"]),
    )
    add("detect", "target-word detection confusion", manifest, hypotheses,
        label, size)
    add(
        "probe-train", "train the accuracy-score probe",
        manifest, embeddings, split_flag, metric, cohort,
        lambda p: p.add_argument("--max-steps", dest="max_steps", type=int),
        lambda p: p.add_argument("--warmup", type=int),
        lambda p: p.add_argument("--batch", type=int),
        lambda p: p.add_argument("--lr", type=float),
        lambda p: p.add_argument("--hidden", type=int),
        lambda p: p.add_argument(
            "--eval-interval", dest="eval_interval", type=int
        ),
    )
    add(
        "probe-eval", "predict scores with a trained probe",
        manifest, embeddings, metric, label, split_flag, partition, cohort,
        lambda p: p.add_argument("--probe"),
    )
    add(
        "validity", "impairment status and validity battery",
        metric,
        lambda p: p.add_argument("--predictions"),
        lambda p: p.add_argument("--covariates"),
    )
    add(
        "report", "compose report.md from artifacts",
        lambda p: p.add_argument("--artifacts"),
    )
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    started = time.time()
    started_utc = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        cfg = RunConfig.from_args(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        outputs = _HANDLERS[cfg.subcommand](cfg)
    except ToolkitError as exc:
        message = " ".join(str(exc).split())
        print(f"error: {cfg_subcommand(args)}: {message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {cfg_subcommand(args)}: {exc}", file=sys.stderr)
        return 1
    audit = {
        "subcommand": cfg.subcommand,
        "argv": list(argv) if argv is not None else sys.argv[1:],
        "inputs": cfg.inputs,
        "outputs": [str(p) for p in outputs],
        "seed": cfg.seed,
        "version": _version(),
        "started_utc": started_utc,
        "duration_s": round(time.time() - started, 6),
    }
    audit_path = cfg.out / f"run_{cfg.subcommand.replace('-', '_')}.json"
    with storage.atomic_write(audit_path, encoding="utf-8") as handle:
        json.dump(audit, handle, indent=2)
        handle.write("\n")
    return 0


def cfg_subcommand(args) -> str:
    return getattr(args, "subcommand", "namegauge")


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
