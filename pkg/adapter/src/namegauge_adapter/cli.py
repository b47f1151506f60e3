"""Adapter command line: export-hypotheses, export-embeddings, finetune.

Flag names mirror the evaluation toolkit. Export errors never fail a run;
they land in export_errors.jsonl next to the outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import SIZES, AdapterConfig
from .export import export_embeddings, export_hypotheses
from .finetune import finetune


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="namegauge-adapter")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name):
        p = sub.add_parser(name)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--size", choices=list(SIZES), default="small")
        p.add_argument("--backend", choices=["tiny", "whisper"], default="tiny")
        p.add_argument("--checkpoint")
        p.add_argument("--device", default="cpu")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--layer", type=int, default=-1)
        return p

    add("export-hypotheses")
    add("export-embeddings")
    ft = add("finetune")
    ft.add_argument("--split", required=True, help="toolkit split.json")
    ft.add_argument("--max-steps", dest="max_steps", type=int, default=1000)
    ft.add_argument("--warmup", dest="warmup_steps", type=int, default=250)
    ft.add_argument("--batch", dest="batch_size", type=int, default=16)
    ft.add_argument("--lr", dest="peak_lr", type=float, default=1e-5)
    ft.add_argument(
        "--dry-run", action="store_true",
        help="single training step with immediate evaluation",
    )
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    kwargs = dict(
        manifest=Path(args.manifest),
        out=Path(args.out),
        size=args.size,
        backend=args.backend,
        checkpoint=Path(args.checkpoint) if args.checkpoint else None,
        device=args.device,
        seed=args.seed,
        layer=args.layer,
    )
    try:
        if args.subcommand == "finetune":
            if args.dry_run:
                kwargs.update(max_steps=1, warmup_steps=1, eval_interval=1)
            else:
                kwargs.update(
                    max_steps=args.max_steps,
                    warmup_steps=args.warmup_steps,
                    batch_size=args.batch_size,
                    peak_lr=args.peak_lr,
                )
            cfg = AdapterConfig(**kwargs)
            split = json.loads(Path(args.split).read_text())["assignments"]
            result = finetune(cfg, split)
        elif args.subcommand == "export-hypotheses":
            result = export_hypotheses(AdapterConfig(**kwargs))
        else:
            result = export_embeddings(AdapterConfig(**kwargs))
    except (ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {args.subcommand}: {message}", file=sys.stderr)
        return 1
    summary = {k: str(v) for k, v in result.items()}
    print(json.dumps(summary))
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
