"""TSV/Markdown artifact emission mirroring the published table layouts.

Rates and detection accuracies are rendered to 2 decimals, probe F1 to 4,
and every table is sorted by (dataset, size, model) so repeated runs on
the same inputs produce identical bytes.
"""

from __future__ import annotations

import re
from pathlib import Path

from .errors import ToolkitError
from .storage import atomic_write

WER_PREFIX = "wer_summary__"
DETECT_PREFIX = "detect_summary__"
EVAL_PREFIX = "eval_summary__"
BATTERY_PREFIX = "battery__"


def safe_label(label: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9._-]+", "-", label).strip("-")
    return cleaned or "unnamed"


def write_tsv(path, header, rows) -> None:
    with atomic_write(path, encoding="utf-8") as handle:
        handle.write("\t".join(header) + "\n")
        for row in rows:
            handle.write("\t".join(str(cell) for cell in row) + "\n")


def read_tsv(path):
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines:
        return [], []
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[1:]]
    return header, rows


def _markdown_table(header, rows) -> str:
    out = ["| " + " | ".join(header) + " |"]
    out.append("|" + "|".join([" --- "] * len(header)) + "|")
    for row in rows:
        out.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(out) + "\n"


def _gather(artifacts_dir: Path, prefix: str):
    merged = []
    header = None
    for path in sorted(artifacts_dir.glob(f"{prefix}*.tsv")):
        file_header, rows = read_tsv(path)
        if header is None:
            header = file_header
        if file_header != header:
            raise ToolkitError(
                f"{path.name} header {file_header} differs from {header}"
            )
        merged.extend(rows)
    return header, merged


def _sort_rows(header, rows):
    def key(row):
        record = dict(zip(header, row))
        return (
            record.get("dataset", ""),
            record.get("size", ""),
            record.get("model", ""),
            record.get("metric", ""),
            record.get("variable", ""),
        )

    return sorted(rows, key=key)


def _fmt(header, rows, two_dp=(), four_dp=()):
    formatted = []
    for row in rows:
        out = []
        for name, cell in zip(header, row):
            if cell == "":
                out.append("")
            elif name in two_dp:
                out.append(f"{float(cell):.2f}")
            elif name in four_dp:
                out.append(f"{float(cell):.4f}")
            else:
                out.append(cell)
        formatted.append(out)
    return formatted


def emit_report(artifacts_dir, out_path) -> Path:
    """Compose report.md from every summary artifact in a directory."""
    artifacts_dir = Path(artifacts_dir)
    sections = []

    header, rows = _gather(artifacts_dir, WER_PREFIX)
    if rows:
        rows = _fmt(header, _sort_rows(header, rows), two_dp=("wer",))
        sections.append("## Word error rate\n\n" + _markdown_table(header, rows))

    header, rows = _gather(artifacts_dir, DETECT_PREFIX)
    if rows:
        rows = _fmt(header, _sort_rows(header, rows), two_dp=("accuracy",))
        sections.append(
            "## Target word detection\n\n" + _markdown_table(header, rows)
        )

    header, rows = _gather(artifacts_dir, EVAL_PREFIX)
    if rows:
        rows = _fmt(
            header,
            _sort_rows(header, rows),
            four_dp=("f1_macro", "f1_impaired", "f1_unimpaired"),
        )
        sections.append(
            "## Accuracy-score prediction\n\n" + _markdown_table(header, rows)
        )

    header, rows = _gather(artifacts_dir, BATTERY_PREFIX)
    if rows:
        rows = _sort_rows(header, rows)
        sections.append(
            "## Predictive validity\n\n" + _markdown_table(header, rows)
        )

    if not sections:
        raise ToolkitError(
            f"no result artifacts found under {artifacts_dir} "
            f"({WER_PREFIX}*, {DETECT_PREFIX}*, {EVAL_PREFIX}*, {BATTERY_PREFIX}*)"
        )
    per_trial = sorted(
        p.name
        for p in artifacts_dir.glob("*.tsv")
        if p.name.startswith(("wer_trials__", "detect_trials__", "predictions__"))
    )
    body = "# Evaluation report\n\n" + "\n".join(sections)
    if per_trial:
        body += "\n## Per-trial data files\n\n"
        body += "".join(f"- {name}\n" for name in per_trial)
    out_path = Path(out_path)
    with atomic_write(out_path, encoding="utf-8") as handle:
        handle.write(body)
    return out_path
