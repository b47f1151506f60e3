"""Interchange formats shared with the evaluation toolkit.

The adapter talks to the toolkit only through files: JSON-Lines manifests
and hypotheses, and CSEB embedding blobs (magic "CSEB", u32 version=1,
u32 dim, u64 count, then u16 id length + UTF-8 id + dim f32 per record,
all little-endian).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

CSEB_MAGIC = b"CSEB"
CSEB_VERSION = 1


class FormatError(ValueError):
    pass


def atomic_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def read_manifest(path) -> list:
    """Minimal manifest reader: list of dicts, one per trial line."""
    trials = []
    seen = set()
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {lineno}: invalid JSON: {exc.msg}")
            for field in ("trial_id", "audio_path", "transcript", "participant_id"):
                if field not in obj:
                    raise FormatError(f"line {lineno}: missing {field!r}")
            if obj["trial_id"] in seen:
                raise FormatError(f"line {lineno}: duplicate trial_id")
            seen.add(obj["trial_id"])
            trials.append(obj)
    return trials


def write_hypotheses(entries: dict, path) -> None:
    lines = [
        json.dumps({"trial_id": tid, "hypothesis": hyp})
        for tid, hyp in entries.items()
    ]
    atomic_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def write_cseb(entries: dict, dim: int, path) -> None:
    """entries: trial_id -> 1-D float array of length dim."""
    blob = bytearray()
    blob += CSEB_MAGIC
    blob += struct.pack("<IIQ", CSEB_VERSION, dim, len(entries))
    for trial_id, vec in entries.items():
        arr = np.asarray(vec, dtype="<f4")
        if arr.shape != (dim,):
            raise FormatError(f"vector for {trial_id!r} is {arr.shape}, want ({dim},)")
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"vector for {trial_id!r} has non-finite values")
        encoded = trial_id.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += arr.tobytes()
    atomic_bytes(path, bytes(blob))


def write_error_sidecar(errors: list, path) -> None:
    """errors: list of (trial_id, message)."""
    lines = [
        json.dumps({"trial_id": tid, "error": message})
        for tid, message in errors
    ]
    payload = ("\n".join(lines) + "\n") if lines else ""
    atomic_bytes(path, payload.encode("utf-8"))


def write_tsv(path, header, rows) -> None:
    lines = ["\t".join(header)]
    lines += ["\t".join(str(c) for c in row) for row in rows]
    atomic_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
