"""On-disk formats: JSON-Lines manifests and hypotheses, CSEB embeddings.

CSEB layout (all little-endian):
    magic  "CSEB" (4 bytes)
    u32    version (currently 1)
    u32    dim
    u64    record count
    then per record: u16 id byte-length, id as UTF-8, dim x f32.

Writes are atomic (temp file + rename) so a crashed run never leaves a
half-written artifact behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import EmbeddingFormatError, ManifestError
from .records import EmbeddingSet, HypothesisSet, Manifest, TrialRecord, make_manifest

CSEB_MAGIC = b"CSEB"
CSEB_VERSION = 1

_MANIFEST_FIELDS = (
    "trial_id",
    "participant_id",
    "cohort",
    "audio_path",
    "transcript",
    "target_word",
)


@contextmanager
def atomic_write(path, mode="w", encoding=None):
    """Write to a temp file in the target directory, then rename over path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, encoding=encoding) as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def load_manifest(path, stimuli=None) -> Manifest:
    """Parse a JSON-Lines manifest, validating every invariant.

    Errors carry the 1-based line number. When no explicit stimulus list
    is supplied, the stimuli are the sorted distinct target words.
    """
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", line=lineno)
            if not isinstance(obj, dict):
                raise ManifestError("record is not a JSON object", line=lineno)
            for name in _MANIFEST_FIELDS:
                if name not in obj or not isinstance(obj[name], str):
                    raise ManifestError(
                        f"missing or non-string field {name!r}", line=lineno
                    )
            raw_scores = obj.get("scores", {})
            if raw_scores is None:
                raw_scores = {}
            if not isinstance(raw_scores, dict):
                raise ManifestError("scores must be a JSON object", line=lineno)
            scores = {k: v for k, v in raw_scores.items() if v is not None}
            try:
                record = TrialRecord(
                    trial_id=obj["trial_id"],
                    participant_id=obj["participant_id"],
                    cohort=obj["cohort"],
                    audio_path=obj["audio_path"],
                    transcript=obj["transcript"],
                    target_word=obj["target_word"],
                    scores=scores,
                )
            except ManifestError as exc:
                raise ManifestError(str(exc), line=lineno)
            records.append(record)
    if stimuli is None:
        return make_manifest(records)
    return make_manifest(records, stimuli)


def save_manifest(manifest: Manifest, path) -> None:
    with atomic_write(path, encoding="utf-8") as handle:
        for rec in manifest.records:
            obj = {name: getattr(rec, name) for name in _MANIFEST_FIELDS}
            obj["scores"] = dict(rec.scores)
            handle.write(json.dumps(obj, sort_keys=True) + "\n")


def load_hypotheses(path) -> HypothesisSet:
    """JSON Lines of {"trial_id": ..., "hypothesis": ...}."""
    entries = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", line=lineno)
            if "trial_id" not in obj or "hypothesis" not in obj:
                raise ManifestError(
                    "hypothesis line needs trial_id and hypothesis", line=lineno
                )
            entries[str(obj["trial_id"])] = str(obj["hypothesis"])
    return HypothesisSet(entries=entries)


def save_hypotheses(hyps: HypothesisSet, path) -> None:
    with atomic_write(path, encoding="utf-8") as handle:
        for trial_id, text in hyps.entries.items():
            handle.write(
                json.dumps({"trial_id": trial_id, "hypothesis": text}) + "\n"
            )


def write_embeddings(embeddings: EmbeddingSet, path) -> None:
    with atomic_write(path, mode="wb") as handle:
        handle.write(CSEB_MAGIC)
        handle.write(
            struct.pack("<IIQ", CSEB_VERSION, embeddings.dim, len(embeddings.entries))
        )
        for trial_id, vec in embeddings.entries.items():
            encoded = trial_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise EmbeddingFormatError(f"trial_id too long: {trial_id!r}")
            handle.write(struct.pack("<H", len(encoded)))
            handle.write(encoded)
            handle.write(vec.astype("<f4").tobytes())


def read_embeddings(path) -> EmbeddingSet:
    with open(path, "rb") as handle:
        data = handle.read()
    if len(data) < 20:
        raise EmbeddingFormatError("file too short for CSEB header")
    if data[:4] != CSEB_MAGIC:
        raise EmbeddingFormatError(f"bad magic {data[:4]!r}, expected {CSEB_MAGIC!r}")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != CSEB_VERSION:
        raise EmbeddingFormatError(
            f"unsupported version {version}, expected {CSEB_VERSION}"
        )
    if dim < 1:
        raise EmbeddingFormatError(f"header dim must be positive, got {dim}")
    offset = 20
    entries = {}
    vec_bytes = 4 * dim
    for index in range(count):
        if offset + 2 > len(data):
            raise EmbeddingFormatError(
                f"truncated file: record {index} id length missing"
            )
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + vec_bytes > len(data):
            raise EmbeddingFormatError(
                f"truncated file: record {index} ends past EOF "
                f"(header dim {dim}, count {count})"
            )
        trial_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        if trial_id in entries:
            raise EmbeddingFormatError(f"duplicate trial_id {trial_id!r}")
        entries[trial_id] = vec
    if offset != len(data):
        raise EmbeddingFormatError(
            f"{len(data) - offset} trailing bytes after {count} records"
        )
    return EmbeddingSet(dim=dim, entries=entries)
