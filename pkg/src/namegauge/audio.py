"""WAV decoding and band-limited resampling.

Supports RIFF/WAVE containers with 16/24/32-bit integer PCM or 32-bit
float samples, mono or stereo. Stereo is mixed down by channel averaging
and integer samples are scaled to [-1, 1] by 2^(bits-1).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import AudioError

_RESAMPLE_ZEROS = 16  # sinc zero crossings kept on each side of the kernel
_RESAMPLE_CHUNK = 8192


@dataclass(frozen=True)
class AudioBuffer:
    """Mono samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AudioError(f"sample rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"expected mono samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise AudioError("samples contain NaN or Inf")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def decode_wav(data: bytes) -> AudioBuffer:
    """Parse a RIFF/WAVE byte string into a normalized mono buffer."""
    if len(data) < 12:
        raise AudioError("file too short to be a WAV container")
    if data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioError(
            f"unsupported container (magic {data[:4]!r}); expected RIFF/WAVE"
        )
    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (chunk_size,) = struct.unpack_from("<I", data, offset + 4)
        body_start = offset + 8
        if body_start + chunk_size > len(data):
            raise AudioError(
                f"chunk {chunk_id!r} claims {chunk_size} bytes past end of file"
            )
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise AudioError("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            payload = data[body_start : body_start + chunk_size]
        # chunks are word-aligned; odd sizes carry a pad byte
        offset = body_start + chunk_size + (chunk_size & 1)
    if fmt is None:
        raise AudioError("missing fmt chunk")
    if payload is None:
        raise AudioError("missing data chunk")
    if len(payload) == 0:
        raise AudioError("zero-length data chunk")
    audio_format, channels, sample_rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise AudioError(f"unsupported channel count {channels}")
    if audio_format == 1 and bits in (16, 24, 32):
        samples = _decode_int_pcm(payload, bits)
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(
            np.float64
        )
        samples = np.clip(samples, -1.0, 1.0)
    else:
        raise AudioError(
            f"unsupported codec (format {audio_format}, {bits}-bit); "
            "need integer PCM 16/24/32 or float 32"
        )
    if block_align and block_align != channels * bits // 8:
        raise AudioError(
            f"block align {block_align} inconsistent with "
            f"{channels} x {bits}-bit frames"
        )
    if channels == 2:
        if len(samples) % 2:
            samples = samples[:-1]
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(samples=samples, sample_rate=sample_rate)


def _decode_int_pcm(payload: bytes, bits: int) -> np.ndarray:
    if bits == 16:
        raw = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2")
        return raw.astype(np.float64) / 32768.0
    if bits == 32:
        raw = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<i4")
        return raw.astype(np.float64) / 2147483648.0
    # 24-bit: widen each 3-byte little-endian sample to int32
    usable = len(payload) // 3 * 3
    as_bytes = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3)
    widened = (
        as_bytes[:, 0].astype(np.int32)
        | (as_bytes[:, 1].astype(np.int32) << 8)
        | (as_bytes[:, 2].astype(np.int32) << 16)
    )
    widened = np.where(widened >= 1 << 23, widened - (1 << 24), widened)
    return widened.astype(np.float64) / float(1 << 23)


def encode_wav(buffer: AudioBuffer, bits: int = 16) -> bytes:
    """Mono integer-PCM WAV bytes; inverse of decode_wav on in-range input."""
    if bits != 16:
        raise AudioError("only 16-bit encoding is provided")
    scaled = np.clip(np.round(buffer.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = scaled.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        1,
        1,
        buffer.sample_rate,
        buffer.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    return header + payload


def load_wav(path) -> AudioBuffer:
    with open(path, "rb") as handle:
        return decode_wav(handle.read())


def save_wav(buffer: AudioBuffer, path) -> None:
    from .storage import atomic_write

    with atomic_write(path, mode="wb") as handle:
        handle.write(encode_wav(buffer))


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Windowed-sinc resampling to target_rate.

    Output length is round(len * target / source). The kernel is a
    Hann-windowed sinc low-passed at the lower of the two Nyquist
    frequencies; output is hard-limited to the [-1, 1] buffer range.
    """
    if target_rate <= 0:
        raise AudioError(f"target rate must be positive, got {target_rate}")
    if target_rate == buffer.sample_rate:
        return AudioBuffer(samples=buffer.samples.copy(), sample_rate=target_rate)
    src = buffer.samples
    ratio = target_rate / buffer.sample_rate
    out_len = int(round(len(src) * ratio))
    if out_len == 0 or len(src) == 0:
        return AudioBuffer(samples=np.zeros(0), sample_rate=target_rate)
    cutoff = min(1.0, ratio)
    half_width = int(math.ceil(_RESAMPLE_ZEROS / cutoff))
    taps = 2 * half_width
    padded = np.concatenate([np.zeros(half_width), src, np.zeros(half_width + 1)])
    out = np.empty(out_len)
    tap_offsets = np.arange(-half_width + 1, half_width + 1)
    for start in range(0, out_len, _RESAMPLE_CHUNK):
        stop = min(start + _RESAMPLE_CHUNK, out_len)
        positions = np.arange(start, stop) / ratio
        base = np.floor(positions).astype(np.int64)
        frac = positions - base
        # distance (input samples) from each tap to the ideal sample point
        t = tap_offsets[None, :] - frac[:, None]
        kernel = cutoff * np.sinc(cutoff * t)
        window = 0.5 + 0.5 * np.cos(np.pi * t / half_width)
        kernel *= np.where(np.abs(t) <= half_width, window, 0.0)
        gather = padded[base[:, None] + tap_offsets[None, :] + half_width]
        out[start:stop] = (gather * kernel).sum(axis=1)
    out = np.clip(out, -1.0, 1.0)
    return AudioBuffer(samples=out, sample_rate=target_rate)
