"""80-channel log-Mel frontend and pooled fallback features.

The pipeline mirrors the preprocessing the frozen encoder family expects:
pad or truncate to a fixed window, 400-sample frames with hop 160 and a
periodic Hann window, power spectrum from a 400-point real FFT, 80
triangular mel filters on the Slaney scale (area-normalized) spanning
0-8000 Hz, then log10 with a 1e-10 floor, a clamp at global max - 8, and
(x + 4) / 4 normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .errors import AudioError

SAMPLE_RATE = 16000
N_FFT = 400
HOP = 160
N_MELS = 80
FMIN = 0.0
FMAX = 8000.0

_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = 15.0
_LOG_STEP = math.log(6.4) / 27.0


def hz_to_mel(hz: float) -> float:
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    if hz < _MIN_LOG_HZ:
        return hz * 3.0 / 200.0
    return _MIN_LOG_MEL + math.log(hz / _MIN_LOG_HZ) / _LOG_STEP


def mel_to_hz(mel: float) -> float:
    if mel < _MIN_LOG_MEL:
        return mel * 200.0 / 3.0
    return _MIN_LOG_HZ * math.exp(_LOG_STEP * (mel - _MIN_LOG_MEL))


def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = N_FFT,
    sample_rate: int = SAMPLE_RATE,
    fmin: float = FMIN,
    fmax: float = FMAX,
) -> np.ndarray:
    """(n_mels, n_fft//2 + 1) triangular filters, area-normalized.

    Each filter's weights are scaled by 2 / (f_high - f_low) so every
    triangle integrates to the same area regardless of bandwidth.
    """
    edges_mel = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    edges_hz = np.array([mel_to_hz(m) for m in edges_mel])
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    bank = np.zeros((n_mels, len(fft_freqs)))
    for m in range(n_mels):
        low, center, high = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (fft_freqs - low) / (center - low)
        falling = (high - fft_freqs) / (high - center)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
        bank[m] *= 2.0 / (high - low)
    return bank


def filter_band(filterbank: np.ndarray, row: int, sample_rate: int = SAMPLE_RATE,
                n_fft: int = N_FFT) -> tuple:
    """(low_hz, high_hz) support of one filter row."""
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    nonzero = np.nonzero(filterbank[row] > 0)[0]
    if len(nonzero) == 0:
        raise AudioError(f"filter row {row} has empty support")
    step = fft_freqs[1] - fft_freqs[0]
    return fft_freqs[nonzero[0]] - step, fft_freqs[nonzero[-1]] + step


@dataclass(frozen=True)
class MelSpectrogram:
    """80 x T normalized log-Mel matrix.

    valid_frames counts the leading frames whose analysis window overlaps
    real (unpadded) audio; the rest cover padding only.
    """

    values: np.ndarray
    valid_frames: int
    frame_hop: int = HOP
    frame_length: int = N_FFT

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != N_MELS:
            raise AudioError(
                f"mel spectrogram must be {N_MELS} x T, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise AudioError("mel spectrogram contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    dim: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.dim,):
            raise AudioError(
                f"feature vector shape {values.shape} != ({self.dim},)"
            )
        if not np.all(np.isfinite(values)):
            raise AudioError("feature vector contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


_FILTERBANK_CACHE = {}


def _cached_filterbank() -> np.ndarray:
    if "default" not in _FILTERBANK_CACHE:
        _FILTERBANK_CACHE["default"] = mel_filterbank()
    return _FILTERBANK_CACHE["default"]


def log_mel(buffer: AudioBuffer, pad_to: float = 30.0) -> MelSpectrogram:
    """Normalized log-Mel spectrogram of a 16 kHz buffer.

    The signal is zero-padded (or truncated) to pad_to seconds, giving
    exactly pad_to * 16000 / 160 frames. Frames are centered: the t-th
    window covers samples [t*160 - 200, t*160 + 200) of the padded
    signal, with reflection at the edges.
    """
    if buffer.sample_rate != SAMPLE_RATE:
        raise AudioError(
            f"log_mel needs {SAMPLE_RATE} Hz input, got {buffer.sample_rate}; "
            "resample first"
        )
    if pad_to <= 0:
        raise AudioError(f"pad_to must be positive, got {pad_to}")
    n_target = int(round(pad_to * SAMPLE_RATE))
    signal = buffer.samples[:n_target]
    valid_len = len(signal)
    if valid_len == 0:
        raise AudioError("cannot featurize an empty buffer")
    if valid_len < n_target:
        signal = np.concatenate([signal, np.zeros(n_target - valid_len)])
    half = N_FFT // 2
    padded = np.pad(signal, half, mode="reflect")
    n_frames = n_target // HOP
    window = np.hanning(N_FFT + 1)[:-1]  # periodic Hann
    starts = np.arange(n_frames) * HOP
    frames = padded[starts[:, None] + np.arange(N_FFT)[None, :]] * window
    power = np.abs(np.fft.rfft(frames, n=N_FFT, axis=1)) ** 2
    mel_power = _cached_filterbank() @ power.T
    log_spec = np.log10(np.maximum(mel_power, 1e-10))
    log_spec = np.maximum(log_spec, log_spec.max() - 8.0)
    log_spec = (log_spec + 4.0) / 4.0
    # first frame index whose window sees padding only
    first_pad_only = math.ceil((valid_len + half) / HOP)
    return MelSpectrogram(
        values=log_spec, valid_frames=min(n_frames, max(1, first_pad_only))
    )


def pool_features(mel: MelSpectrogram) -> FeatureVector:
    """Per-bin mean and population std over valid frames: 160-dim vector."""
    if mel.n_frames == 0 or mel.valid_frames == 0:
        raise AudioError("cannot pool a spectrogram with zero frames")
    valid = mel.values[:, : mel.valid_frames]
    means = valid.mean(axis=1)
    stds = valid.std(axis=1)  # population std: defined (0) at T = 1
    return FeatureVector(values=np.concatenate([means, stds]), dim=2 * N_MELS)


def featurize_buffer(buffer: AudioBuffer, pad_to: float = 30.0) -> FeatureVector:
    from .audio import resample

    if buffer.sample_rate != SAMPLE_RATE:
        buffer = resample(buffer, SAMPLE_RATE)
    return pool_features(log_mel(buffer, pad_to=pad_to))
