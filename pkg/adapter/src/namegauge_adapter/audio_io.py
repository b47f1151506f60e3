"""Audio loading and the adapter-side mel frontend.

Reads 16-bit PCM mono/stereo WAVs through the stdlib, resamples to 16 kHz
with a polyphase filter, and computes the 80-bin log-mel features the
recognizer consumes.
"""

from __future__ import annotations

import wave
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

TARGET_RATE = 16000
N_FFT = 400
HOP = 160
N_MELS = 80


class AudioReadError(ValueError):
    pass


def load_wav_16k(path) -> np.ndarray:
    try:
        with wave.open(str(path), "rb") as handle:
            n_channels = handle.getnchannels()
            width = handle.getsampwidth()
            rate = handle.getframerate()
            frames = handle.readframes(handle.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioReadError(f"{path}: {exc}")
    if width != 2:
        raise AudioReadError(f"{path}: only 16-bit PCM supported, got {8 * width}-bit")
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    if len(samples) == 0:
        raise AudioReadError(f"{path}: empty audio")
    if rate != TARGET_RATE:
        ratio = Fraction(TARGET_RATE, rate).limit_denominator(1000)
        samples = resample_poly(samples, ratio.numerator, ratio.denominator)
    return samples.astype(np.float32)


def _mel_points(n_mels: int) -> np.ndarray:
    def to_mel(hz):
        return 2595.0 * np.log10(1.0 + hz / 700.0)

    def from_mel(mel):
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    mels = np.linspace(to_mel(0.0), to_mel(TARGET_RATE / 2), n_mels + 2)
    return from_mel(mels)


def _filterbank() -> np.ndarray:
    edges = _mel_points(N_MELS)
    freqs = np.fft.rfftfreq(N_FFT, d=1.0 / TARGET_RATE)
    bank = np.zeros((N_MELS, len(freqs)), dtype=np.float32)
    for m in range(N_MELS):
        low, center, high = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - low) / max(center - low, 1e-9)
        down = (high - freqs) / max(high - center, 1e-9)
        bank[m] = np.maximum(0.0, np.minimum(up, down))
    return bank


_BANK = None


def log_mel_frames(samples: np.ndarray) -> np.ndarray:
    """(T, N_MELS) float32 log-mel matrix for a 16 kHz signal."""
    global _BANK
    if _BANK is None:
        _BANK = _filterbank()
    if len(samples) < N_FFT:
        samples = np.pad(samples, (0, N_FFT - len(samples)))
    window = np.hanning(N_FFT).astype(np.float32)
    n_frames = 1 + (len(samples) - N_FFT) // HOP
    starts = np.arange(n_frames) * HOP
    frames = np.stack([samples[s : s + N_FFT] * window for s in starts])
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    mel = power @ _BANK.T
    return np.log10(np.maximum(mel, 1e-10)).astype(np.float32)
