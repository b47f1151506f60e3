import numpy as np
import pytest

from namegauge.audio import AudioBuffer
from namegauge.errors import AudioError
from namegauge.features import (
    HOP,
    N_FFT,
    N_MELS,
    FeatureVector,
    MelSpectrogram,
    hz_to_mel,
    log_mel,
    mel_filterbank,
    mel_to_hz,
    pool_features,
)


def buffer_of(samples, rate=16000):
    return AudioBuffer(samples=np.asarray(samples, dtype=np.float64), sample_rate=rate)


class TestMelScale:
    def test_linear_below_1k(self):
        assert hz_to_mel(500.0) == pytest.approx(7.5)

    def test_roundtrip(self):
        for hz in (0.0, 250.0, 999.0, 1000.0, 3500.0, 8000.0):
            assert mel_to_hz(hz_to_mel(hz)) == pytest.approx(hz, abs=1e-9)


class TestFilterbank:
    def test_shape(self):
        bank = mel_filterbank()
        assert bank.shape == (N_MELS, N_FFT // 2 + 1)

    def test_rows_positive_contiguous_overlapping(self):
        bank = mel_filterbank()
        supports = []
        for row in bank:
            nonzero = np.nonzero(row > 0)[0]
            assert len(nonzero) > 0
            assert row.sum() > 0
            # contiguous support
            assert np.array_equal(nonzero, np.arange(nonzero[0], nonzero[-1] + 1))
            supports.append((nonzero[0], nonzero[-1]))
        for (lo1, hi1), (lo2, hi2) in zip(supports, supports[1:]):
            assert lo2 <= hi1 + 1  # adjacent filters overlap or touch


class TestLogMel:
    def test_silence_is_minus_1_5(self):
        buf = buffer_of(np.zeros(30 * 16000))
        mel = log_mel(buf, pad_to=30.0)
        assert np.allclose(mel.values, -1.5)

    def test_shape_3000_frames(self):
        for seconds in (0.5, 3.0, 30.0):
            buf = buffer_of(np.zeros(int(seconds * 16000)) + 1e-3)
            mel = log_mel(buf, pad_to=30.0)
            assert mel.values.shape == (80, 3000)

    def test_short_window_shape(self):
        buf = buffer_of(np.zeros(16000) + 1e-3)
        mel = log_mel(buf, pad_to=5.0)
        assert mel.values.shape == (80, 500)

    def test_truncates_long_input(self):
        buf = buffer_of(np.ones(7 * 16000) * 0.1)
        mel = log_mel(buf, pad_to=5.0)
        assert mel.values.shape == (80, 500)
        assert mel.valid_frames == 500

    def test_sine_peak_lands_in_covering_band(self):
        t = np.arange(2 * 16000) / 16000
        buf = buffer_of(np.sin(2 * np.pi * 1000 * t))
        mel = log_mel(buf, pad_to=2.0)
        hottest = int(np.argmax(mel.values.mean(axis=1)))
        # independent check through the mel-scale formula: the winning
        # row's triangle must cover 1 kHz
        edges = np.array(
            [mel_to_hz(m) for m in np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), 82)]
        )
        low, high = edges[hottest], edges[hottest + 2]
        assert low <= 1000.0 <= high

    def test_wrong_rate_rejected(self):
        with pytest.raises(AudioError, match="16000"):
            log_mel(buffer_of(np.zeros(100), rate=8000))

    def test_never_nan_inf_and_floor(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            n = int(rng.integers(10, 16000))
            buf = buffer_of(rng.uniform(-1, 1, n))
            mel = log_mel(buf, pad_to=1.5)
            assert np.all(np.isfinite(mel.values))
            assert mel.values.min() >= -1.5 - 1e-12

    def test_valid_frames_excludes_pad_only(self):
        buf = buffer_of(np.ones(16000) * 0.1)  # 1 s signal in a 5 s window
        mel = log_mel(buf, pad_to=5.0)
        # frames starting at or past 1 s + half window see padding only
        assert mel.valid_frames == int(np.ceil((16000 + N_FFT // 2) / HOP))
        assert mel.valid_frames < mel.n_frames

    def test_parseval_identity(self):
        # sum of rfft power bins (interior counted twice) over N equals
        # the windowed-frame energy
        rng = np.random.default_rng(42)
        frame = rng.uniform(-1, 1, N_FFT)
        window = np.hanning(N_FFT + 1)[:-1]
        windowed = frame * window
        spectrum = np.fft.rfft(windowed, n=N_FFT)
        power = np.abs(spectrum) ** 2
        weights = np.full(len(power), 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0  # Nyquist bin for even N
        lhs = float((power * weights).sum()) / N_FFT
        rhs = float((windowed**2).sum())
        assert lhs == pytest.approx(rhs, rel=1e-6)


class TestPooling:
    def test_constant_spectrogram(self):
        mel = MelSpectrogram(values=np.full((80, 10), 0.25), valid_frames=10)
        vec = pool_features(mel)
        assert vec.dim == 160
        assert np.allclose(vec.values[:80], 0.25)
        assert np.allclose(vec.values[80:], 0.0)

    def test_single_frame_std_zero(self):
        mel = MelSpectrogram(values=np.random.default_rng(1).uniform(size=(80, 1)),
                             valid_frames=1)
        vec = pool_features(mel)
        assert np.allclose(vec.values[80:], 0.0)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(9)
        values = rng.uniform(-1.5, 2.0, size=(80, 10))
        mel = MelSpectrogram(values=values, valid_frames=10)
        vec = pool_features(mel)
        for row in range(80):
            mean = sum(values[row]) / 10
            var = sum((v - mean) ** 2 for v in values[row]) / 10
            assert vec.values[row] == pytest.approx(mean, rel=1e-12, abs=1e-15)
            assert vec.values[80 + row] == pytest.approx(
                var**0.5, rel=1e-12, abs=1e-15
            )

    def test_pooling_ignores_padding_frames(self):
        rng = np.random.default_rng(2)
        real = rng.uniform(-1, 1, size=(80, 6))
        padded = np.concatenate([real, np.full((80, 4), -1.5)], axis=1)
        mel = MelSpectrogram(values=padded, valid_frames=6)
        vec = pool_features(mel)
        assert np.allclose(vec.values[:80], real.mean(axis=1))

    def test_feature_vector_invariants(self):
        with pytest.raises(AudioError):
            FeatureVector(values=np.array([1.0, np.inf]), dim=2)
