import struct

import numpy as np
import pytest

from namegauge.audio import (
    AudioBuffer,
    decode_wav,
    encode_wav,
    resample,
)
from namegauge.errors import AudioError


def pcm16_wav(samples, rate=16000, channels=1):
    payload = struct.pack(f"<{len(samples)}h", *samples)
    return (
        struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF", 36 + len(payload), b"WAVE",
            b"fmt ", 16, 1, channels, rate,
            rate * 2 * channels, 2 * channels, 16,
            b"data", len(payload),
        )
        + payload
    )


class TestDecode:
    def test_scaling_16bit(self):
        buf = decode_wav(pcm16_wav([0, 16384, -32768]))
        assert buf.samples.tolist() == [0.0, 0.5, -1.0]

    def test_stereo_averaging(self):
        left = int(0.2 * 32768)
        right = int(0.4 * 32768)
        buf = decode_wav(pcm16_wav([left, right], channels=2))
        assert buf.samples[0] == pytest.approx(0.3, abs=1e-4)
        assert len(buf.samples) == 1

    def test_rejects_rifx(self):
        data = pcm16_wav([0, 1])
        with pytest.raises(AudioError, match="container"):
            decode_wav(b"RIFX" + data[4:])

    def test_rejects_zero_length_data(self):
        data = pcm16_wav([])
        with pytest.raises(AudioError, match="zero-length"):
            decode_wav(data)

    def test_rejects_unsupported_codec(self):
        data = bytearray(pcm16_wav([0, 1]))
        data[20] = 7  # mu-law format tag
        with pytest.raises(AudioError, match="codec"):
            decode_wav(bytes(data))

    def test_rejects_truncated_chunk(self):
        data = pcm16_wav([0, 1, 2, 3])
        with pytest.raises(AudioError, match="past end"):
            decode_wav(data[:-2])

    def test_24bit_scaling(self):
        # one sample at half of full scale: 0x400000 = 2^22
        payload = bytes([0x00, 0x00, 0x40])
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF", 36 + len(payload), b"WAVE",
            b"fmt ", 16, 1, 1, 16000, 16000 * 3, 3, 24,
            b"data", len(payload),
        )
        buf = decode_wav(header + payload)
        assert buf.samples[0] == pytest.approx(0.5)

    def test_float32_passthrough(self):
        payload = struct.pack("<3f", 0.25, -0.5, 1.0)
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF", 36 + len(payload), b"WAVE",
            b"fmt ", 16, 3, 1, 16000, 16000 * 4, 4, 32,
            b"data", len(payload),
        )
        buf = decode_wav(header + payload)
        assert buf.samples.tolist() == [0.25, -0.5, 1.0]

    def test_decode_encode_identity(self):
        rng = np.random.default_rng(4)
        ints = rng.integers(-32768, 32768, 200)
        buf = AudioBuffer(samples=ints / 32768.0, sample_rate=8000)
        again = decode_wav(encode_wav(buf))
        # samples short of +1.0 round-trip exactly
        mask = ints < 32767
        assert np.array_equal(again.samples[mask], buf.samples[mask])
        assert again.sample_rate == 8000


class TestBufferInvariants:
    def test_rejects_nan(self):
        with pytest.raises(AudioError):
            AudioBuffer(samples=[0.0, float("nan")], sample_rate=16000)

    def test_rejects_bad_rate(self):
        with pytest.raises(AudioError):
            AudioBuffer(samples=[0.0], sample_rate=0)


class TestResample:
    def test_length_48k_to_16k(self):
        buf = AudioBuffer(samples=np.zeros(48000), sample_rate=48000)
        out = resample(buf, 16000)
        assert len(out.samples) == 16000
        assert out.sample_rate == 16000

    def test_identity_when_equal(self):
        buf = AudioBuffer(
            samples=np.sin(np.linspace(0, 10, 500)) * 0.5, sample_rate=16000
        )
        out = resample(buf, 16000)
        assert np.array_equal(out.samples, buf.samples)

    def test_sine_peak_preserved_44k1_to_16k(self):
        rate = 44100
        t = np.arange(rate) / rate  # 1 second
        buf = AudioBuffer(samples=0.5 * np.sin(2 * np.pi * 1000 * t), sample_rate=rate)
        out = resample(buf, 16000)
        spectrum = np.abs(np.fft.rfft(out.samples))
        freqs = np.fft.rfftfreq(len(out.samples), d=1 / 16000)
        peak = freqs[int(np.argmax(spectrum))]
        bin_width = freqs[1] - freqs[0]
        assert abs(peak - 1000.0) <= bin_width

    def test_sine_peak_preserved_upsampling(self):
        rate = 8000
        t = np.arange(rate) / rate
        buf = AudioBuffer(samples=0.5 * np.sin(2 * np.pi * 700 * t), sample_rate=rate)
        out = resample(buf, 16000)
        spectrum = np.abs(np.fft.rfft(out.samples))
        freqs = np.fft.rfftfreq(len(out.samples), d=1 / 16000)
        peak = freqs[int(np.argmax(spectrum))]
        assert abs(peak - 700.0) <= freqs[1] - freqs[0]

    def test_output_in_range(self):
        rng = np.random.default_rng(8)
        buf = AudioBuffer(samples=rng.uniform(-1, 1, 22050), sample_rate=22050)
        out = resample(buf, 16000)
        assert np.all(np.abs(out.samples) <= 1.0)
        assert np.all(np.isfinite(out.samples))

    def test_rounding_rule_non_divisible(self):
        buf = AudioBuffer(samples=np.zeros(1001), sample_rate=44100)
        out = resample(buf, 16000)
        assert len(out.samples) == round(1001 * 16000 / 44100)
