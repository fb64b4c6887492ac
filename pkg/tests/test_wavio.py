import io

import numpy as np
import pytest

from stemcurate import wavio


@pytest.mark.parametrize("fmt,tol", [("pcm16", 2 / 32768), ("pcm24", 2 / 8388608), ("float32", 1e-7)])
def test_round_trip_formats(tmp_path, fmt, tol):
    rng = np.random.default_rng(0)
    samples = np.clip(rng.normal(0, 0.3, size=(2, 1000)), -1, 1)
    path = tmp_path / f"x_{fmt}.wav"
    wavio.write_wav(path, samples, 48000, sample_format=fmt)
    back, rate = wavio.read_wav(path)
    assert rate == 48000
    assert back.shape == (2, 1000)
    assert np.abs(back - samples).max() < tol


def test_mono_shapes(tmp_path):
    samples = np.linspace(-1, 1, 64)
    path = tmp_path / "mono.wav"
    wavio.write_wav(path, samples, 16000)
    back, rate = wavio.read_wav(path)
    assert back.shape == (1, 64)


def test_bytes_round_trip():
    samples = np.array([[0.0, 0.5, -0.5, 1.0]])
    data = wavio.wav_bytes(samples, 16000, "float32")
    back, rate = wavio.read_wav_bytes(data)
    assert rate == 16000
    np.testing.assert_allclose(back, samples, atol=1e-7)


def test_wav_info_matches_payload(tmp_path):
    samples = np.zeros((2, 12345))
    path = tmp_path / "info.wav"
    wavio.write_wav(path, samples, 44100, "pcm24")
    channels, rate, frames = wavio.wav_info(path)
    assert (channels, rate, frames) == (2, 44100, 12345)


def test_rejects_non_wav(tmp_path):
    path = tmp_path / "bogus.wav"
    path.write_bytes(b"not audio at all")
    with pytest.raises(wavio.WavFormatError):
        wavio.read_wav(path)
    with pytest.raises(wavio.WavFormatError):
        wavio.wav_info(path)


def test_skips_extra_chunks():
    # LIST chunk between fmt and data must be ignored
    samples = np.array([[0.25, -0.25]])
    data = bytearray(wavio.wav_bytes(samples, 8000, "pcm16"))
    insert = b"LIST" + (4).to_bytes(4, "little") + b"INFO"
    out = bytes(data[:12]) + insert + bytes(data[12:])
    back, rate = wavio.read_wav_bytes(out)
    assert rate == 8000
    np.testing.assert_allclose(back, samples, atol=1e-4)


def test_unsupported_format_rejected(tmp_path):
    with pytest.raises(wavio.WavFormatError):
        wavio.write_wav(io.BytesIO(), np.zeros((1, 4)), 8000, "pcm8")
