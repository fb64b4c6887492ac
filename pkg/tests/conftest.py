import json

import numpy as np
import pytest

from stemcurate.audio import SEGMENT_FRAMES, SEGMENT_RATE_HZ, AudioBuffer, Segment


def make_tone(freq_hz, seconds, rate, amplitude=0.8, channels=1, phase=0.0):
    t = np.arange(int(round(seconds * rate))) / rate
    wave = amplitude * np.sin(2 * np.pi * freq_hz * t + phase)
    return AudioBuffer(np.tile(wave, (channels, 1)), rate)


def make_segment(samples, source_id="test", index=0):
    return Segment(AudioBuffer(np.asarray(samples)[None, :], SEGMENT_RATE_HZ), source_id, index)


def tone_segment(freq_hz, amplitude=0.8, source_id="test", index=0):
    t = np.arange(SEGMENT_FRAMES) / SEGMENT_RATE_HZ
    return make_segment(amplitude * np.sin(2 * np.pi * freq_hz * t), source_id, index)


@pytest.fixture
def tone():
    return make_tone


@pytest.fixture
def toy_pool_dir(tmp_path):
    """Synthetic tone 'stems' + noise: each stem is a distinct frequency, so
    purity is classifiable from the spectrum alone."""
    stem_tones = {"piano": 440.0, "drums": 2500.0, "bass": 80.0}
    rng = np.random.default_rng(7)
    manifest_lines = []
    for stem, freq in stem_tones.items():
        for i in range(3):
            seconds = 8.0 + 2.0 * i
            t = np.arange(int(seconds * SEGMENT_RATE_HZ)) / SEGMENT_RATE_HZ
            # slight vibrato + level wobble so examples differ between crops
            vib = np.sin(2 * np.pi * (freq * (1 + 0.002 * np.sin(2 * np.pi * 0.5 * t))) * t)
            level = 0.6 + 0.2 * np.sin(2 * np.pi * 0.25 * t + i)
            path = tmp_path / f"{stem}_{i}.wav"
            AudioBuffer((vib * level)[None, :], SEGMENT_RATE_HZ).to_wav(path)
            manifest_lines.append(
                json.dumps({"path": str(path), "stem": stem, "duration_s": seconds})
            )
    noise = 0.3 * rng.standard_normal(int(8.0 * SEGMENT_RATE_HZ))
    noise_path = tmp_path / "room_noise.wav"
    AudioBuffer(noise[None, :], SEGMENT_RATE_HZ).to_wav(noise_path)
    manifest_lines.append(
        json.dumps({"path": str(noise_path), "stem": "noise", "duration_s": 8.0})
    )
    manifest = tmp_path / "pool.jsonl"
    manifest.write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    return tmp_path, manifest
