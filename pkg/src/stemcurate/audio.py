"""Core audio types and transforms: normalization, resampling, channel
handling, fixed-length segmentation and segment splicing.

Everything operates on ``AudioBuffer`` (float samples shaped channels x
frames). The classifier contract is a mono 16 kHz window of exactly 3 s;
``Segment`` enforces it.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal

from . import wavio

SEGMENT_RATE_HZ = 16000
SEGMENT_SECONDS = 3.0
SEGMENT_FRAMES = int(SEGMENT_RATE_HZ * SEGMENT_SECONDS)  # 48_000

CRAWL_RATE_HZ = 48000  # storage format of crawled tracks (stereo)

SAFE_NORM_EPS = 1e-9

# polyphase windowed-sinc quality; kaiser beta 14 keeps aliasing far below
# the -60 dB purity requirement
_RESAMPLE_WINDOW = ("kaiser", 14.0)


class AudioError(Exception):
    """Raised when a buffer violates the audio contracts."""


@dataclass
class AudioBuffer:
    """Multichannel PCM samples at unit scale plus their sample rate."""

    samples: np.ndarray  # (channels, frames)
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise AudioError("samples must be a (channels, frames) array")
        if self.samples.shape[0] not in (1, 2):
            raise AudioError(f"unsupported channel count {self.samples.shape[0]}")
        if self.sample_rate_hz <= 0:
            raise AudioError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.isfinite(self.samples).all():
            raise AudioError("samples contain NaN or Inf")

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def frames(self):
        return self.samples.shape[1]

    @property
    def duration_s(self):
        return self.frames / self.sample_rate_hz

    def copy(self):
        return AudioBuffer(self.samples.copy(), self.sample_rate_hz)

    @classmethod
    def from_wav(cls, source):
        samples, rate = wavio.read_wav(source)
        return cls(samples, rate)

    def to_wav(self, target, sample_format="pcm16"):
        wavio.write_wav(target, self.samples, self.sample_rate_hz, sample_format)


@dataclass
class Segment:
    """A mono 16 kHz 3 s window plus provenance within its source track."""

    audio: AudioBuffer
    source_id: str
    index: int

    def __post_init__(self):
        a = self.audio
        if a.channels != 1:
            raise AudioError("segment must be mono")
        if a.sample_rate_hz != SEGMENT_RATE_HZ:
            raise AudioError(f"segment must be {SEGMENT_RATE_HZ} Hz, got {a.sample_rate_hz}")
        if a.frames != SEGMENT_FRAMES:
            raise AudioError(f"segment must hold {SEGMENT_FRAMES} frames, got {a.frames}")
        if self.index < 0:
            raise AudioError("segment index must be nonnegative")


def safe_normalize(x: AudioBuffer) -> AudioBuffer:
    """Scale the buffer by 1 / (max|x| + 1e-9).

    Keeps the peak at or below unit amplitude without ever dividing by zero;
    an all-zero buffer stays all-zero.
    """
    peak = np.abs(x.samples).max() if x.frames else 0.0
    return AudioBuffer(x.samples / (peak + SAFE_NORM_EPS), x.sample_rate_hz)


def resample(x: AudioBuffer, target_rate_hz: int) -> AudioBuffer:
    """Band-limited resampling (polyphase windowed sinc).

    Output length is round(frames * target / source); identity rates pass
    the buffer through untouched.
    """
    if target_rate_hz <= 0:
        raise AudioError(f"target rate must be positive, got {target_rate_hz}")
    if target_rate_hz == x.sample_rate_hz:
        return x.copy()
    frac = Fraction(target_rate_hz, x.sample_rate_hz)
    y = signal.resample_poly(
        x.samples, frac.numerator, frac.denominator, axis=1, window=_RESAMPLE_WINDOW
    )
    n_out = int(round(x.frames * target_rate_hz / x.sample_rate_hz))
    if y.shape[1] > n_out:
        y = y[:, :n_out]
    elif y.shape[1] < n_out:
        y = np.pad(y, ((0, 0), (0, n_out - y.shape[1])))
    return AudioBuffer(y, target_rate_hz)


def to_mono(x: AudioBuffer) -> AudioBuffer:
    """Average the channels; mono input passes through."""
    if x.channels == 1:
        return x.copy()
    return AudioBuffer(x.samples.mean(axis=0, keepdims=True), x.sample_rate_hz)


def to_classifier_rate(x: AudioBuffer) -> AudioBuffer:
    """Convert any buffer to the mono 16 kHz classifier format."""
    return resample(to_mono(x), SEGMENT_RATE_HZ)


def segment(x: AudioBuffer, source_id: str) -> list:
    """Split a mono 16 kHz buffer into consecutive non-overlapping 3 s
    segments; a trailing remainder shorter than 3 s is dropped."""
    if x.channels != 1 or x.sample_rate_hz != SEGMENT_RATE_HZ:
        raise AudioError(
            "segmentation expects mono 16 kHz input "
            f"(got {x.channels} ch @ {x.sample_rate_hz} Hz)"
        )
    n = x.frames // SEGMENT_FRAMES
    out = []
    for i in range(n):
        window = x.samples[:, i * SEGMENT_FRAMES : (i + 1) * SEGMENT_FRAMES]
        out.append(Segment(AudioBuffer(window.copy(), SEGMENT_RATE_HZ), source_id, i))
    return out


def splice(kept, out_rate_hz=None, crossfade_ms=10.0) -> AudioBuffer:
    """Concatenate kept segments (same source, ascending index) into one
    continuous buffer of exactly 3 s per segment.

    A linear fade of ``crossfade_ms`` is applied on each side of every
    interior joint to avoid clicks; 0 disables it and makes the splice an
    exact concatenation.
    """
    kept = list(kept)
    if not kept:
        return AudioBuffer(np.zeros((1, 0)), out_rate_hz or SEGMENT_RATE_HZ)
    sources = {s.source_id for s in kept}
    if len(sources) > 1:
        raise AudioError(f"splice requires a single source, got {sorted(sources)}")
    indices = [s.index for s in kept]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise AudioError("splice requires strictly ascending segment indices")

    out = np.concatenate([s.audio.samples for s in kept], axis=1)
    fade = int(round(crossfade_ms * 1e-3 * SEGMENT_RATE_HZ))
    if fade > 0 and len(kept) > 1:
        ramp = np.linspace(0.0, 1.0, fade, endpoint=False)
        for j in range(1, len(kept)):
            joint = j * SEGMENT_FRAMES
            out[:, joint - fade : joint] *= ramp[::-1]
            out[:, joint : joint + fade] *= ramp

    buf = AudioBuffer(out, SEGMENT_RATE_HZ)
    if out_rate_hz and out_rate_hz != SEGMENT_RATE_HZ:
        buf = resample(buf, out_rate_hz)
    return buf
