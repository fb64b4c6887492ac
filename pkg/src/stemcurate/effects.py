"""Augmentation effects for negative-sample synthesis: artificial reverb,
dynamic range compression and low/mid/high EQ.

All effects preserve length, channel count and sample rate, and every
randomized choice is driven by an explicit seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .audio import AudioBuffer

RT60_RANGE_S = (0.3, 1.4)
COMP_THRESHOLD_RANGE = (0.1, 0.3)
EQ_GAIN_LIMIT_DB = 6.0


class EffectParameterError(ValueError):
    """Effect parameter outside its allowed range."""


# ---------------------------------------------------------------------------
# reverb


# classic parallel-comb delays (seconds); jittered per seed so no two draws
# share a room
_COMB_DELAYS_S = (0.0297, 0.0371, 0.0411, 0.0437)
_ALLPASS_DELAYS_S = (0.005, 0.0017)
_ALLPASS_GAIN = 0.7


def _comb(x, delay, gain):
    b = np.zeros(delay + 1)
    b[delay] = 1.0
    a = np.zeros(delay + 1)
    a[0] = 1.0
    a[delay] = -gain
    return signal.lfilter(b, a, x, axis=-1)


def _allpass(x, delay, gain):
    b = np.zeros(delay + 1)
    b[0] = -gain
    b[delay] = 1.0
    a = np.zeros(delay + 1)
    a[0] = 1.0
    a[delay] = -gain
    return signal.lfilter(b, a, x, axis=-1)


def reverb(x: AudioBuffer, rt60_s: float, seed: int, wet_mix: float = 0.35) -> AudioBuffer:
    """Schroeder reverberator: four parallel combs into two series allpasses.

    Each comb's feedback gain is solved from the decay target,
    g = 10^(-3 * delay / rt60), so the tail reaches -60 dB at rt60_s.
    The tail is truncated to the input length.
    """
    lo, hi = RT60_RANGE_S
    if not lo <= rt60_s <= hi:
        raise EffectParameterError(f"rt60 {rt60_s} outside [{lo}, {hi}] s")
    if not 0.0 <= wet_mix <= 1.0:
        raise EffectParameterError(f"wet_mix {wet_mix} outside [0, 1]")
    fs = x.sample_rate_hz
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(0.95, 1.05, size=len(_COMB_DELAYS_S))

    wet = np.zeros_like(x.samples)
    for base, j in zip(_COMB_DELAYS_S, jitter):
        delay = max(1, int(round(base * j * fs)))
        gain = 10.0 ** (-3.0 * (delay / fs) / rt60_s)
        wet += _comb(x.samples, delay, gain)
    wet /= len(_COMB_DELAYS_S)
    for base in _ALLPASS_DELAYS_S:
        wet = _allpass(wet, max(1, int(round(base * fs))), _ALLPASS_GAIN)

    out = (1.0 - wet_mix) * x.samples + wet_mix * wet
    return AudioBuffer(out, fs)


def estimate_rt60(impulse_response: AudioBuffer, skip_s: float = 0.006) -> float:
    """Decay time fitted from a measured response.

    Backward-integrates the energy (Schroeder integration) after skipping the
    direct sound, then fits a line to the -5..-25 dB portion of the decay
    curve and extrapolates to -60 dB. Independent of how the response was
    synthesized.
    """
    fs = impulse_response.sample_rate_hz
    ir = impulse_response.samples.mean(axis=0)[int(round(skip_s * fs)) :]
    energy = np.cumsum(ir[::-1] ** 2)[::-1]
    if energy[0] <= 0:
        raise ValueError("response carries no energy after the direct sound")
    curve_db = 10.0 * np.log10(np.maximum(energy / energy[0], 1e-30))
    i_hi = int(np.argmax(curve_db <= -5.0))
    i_lo = int(np.argmax(curve_db <= -25.0))
    if i_lo <= i_hi:
        raise ValueError("decay range not reached; response too short")
    t = np.arange(len(curve_db)) / fs
    slope, _ = np.polyfit(t[i_hi:i_lo], curve_db[i_hi:i_lo], 1)
    return -60.0 / slope


# ---------------------------------------------------------------------------
# compressor


def compress(
    x: AudioBuffer,
    threshold: float,
    ratio: float,
    attack_ms: float = 5.0,
    release_ms: float = 100.0,
) -> AudioBuffer:
    """Feed-forward peak compressor.

    The envelope follower is a one-pole attack/release tracker of |x|;
    above the threshold the steady-state output envelope follows
    threshold * (env / threshold)^(1/ratio), below it the gain is unity.
    """
    lo, hi = COMP_THRESHOLD_RANGE
    if not lo <= threshold <= hi:
        raise EffectParameterError(f"threshold {threshold} outside [{lo}, {hi}]")
    if ratio < 1.0:
        raise EffectParameterError(f"ratio {ratio} must be >= 1")
    if attack_ms <= 0 or release_ms <= 0:
        raise EffectParameterError("attack and release must be positive")
    if ratio == 1.0:
        return x.copy()

    fs = x.sample_rate_hz
    attack = math.exp(-1.0 / (attack_ms * 1e-3 * fs))
    release = math.exp(-1.0 / (release_ms * 1e-3 * fs))

    # link channels through the max so stereo images don't wander
    level = np.abs(x.samples).max(axis=0)
    env = np.empty_like(level)
    e = 0.0
    for i, v in enumerate(level):
        coeff = attack if v > e else release
        e = coeff * e + (1.0 - coeff) * v
        env[i] = e

    gain = np.ones_like(env)
    over = env > threshold
    gain[over] = (env[over] / threshold) ** (1.0 / ratio - 1.0)
    return AudioBuffer(x.samples * gain, fs)


# ---------------------------------------------------------------------------
# equalizer


_BAND_KINDS = ("low-shelf", "peak", "high-shelf")


@dataclass(frozen=True)
class EqBand:
    """One biquad stage: RBJ cookbook low-shelf, peaking or high-shelf."""

    freq_hz: float
    gain_db: float
    kind: str
    q: float = 0.7

    def __post_init__(self):
        if self.kind not in _BAND_KINDS:
            raise EffectParameterError(f"unknown band kind {self.kind!r}")
        if abs(self.gain_db) > EQ_GAIN_LIMIT_DB:
            raise EffectParameterError(
                f"band gain {self.gain_db} dB outside +/-{EQ_GAIN_LIMIT_DB} dB"
            )
        if self.freq_hz <= 0 or self.q <= 0:
            raise EffectParameterError("band frequency and Q must be positive")


def _band_sos(band: EqBand, fs: float):
    w0 = 2.0 * math.pi * band.freq_hz / fs
    a = 10.0 ** (band.gain_db / 40.0)
    alpha = math.sin(w0) / (2.0 * band.q)
    cw = math.cos(w0)

    if band.kind == "peak":
        b = [1 + alpha * a, -2 * cw, 1 - alpha * a]
        den = [1 + alpha / a, -2 * cw, 1 - alpha / a]
    elif band.kind == "low-shelf":
        sq = 2.0 * math.sqrt(a) * alpha
        b = [
            a * ((a + 1) - (a - 1) * cw + sq),
            2 * a * ((a - 1) - (a + 1) * cw),
            a * ((a + 1) - (a - 1) * cw - sq),
        ]
        den = [
            (a + 1) + (a - 1) * cw + sq,
            -2 * ((a - 1) + (a + 1) * cw),
            (a + 1) + (a - 1) * cw - sq,
        ]
    else:  # high-shelf
        sq = 2.0 * math.sqrt(a) * alpha
        b = [
            a * ((a + 1) + (a - 1) * cw + sq),
            -2 * a * ((a - 1) + (a + 1) * cw),
            a * ((a + 1) + (a - 1) * cw - sq),
        ]
        den = [
            (a + 1) - (a - 1) * cw + sq,
            2 * ((a - 1) - (a + 1) * cw),
            (a + 1) - (a - 1) * cw - sq,
        ]

    sos = np.array([b + den]) / den[0]
    poles = np.roots(sos[0, 3:])
    if np.any(np.abs(poles) >= 1.0):
        raise EffectParameterError(
            f"unstable biquad for {band.kind} @ {band.freq_hz} Hz"
        )
    return sos


def eq(x: AudioBuffer, bands) -> AudioBuffer:
    """Cascade of biquad stages, one per band."""
    if x.sample_rate_hz <= 0:
        raise EffectParameterError("invalid sample rate")
    out = x.samples
    for band in bands:
        nyquist = x.sample_rate_hz / 2.0
        if band.freq_hz >= nyquist:
            raise EffectParameterError(
                f"band frequency {band.freq_hz} Hz at or above Nyquist {nyquist} Hz"
            )
        out = signal.sosfilt(_band_sos(band, x.sample_rate_hz), out, axis=-1)
    return AudioBuffer(out, x.sample_rate_hz)


# ---------------------------------------------------------------------------
# randomized augmentation


@dataclass(frozen=True)
class AugmentConfig:
    """Randomization space for the three training-time effects.

    Per-example values are drawn uniformly from the ranges below; the band
    centers target low, mid and high frequencies and each band's gain is
    drawn within +/-6 dB.
    """

    rt60_range_s: tuple = RT60_RANGE_S
    comp_threshold_range: tuple = COMP_THRESHOLD_RANGE
    comp_ratio: float = 4.0
    comp_attack_ms: float = 5.0
    comp_release_ms: float = 100.0
    eq_band_layout: tuple = (
        (100.0, "low-shelf"),
        (1000.0, "peak"),
        (8000.0, "high-shelf"),
    )
    eq_gain_limit_db: float = EQ_GAIN_LIMIT_DB
    apply_probabilities: dict = field(
        default_factory=lambda: {"reverb": 0.5, "compress": 0.5, "eq": 0.5}
    )

    def __post_init__(self):
        for name, p in self.apply_probabilities.items():
            if not 0.0 <= p <= 1.0:
                raise EffectParameterError(f"probability for {name} outside [0, 1]: {p}")
        lo, hi = self.rt60_range_s
        if not RT60_RANGE_S[0] <= lo <= hi <= RT60_RANGE_S[1]:
            raise EffectParameterError(f"rt60 range {self.rt60_range_s} outside {RT60_RANGE_S}")
        lo, hi = self.comp_threshold_range
        if not COMP_THRESHOLD_RANGE[0] <= lo <= hi <= COMP_THRESHOLD_RANGE[1]:
            raise EffectParameterError(
                f"threshold range {self.comp_threshold_range} outside {COMP_THRESHOLD_RANGE}"
            )
        if self.comp_ratio < 1.0:
            raise EffectParameterError("compressor ratio must be >= 1")
        if not 0.0 < self.eq_gain_limit_db <= EQ_GAIN_LIMIT_DB:
            raise EffectParameterError(
                f"EQ gain limit must be in (0, {EQ_GAIN_LIMIT_DB}] dB"
            )

    def to_dict(self):
        return {
            "rt60_range_s": list(self.rt60_range_s),
            "comp_threshold_range": list(self.comp_threshold_range),
            "comp_ratio": self.comp_ratio,
            "comp_attack_ms": self.comp_attack_ms,
            "comp_release_ms": self.comp_release_ms,
            "eq_band_layout": [list(b) for b in self.eq_band_layout],
            "eq_gain_limit_db": self.eq_gain_limit_db,
            "apply_probabilities": dict(self.apply_probabilities),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            rt60_range_s=tuple(d.get("rt60_range_s", RT60_RANGE_S)),
            comp_threshold_range=tuple(
                d.get("comp_threshold_range", COMP_THRESHOLD_RANGE)
            ),
            comp_ratio=d.get("comp_ratio", 4.0),
            comp_attack_ms=d.get("comp_attack_ms", 5.0),
            comp_release_ms=d.get("comp_release_ms", 100.0),
            eq_band_layout=tuple(
                tuple(b) for b in d.get("eq_band_layout", cls.eq_band_layout)
            ),
            eq_gain_limit_db=d.get("eq_gain_limit_db", EQ_GAIN_LIMIT_DB),
            apply_probabilities=dict(
                d.get("apply_probabilities", {"reverb": 0.5, "compress": 0.5, "eq": 0.5})
            ),
        )


def apply_augmentations(x: AudioBuffer, config: AugmentConfig, rng) -> AudioBuffer:
    """Apply each effect with its configured probability, parameters drawn
    from the config ranges. Deterministic for a given rng state."""
    out = x
    probs = config.apply_probabilities
    if rng.random() < probs.get("reverb", 0.0):
        rt60 = rng.uniform(*config.rt60_range_s)
        out = reverb(out, rt60, seed=int(rng.integers(2**31)))
    if rng.random() < probs.get("compress", 0.0):
        threshold = rng.uniform(*config.comp_threshold_range)
        out = compress(
            out,
            threshold,
            config.comp_ratio,
            config.comp_attack_ms,
            config.comp_release_ms,
        )
    if rng.random() < probs.get("eq", 0.0):
        # band centers are clamped below Nyquist so the high band stays a
        # valid biquad on 16 kHz material
        ceiling = 0.45 * x.sample_rate_hz
        bands = [
            EqBand(
                min(freq, ceiling),
                float(rng.uniform(-config.eq_gain_limit_db, config.eq_gain_limit_db)),
                kind,
            )
            for freq, kind in config.eq_band_layout
        ]
        out = eq(out, bands)
    return out
