"""Labeled training-example synthesis.

Positives are 3 s crops of pure target-stem audio. Negatives mix k (1..5)
non-target source types (other stems and noise) plus, when k > 1,
optionally the target itself; every component and the resulting mixture are
loudness-normalized, then the mixture is augmented and safe-normalized.
Everything is deterministic under a fixed seed.
"""

import json
import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import (
    SEGMENT_FRAMES,
    SEGMENT_RATE_HZ,
    SEGMENT_SECONDS,
    AudioBuffer,
    Segment,
    safe_normalize,
    to_classifier_rate,
)
from .effects import AugmentConfig, apply_augmentations
from .loudness import DEFAULT_TARGET_LUFS, UnmeasurableError, normalize_lufs
from .taxonomy import STEM_IDS

log = logging.getLogger(__name__)

NOISE_STEM = "noise"
K_RANGE = (1, 5)
SYNTH_NOISE_DURATION_S = 10.0
_MAX_REDRAWS = 25


class PoolError(Exception):
    pass


@dataclass(frozen=True)
class SourceRef:
    """One pool entry: an audio file (or synthetic noise) with its stem tag."""

    path: str
    stem: str
    duration_s: float

    @property
    def is_synthetic(self):
        return self.path.startswith("synth:")


class SourcePool:
    """Read-only collection of per-stem source files plus noise.

    When the manifest carries no noise entries, seeded synthetic white and
    pink noise stand in so negative synthesis always has a noise source.
    """

    def __init__(self, refs, allow_synthetic_noise=True, check_files=True):
        self.refs = list(refs)
        for ref in self.refs:
            if ref.stem != NOISE_STEM and ref.stem not in STEM_IDS:
                raise PoolError(f"unknown stem {ref.stem!r} for {ref.path}")
            if not ref.is_synthetic and ref.duration_s < SEGMENT_SECONDS:
                raise PoolError(
                    f"{ref.path}: {ref.duration_s:.2f} s is shorter than one "
                    f"{SEGMENT_SECONDS:.0f} s crop"
                )
            if check_files and not ref.is_synthetic and not Path(ref.path).exists():
                raise PoolError(f"pool entry missing on disk: {ref.path}")
        if allow_synthetic_noise and not any(r.stem == NOISE_STEM for r in self.refs):
            self.refs.append(SourceRef("synth:white", NOISE_STEM, SYNTH_NOISE_DURATION_S))
            self.refs.append(SourceRef("synth:pink", NOISE_STEM, SYNTH_NOISE_DURATION_S))
        self._cache = OrderedDict()
        self._cache_lock = threading.Lock()  # renders may run in parallel

    @classmethod
    def from_manifest(cls, path, **kwargs):
        """JSON-lines manifest, one record per file:
        {"path": ..., "stem": ..., "duration_s": ...}"""
        refs = []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    refs.append(
                        SourceRef(rec["path"], rec["stem"], float(rec["duration_s"]))
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise PoolError(f"{path}:{line_no}: bad record: {exc}") from exc
        return cls(refs, **kwargs)

    def by_stem(self, stem):
        return [r for r in self.refs if r.stem == stem]

    def stems_present(self):
        return sorted({r.stem for r in self.refs})

    def negative_stems(self, target_stem):
        return [s for s in self.stems_present() if s != target_stem]

    def load_mono16k(self, ref: SourceRef, rng=None) -> AudioBuffer:
        """Decode (or synthesize) a source as mono 16 kHz, with a small LRU."""
        if ref.is_synthetic:
            if rng is None:
                rng = np.random.default_rng(0)
            return _synthetic_noise(ref.path, ref.duration_s, rng)
        with self._cache_lock:
            cached = self._cache.get(ref.path)
            if cached is not None:
                self._cache.move_to_end(ref.path)
                return cached
        buf = to_classifier_rate(AudioBuffer.from_wav(ref.path))
        with self._cache_lock:
            self._cache[ref.path] = buf
            self._cache.move_to_end(ref.path)
            if len(self._cache) > 32:
                self._cache.popitem(last=False)
        return buf


def _synthetic_noise(kind, duration_s, rng):
    n = int(round(duration_s * SEGMENT_RATE_HZ))
    white = rng.standard_normal(n)
    if kind == "synth:pink":
        spectrum = np.fft.rfft(white)
        f = np.fft.rfftfreq(n, 1.0 / SEGMENT_RATE_HZ)
        f[0] = f[1]
        spectrum /= np.sqrt(f)
        white = np.fft.irfft(spectrum, n)
    white *= 0.3 / max(np.abs(white).max(), 1e-12)
    return AudioBuffer(white[None, :], SEGMENT_RATE_HZ)


@dataclass(frozen=True)
class MixtureSpec:
    """Fully-determined recipe for one training example."""

    target_stem: str
    polarity: str  # "positive" | "negative"
    components: tuple  # of (SourceRef, crop_offset_s)
    seed: int
    k: int = 0  # negatives: number of non-target source types mixed
    include_target: bool = False

    def __post_init__(self):
        if self.polarity not in ("positive", "negative"):
            raise PoolError(f"bad polarity {self.polarity!r}")
        if self.polarity == "positive":
            if len(self.components) != 1 or self.components[0][0].stem != self.target_stem:
                raise PoolError("positive spec must hold exactly the target component")
        else:
            if not K_RANGE[0] <= self.k <= K_RANGE[1]:
                raise PoolError(f"k={self.k} outside {K_RANGE}")
            if self.include_target and self.k <= 1:
                raise PoolError("target may only join a mixture when k > 1")

    @property
    def label(self):
        return 1 if self.polarity == "positive" else 0


def _draw_crop(ref, rng):
    slack = max(0.0, ref.duration_s - SEGMENT_SECONDS)
    return (ref, float(rng.uniform(0.0, slack)) if slack > 0 else 0.0)


def draw_spec(pool: SourcePool, target_stem, polarity, rng) -> MixtureSpec:
    """Draw a MixtureSpec; uniform file and crop-offset choices."""
    seed = int(rng.integers(2**31))
    if polarity == "positive":
        candidates = pool.by_stem(target_stem)
        if not candidates:
            raise PoolError(f"no sources for target stem {target_stem!r}")
        ref = candidates[rng.integers(len(candidates))]
        return MixtureSpec(target_stem, "positive", (_draw_crop(ref, rng),), seed)

    other = pool.negative_stems(target_stem)
    if not other:
        raise PoolError("no negative sources: pool holds only the target stem")
    k = int(rng.integers(K_RANGE[0], K_RANGE[1] + 1))
    k = min(k, len(other))
    chosen = rng.choice(len(other), size=k, replace=False)
    include_target = bool(k > 1 and rng.random() < 0.5 and pool.by_stem(target_stem))
    components = []
    for i in chosen:
        files = pool.by_stem(other[i])
        components.append(_draw_crop(files[rng.integers(len(files))], rng))
    if include_target:
        files = pool.by_stem(target_stem)
        components.append(_draw_crop(files[rng.integers(len(files))], rng))
    return MixtureSpec(
        target_stem, "negative", tuple(components), seed, k=k, include_target=include_target
    )


def _crop(buf: AudioBuffer, offset_s) -> AudioBuffer:
    start = int(round(offset_s * SEGMENT_RATE_HZ))
    window = buf.samples[:, start : start + SEGMENT_FRAMES]
    if window.shape[1] < SEGMENT_FRAMES:  # short source: zero-pad the tail
        window = np.pad(window, ((0, 0), (0, SEGMENT_FRAMES - window.shape[1])))
    return AudioBuffer(window.copy(), SEGMENT_RATE_HZ)


def render(
    spec: MixtureSpec,
    pool: SourcePool,
    augment: AugmentConfig = None,
    loudness_target: float = DEFAULT_TARGET_LUFS,
):
    """Render a spec into (Segment, label).

    Components are cropped, loudness-matched and summed; the mixture is
    loudness-normalized, augmented per config, then safe-normalized.
    Raises UnmeasurableError when a component is effectively silent.
    """
    rng = np.random.default_rng(spec.seed)
    mix = np.zeros((1, SEGMENT_FRAMES))
    for ref, offset_s in spec.components:
        source = pool.load_mono16k(ref, rng=rng)
        cropped = _crop(source, offset_s)
        try:
            leveled = normalize_lufs(cropped, loudness_target)
        except UnmeasurableError as exc:
            raise UnmeasurableError(
                f"component {ref.path} @ {offset_s:.2f}s: {exc}"
            ) from exc
        mix += leveled.samples

    mixture = AudioBuffer(mix, SEGMENT_RATE_HZ)
    try:
        mixture = normalize_lufs(mixture, loudness_target)
    except UnmeasurableError as exc:
        raise UnmeasurableError(f"mixture of {len(spec.components)}: {exc}") from exc
    if augment is not None:
        mixture = apply_augmentations(mixture, augment, rng)
    mixture = safe_normalize(mixture)

    source_id = f"{spec.polarity}:{spec.target_stem}:{spec.seed}"
    return Segment(mixture, source_id, 0), spec.label


def build_epoch(
    pool: SourcePool,
    target_stem,
    n_per_class,
    seed,
    augment: AugmentConfig = None,
    loudness_target: float = DEFAULT_TARGET_LUFS,
):
    """Exactly n_per_class rendered examples of each label, shuffled
    deterministically by the seed. Unmeasurable draws are logged and
    redrawn."""
    if n_per_class < 1:
        raise PoolError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(seed)
    examples = []
    for polarity in ("positive", "negative"):
        produced = 0
        failures = 0
        while produced < n_per_class:
            spec = draw_spec(pool, target_stem, polarity, rng)
            try:
                examples.append(render(spec, pool, augment, loudness_target))
            except UnmeasurableError as exc:
                failures += 1
                log.warning("redrawing %s example: %s", polarity, exc)
                if failures > _MAX_REDRAWS:
                    raise PoolError(
                        f"gave up after {failures} unmeasurable {polarity} draws"
                    ) from exc
                continue
            produced += 1
    order = rng.permutation(len(examples))
    return [examples[i] for i in order]
