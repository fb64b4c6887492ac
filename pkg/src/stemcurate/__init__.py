"""stemcurate: curation of single-instrument audio datasets.

Crawled tracks are segmented into 3 s windows, each window is scored by a
per-instrument purity classifier built on frozen audio embeddings, and the
pure windows are spliced back into clean tracks. The package also trains
those classifiers from synthesized positive/negative mixtures.
"""

from .audio import (
    SEGMENT_FRAMES,
    SEGMENT_RATE_HZ,
    AudioBuffer,
    AudioError,
    Segment,
    resample,
    safe_normalize,
    segment,
    splice,
    to_mono,
)
from .cleaner import CleaningReport, clean_corpus, clean_track, corpus_stats, sdr
from .effects import AugmentConfig, compress, eq, estimate_rt60, reverb
from .embedding import Embedding, SpectralBackend, embed, embed_batch
from .head import (
    EvalReport,
    HeadParams,
    TrainConfig,
    decide,
    evaluate,
    grad_check,
    head_forward,
    load_head,
    save_head,
    train_head,
)
from .loudness import UnmeasurableError, measure_lufs, normalize_lufs
from .mixture import MixtureSpec, SourcePool, SourceRef, build_epoch, draw_spec, render
from .taxonomy import STEMS, QueryTemplate, default_templates, expand_queries

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "AudioError",
    "AugmentConfig",
    "CleaningReport",
    "Embedding",
    "EvalReport",
    "HeadParams",
    "MixtureSpec",
    "QueryTemplate",
    "STEMS",
    "SEGMENT_FRAMES",
    "SEGMENT_RATE_HZ",
    "Segment",
    "SourcePool",
    "SourceRef",
    "SpectralBackend",
    "TrainConfig",
    "UnmeasurableError",
    "build_epoch",
    "clean_corpus",
    "clean_track",
    "compress",
    "corpus_stats",
    "decide",
    "draw_spec",
    "embed",
    "embed_batch",
    "eq",
    "estimate_rt60",
    "evaluate",
    "expand_queries",
    "default_templates",
    "grad_check",
    "head_forward",
    "load_head",
    "measure_lufs",
    "normalize_lufs",
    "render",
    "resample",
    "reverb",
    "safe_normalize",
    "save_head",
    "sdr",
    "segment",
    "splice",
    "to_mono",
    "train_head",
]
