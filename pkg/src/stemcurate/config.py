"""Shared pipeline configuration: one JSON document feeding every
subcommand, overridable from the command line (flags win)."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .cleaner import DEFAULT_CLEAN_THRESHOLD
from .effects import AugmentConfig
from .head import DEFAULT_DECISION_THRESHOLD, TrainConfig
from .loudness import DEFAULT_TARGET_LUFS


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    backend_name: str = "builtin"
    backend_model_path: str = ""
    backend_expected_dim: int = 0  # 0 = read from model
    train_eval_threshold: float = DEFAULT_DECISION_THRESHOLD
    clean_threshold: float = DEFAULT_CLEAN_THRESHOLD
    loudness_target_lufs: float = DEFAULT_TARGET_LUFS
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    workers: int = 1
    seed: int = 0
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in (
            ("train_eval_threshold", self.train_eval_threshold),
            ("clean_threshold", self.clean_threshold),
        ):
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
        if self.backend_name not in ("builtin", "external"):
            raise ConfigError(f"unknown backend {self.backend_name!r}")
        if self.backend_name == "external" and not self.backend_model_path:
            raise ConfigError("external backend needs backend_model_path")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        backend = doc.get("backend", {})
        thresholds = doc.get("thresholds", {})
        cfg = cls(
            backend_name=backend.get("name", "builtin"),
            backend_model_path=backend.get("model_path", ""),
            backend_expected_dim=int(backend.get("expected_dim", 0)),
            train_eval_threshold=thresholds.get("train_eval", DEFAULT_DECISION_THRESHOLD),
            clean_threshold=thresholds.get("clean", DEFAULT_CLEAN_THRESHOLD),
            loudness_target_lufs=doc.get("loudness_target_lufs", DEFAULT_TARGET_LUFS),
            augment=AugmentConfig.from_dict(doc.get("augment", {})),
            training=TrainConfig(**doc.get("training", {})),
            workers=int(doc.get("workers", 1)),
            seed=int(doc.get("seed", 0)),
            paths=dict(doc.get("paths", {})),
        )
        cfg.validate_paths()
        return cfg

    def validate_paths(self):
        for name, value in self.paths.items():
            if name.endswith("_dir"):
                continue  # output directories are created on demand
            if value and not Path(value).exists():
                raise ConfigError(f"configured path {name} does not exist: {value}")
        if self.backend_model_path and not Path(self.backend_model_path).exists():
            raise ConfigError(f"backend model not found: {self.backend_model_path}")

    def make_backend(self):
        if self.backend_name == "builtin":
            from .embedding import SpectralBackend

            return SpectralBackend()
        from .embedding import ExternalModelBackend

        return ExternalModelBackend(
            self.backend_model_path, self.backend_expected_dim or None
        )

    def to_dict(self):
        return {
            "backend": {
                "name": self.backend_name,
                "model_path": self.backend_model_path,
                "expected_dim": self.backend_expected_dim,
            },
            "thresholds": {
                "train_eval": self.train_eval_threshold,
                "clean": self.clean_threshold,
            },
            "loudness_target_lufs": self.loudness_target_lufs,
            "augment": self.augment.to_dict(),
            "training": self.training.to_dict(),
            "workers": self.workers,
            "seed": self.seed,
            "paths": dict(self.paths),
        }
