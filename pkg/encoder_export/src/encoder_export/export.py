"""One-shot export: load a pretrained encoder checkpoint, freeze it behind
the waveform -> (T, D) interchange contract, save it as TorchScript with a
metadata sidecar, and emit probe-input/expected-embedding fixture pairs.

The fixtures let any consumer of the exported model verify, offline, that
its own embedding path reproduces this tool's reference output.
"""

import hashlib
import importlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .adapter import (
    INPUT_SAMPLES,
    SAMPLE_RATE_HZ,
    ContractError,
    adapt,
    probe_waveform,
    safe_eval,
    validate_contract,
)

METADATA_VERSION = 1


class ExportError(Exception):
    pass


@dataclass
class ExportSpec:
    checkpoint_path: str
    output_path: str
    probe_count: int = 5
    factory: str = ""  # "module:callable" building the bare model for state_dicts
    allow_pickle: bool = False
    expected_dim: int = 0  # 0 = accept whatever the model emits
    format: str = "pt2"  # "pt2" (torch.export) or "torchscript" for stubborn graphs

    def __post_init__(self):
        if self.probe_count < 0:
            raise ExportError("probe_count must be >= 0")
        if self.format not in ("pt2", "torchscript"):
            raise ExportError(f"unknown export format {self.format!r}")


def _load_factory(spec_text):
    module_name, _, attr = spec_text.partition(":")
    if not module_name or not attr:
        raise ExportError(f"factory must look like 'package.module:callable', got {spec_text!r}")
    try:
        return getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ExportError(f"cannot resolve factory {spec_text!r}: {exc}") from exc


def load_encoder(spec: ExportSpec) -> torch.nn.Module:
    """Load the checkpoint as distributed: state_dict (with a factory to
    build the bare model), an exported .pt2 program, a TorchScript archive,
    or a pickled module."""
    path = Path(spec.checkpoint_path)
    if not path.exists():
        raise ExportError(f"checkpoint not found: {path}")

    try:
        payload = torch.load(str(path), map_location="cpu", weights_only=True)
    except Exception as weights_exc:
        for loader in (
            lambda: torch.export.load(str(path)).module(),
            lambda: torch.jit.load(str(path), map_location="cpu"),
        ):
            try:
                return loader()
            except Exception:
                continue
        if spec.allow_pickle:
            try:
                payload = torch.load(str(path), map_location="cpu", weights_only=False)
            except Exception as exc:
                raise ExportError(f"cannot load checkpoint {path}: {exc}") from exc
        else:
            raise ExportError(
                f"cannot load checkpoint {path} as weights ({weights_exc}); "
                "pass allow_pickle for pickled modules"
            ) from weights_exc

    if isinstance(payload, torch.nn.Module):
        return payload
    if isinstance(payload, dict):
        state = payload.get("state_dict", payload)
        if not spec.factory:
            raise ExportError(
                "checkpoint holds a state_dict; a factory ('module:callable') "
                "is needed to build the bare model"
            )
        model = _load_factory(spec.factory)()
        model.load_state_dict(state)
        return model
    raise ExportError(f"unsupported checkpoint payload {type(payload).__name__}")


def _freeze(module: torch.nn.Module):
    safe_eval(module)
    for p in module.parameters():
        p.requires_grad_(False)
    return module


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _load_exported(path):
    try:
        return torch.export.load(str(path)).module()
    except Exception:
        return torch.jit.load(str(path), map_location="cpu")


def export_model(spec: ExportSpec):
    """Export per spec; returns (model_path, metadata dict).

    Nothing is written until the captured graph has passed the contract
    probe, so a failing export leaves no partial files behind. The default
    format is a torch.export program; --format torchscript traces instead,
    for graphs the exporter cannot capture.
    """
    encoder = _freeze(load_encoder(spec))
    adapted = adapt(encoder)
    if spec.format == "pt2":
        captured = torch.export.export(adapted, (probe_waveform(),))
        runnable = captured.module()
    else:
        with torch.no_grad():
            captured = runnable = torch.jit.trace(adapted, probe_waveform())
    frames, dim = validate_contract(runnable)
    if spec.expected_dim and dim != spec.expected_dim:
        raise ContractError(
            f"model emits D={dim}, export was told to expect D={spec.expected_dim}"
        )

    out_path = Path(spec.output_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if spec.format == "pt2":
        torch.export.save(captured, str(out_path))
    else:
        torch.jit.save(captured, str(out_path))

    metadata = {
        "version": METADATA_VERSION,
        "format": spec.format,
        "dim_d": dim,
        "frames_per_segment": frames,
        "input_samples": INPUT_SAMPLES,
        "sample_rate_hz": SAMPLE_RATE_HZ,
        "model_sha256": _sha256(out_path),
        "source_checkpoint_sha256": _sha256(spec.checkpoint_path),
    }
    meta_path = out_path.with_suffix(out_path.suffix + ".json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if spec.probe_count:
        write_probe_fixtures(out_path, out_path.parent, spec.probe_count)
    return out_path, metadata


def write_probe_fixtures(model_path, fixtures_dir, count):
    """Seeded (waveform, expected-embedding) pairs for parity testing.

    The expected embedding is the time-pooled (mean over T) output of the
    exported model itself, computed here so consumers never need this tool
    at test time.
    """
    fixtures_dir = Path(fixtures_dir)
    fixtures_dir.mkdir(parents=True, exist_ok=True)
    model = safe_eval(_load_exported(model_path))
    paths = []
    for seed in range(count):
        waveform = probe_waveform(seed)
        with torch.no_grad():
            frames = model(waveform)
        embedding = frames.mean(dim=0).numpy().astype(np.float64)
        path = fixtures_dir / f"probe_{seed:02d}.npz"
        np.savez(
            path,
            waveform=waveform.numpy(),  # float32, exactly what the model saw
            embedding=embedding,
            seed=np.array(seed),
        )
        paths.append(path)
    return paths
