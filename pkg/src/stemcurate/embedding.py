"""Encoder backends and time-pooled embeddings.

A backend turns a 3 s mono 16 kHz segment into a (T, D) frame matrix; the
embedding is the arithmetic mean over T. Two backends ship:

* ``SpectralBackend``: deterministic log-mel statistics, D = 128, no model
  file needed. Lets the whole pipeline run and be tested standalone.
* ``ExternalModelBackend``: a frozen pretrained encoder in an exported
  torch interchange file (torch.export ``.pt2``, or a legacy TorchScript
  archive) with a single waveform input and a single (T, D) output. Loaded
  read-only; D is read from the model itself.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .audio import SEGMENT_FRAMES, SEGMENT_RATE_HZ, Segment


class BackendError(Exception):
    """Model load failure or a frame-shape contract violation."""


@dataclass
class Embedding:
    values: np.ndarray
    backend_name: str
    source_id: str = ""
    index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise BackendError("embedding must be a flat vector")
        if not np.isfinite(self.values).all():
            raise BackendError("embedding contains NaN or Inf")

    @property
    def dim(self):
        return self.values.shape[0]


def _mel_filterbank(n_bands, n_fft, rate):
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_edges = np.linspace(hz_to_mel(0.0), hz_to_mel(rate / 2.0), n_bands + 2)
    hz_edges = mel_to_hz(mel_edges)
    bins = np.fft.rfftfreq(n_fft, 1.0 / rate)
    fb = np.zeros((n_bands, len(bins)))
    for b in range(n_bands):
        lo, mid, hi = hz_edges[b : b + 3]
        rising = (bins - lo) / max(mid - lo, 1e-12)
        falling = (hi - bins) / max(hi - mid, 1e-12)
        fb[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


class SpectralBackend:
    """Built-in deterministic backend: 64 log-mel bands over 25 ms windows
    with 10 ms hop; each frame carries the log-mel vector concatenated with
    the per-band standard deviation across the whole segment, so the
    time-pooled embedding is [per-band mean, per-band std] with D = 128.
    """

    N_BANDS = 64
    WIN = int(0.025 * SEGMENT_RATE_HZ)  # 400
    HOP = int(0.010 * SEGMENT_RATE_HZ)  # 160
    N_FFT = 512
    FLOOR = 1e-10

    name = "spectral-v1"
    dim_d = 2 * N_BANDS

    def __init__(self):
        self._fb = _mel_filterbank(self.N_BANDS, self.N_FFT, SEGMENT_RATE_HZ)
        self._window = np.hanning(self.WIN)

    def frames(self, segment: Segment) -> np.ndarray:
        x = segment.audio.samples[0]
        n_frames = 1 + (len(x) - self.WIN) // self.HOP
        idx = np.arange(self.WIN)[None, :] + self.HOP * np.arange(n_frames)[:, None]
        windowed = x[idx] * self._window
        spectrum = np.abs(np.fft.rfft(windowed, n=self.N_FFT, axis=1)) ** 2
        logmel = np.log(spectrum @ self._fb.T + self.FLOOR)
        band_std = logmel.std(axis=0)
        return np.hstack([logmel, np.tile(band_std, (n_frames, 1))])


class ExternalModelBackend:
    """Frozen external encoder loaded from an exported torch model file.

    Contract: single input, a float32 waveform of SEGMENT_FRAMES samples at
    16 kHz; single output, a (T, D) float matrix. ``.pt2`` archives
    (torch.export) are tried first, then legacy TorchScript. The declared
    dimension is verified against a probe segment at load time.
    """

    def __init__(self, model_path, expected_dim=None):
        try:
            import torch
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise BackendError(
                "ExternalModelBackend requires torch (install the 'model' extra)"
            ) from exc
        self._torch = torch
        self._model = self._load(torch, model_path)
        self.name = f"external:{model_path}"

        probe = self._run(np.zeros(SEGMENT_FRAMES, dtype=np.float32))
        self.dim_d = int(probe.shape[1])
        if expected_dim is not None and self.dim_d != expected_dim:
            raise BackendError(
                f"model emits D={self.dim_d}, config expects D={expected_dim}"
            )

    @staticmethod
    def _load(torch, model_path):
        errors = []
        try:
            return torch.export.load(str(model_path)).module()
        except Exception as exc:
            errors.append(f"torch.export: {exc}")
        try:
            model = torch.jit.load(str(model_path), map_location="cpu")
            model.eval()
            for p in model.parameters():
                p.requires_grad_(False)
            return model
        except Exception as exc:
            errors.append(f"torchscript: {exc}")
        raise BackendError(
            f"cannot load model {model_path}: " + "; ".join(errors)
        )

    def _run(self, waveform):
        with self._torch.no_grad():
            out = self._model(self._torch.from_numpy(waveform))
        arr = out.detach().cpu().numpy()
        if arr.ndim == 3 and arr.shape[0] == 1:
            arr = arr[0]
        if arr.ndim != 2:
            raise BackendError(f"model output must be (T, D), got shape {arr.shape}")
        return arr.astype(np.float64)

    def frames(self, segment: Segment) -> np.ndarray:
        return self._run(segment.audio.samples[0].astype(np.float32))


def embed(segment: Segment, backend) -> Embedding:
    """Mean-pool the backend's frame matrix into one D-vector."""
    frames = np.asarray(backend.frames(segment), dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise BackendError(f"backend produced invalid frame matrix {frames.shape}")
    if frames.shape[1] != backend.dim_d:
        raise BackendError(
            f"backend declares D={backend.dim_d} but produced {frames.shape[1]}"
        )
    return Embedding(
        frames.mean(axis=0),
        backend_name=backend.name,
        source_id=segment.source_id,
        index=segment.index,
    )


def embed_batch(segments, backend, parallelism=1):
    """Order-preserving map of embed(); errors carry the segment index."""
    segments = list(segments)

    def run(pair):
        i, seg = pair
        try:
            return embed(seg, backend)
        except Exception as exc:
            raise BackendError(f"embedding failed for segment #{i}: {exc}") from exc

    if parallelism <= 1 or len(segments) <= 1:
        return [run(p) for p in enumerate(segments)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, enumerate(segments)))
