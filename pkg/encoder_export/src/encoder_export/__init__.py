"""encoder-export: one-shot conversion of pretrained audio-encoder
checkpoints into the TorchScript interchange contract (mono 16 kHz 48 000
sample input -> (T, D) float output) plus parity fixtures."""

from .adapter import ContractError, WaveformEncoderAdapter, adapt, probe_waveform
from .export import ExportError, ExportSpec, export_model, load_encoder, write_probe_fixtures

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "ExportError",
    "ExportSpec",
    "WaveformEncoderAdapter",
    "adapt",
    "export_model",
    "load_encoder",
    "probe_waveform",
    "write_probe_fixtures",
]
