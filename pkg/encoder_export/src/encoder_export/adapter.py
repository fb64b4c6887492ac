"""Wraps an arbitrary pretrained audio-encoder module into the fixed
interchange contract: a single float32 waveform input of 48 000 samples at
16 kHz, a single (T, D) float output.

Upstream encoders usually want a batch dimension and may return (B, T, D);
the adapter normalizes both sides so the exported graph always honours the
contract.
"""

import torch

INPUT_SAMPLES = 48_000
SAMPLE_RATE_HZ = 16_000


class ContractError(Exception):
    """The wrapped module cannot satisfy the waveform -> (T, D) contract."""


class WaveformEncoderAdapter(torch.nn.Module):
    def __init__(self, encoder: torch.nn.Module, batched_input: bool = True):
        super().__init__()
        self.encoder = encoder
        self.batched_input = batched_input

    def forward(self, waveform: torch.Tensor) -> torch.Tensor:
        x = waveform
        if self.batched_input:
            x = x.unsqueeze(0)
        out = self.encoder(x)
        if out.dim() == 3:
            out = out.squeeze(0)
        return out


def probe_waveform(seed: int = 0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return 0.5 * torch.rand(INPUT_SAMPLES, generator=gen, dtype=torch.float32) - 0.25


def safe_eval(module: torch.nn.Module) -> torch.nn.Module:
    """Switch to eval mode where supported; unlifted torch.export graph
    modules refuse eval() but are already capture-time frozen."""
    try:
        module.eval()
    except NotImplementedError:
        pass
    return module


def validate_contract(module: torch.nn.Module) -> tuple:
    """Run a probe through the adapted module; returns (frames, dim).

    Raises ContractError with the offending shapes when the output is not a
    2-D (T, D) float matrix.
    """
    safe_eval(module)
    with torch.no_grad():
        out = module(probe_waveform())
    if not isinstance(out, torch.Tensor):
        raise ContractError(f"encoder returned {type(out).__name__}, expected a tensor")
    if out.dim() != 2 or out.shape[0] < 1 or out.shape[1] < 1:
        raise ContractError(
            f"encoder output shape {tuple(out.shape)} violates the (T, D) contract"
        )
    if not torch.isfinite(out).all():
        raise ContractError("encoder output contains NaN or Inf")
    return int(out.shape[0]), int(out.shape[1])


def adapt(encoder: torch.nn.Module) -> torch.nn.Module:
    """Try the module bare, then behind a batch adapter; first layout that
    satisfies the contract wins."""
    failures = []
    for candidate in (
        WaveformEncoderAdapter(encoder, batched_input=False),
        WaveformEncoderAdapter(encoder, batched_input=True),
    ):
        try:
            validate_contract(candidate)
            return candidate
        except (ContractError, RuntimeError, ValueError, IndexError) as exc:
            failures.append(str(exc))
    raise ContractError(
        "encoder fits neither the unbatched nor the batched waveform layout: "
        + " | ".join(failures)
    )
