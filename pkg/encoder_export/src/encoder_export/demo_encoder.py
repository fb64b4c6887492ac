"""A small frame-wise audio encoder used for offline export rehearsals and
fixture generation when no real pretrained checkpoint is at hand.

It mimics the common patch-embedding layout: strided conv over the waveform
into 25 ms / 10 ms frames, pointwise nonlinearity, one depthwise mixing
layer. Weights are seeded so a 'checkpoint as distributed' can be recreated
bit-for-bit.
"""

import torch

DEMO_DIM = 64


class DemoEncoder(torch.nn.Module):
    def __init__(self, dim: int = DEMO_DIM):
        super().__init__()
        self.patch = torch.nn.Conv1d(1, dim, kernel_size=400, stride=160)
        self.mix = torch.nn.Conv1d(dim, dim, kernel_size=3, padding=1, groups=8)
        self.act = torch.nn.GELU()

    def forward(self, waveform: torch.Tensor) -> torch.Tensor:
        # (B, samples) -> (B, T, D)
        x = waveform.unsqueeze(1)
        x = self.act(self.patch(x))
        x = x + self.mix(x)
        return x.transpose(1, 2)


def demo_encoder(dim: int = DEMO_DIM, seed: int = 1234) -> DemoEncoder:
    torch.manual_seed(seed)
    return DemoEncoder(dim)


def default_factory() -> DemoEncoder:
    """Factory for the state_dict loading path (module:callable spec)."""
    return demo_encoder()


def write_demo_checkpoint(path, seed: int = 1234):
    model = demo_encoder(seed=seed)
    torch.save({"state_dict": model.state_dict()}, str(path))
    return path
