"""Positional encodings for 2D points in the unit square.

Both encoders map [., 2] points to [., dim] vectors whose squared norm is
exactly dim/2 (each frequency contributes a unit cos/sin pair).
"""

from __future__ import annotations

import math

import torch


def make_fourier_matrix(dim: int, scale: float = 1.0,
                        generator: torch.Generator | None = None) -> torch.Tensor:
    """Gaussian frequency matrix [dim/2, 2]; draw once, freeze as a buffer."""
    if dim % 2 != 0:
        raise ValueError(f"encoding dim must be even, got {dim}")
    return torch.randn(dim // 2, 2, generator=generator) * scale


def fourier_encode(points: torch.Tensor, freq: torch.Tensor) -> torch.Tensor:
    """[cos(2 pi B p); sin(2 pi B p)] with frequency rows B."""
    z = 2.0 * math.pi * points @ freq.T.to(points.dtype)
    return torch.cat([torch.cos(z), torch.sin(z)], dim=-1)


def sine_encode(points: torch.Tensor, dim: int, temperature: float = 10000.0) -> torch.Tensor:
    """Fixed sinusoidal encoding, half the channels per coordinate."""
    if dim % 4 != 0:
        raise ValueError(f"sine encoding needs dim % 4 == 0, got {dim}")
    half = dim // 2
    freq_idx = torch.arange(half // 2, dtype=points.dtype, device=points.device)
    inv = temperature ** (-2.0 * freq_idx / half)
    out = []
    for c in range(2):
        z = 2.0 * math.pi * points[..., c : c + 1] * inv
        out.extend([torch.sin(z), torch.cos(z)])
    return torch.cat(out, dim=-1)


class PositionEncoder(torch.nn.Module):
    """Configured point->vector encoder; the fourier matrix is a frozen buffer."""

    def __init__(self, dim: int, mode: str = "fourier", fourier_scale: float = 1.0,
                 generator: torch.Generator | None = None):
        super().__init__()
        if mode not in ("fourier", "sine"):
            raise ValueError(f"unknown positional encoding {mode!r}")
        self.dim = dim
        self.mode = mode
        if mode == "fourier":
            self.register_buffer("freq", make_fourier_matrix(dim, fourier_scale, generator))
        else:
            sine_encode(torch.zeros(1, 2), dim)  # validate dim up front

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        if self.mode == "fourier":
            return fourier_encode(points, self.freq)
        return sine_encode(points, self.dim)
