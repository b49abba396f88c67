"""Point-set feature backbone: a small multi-resolution encoder.

Each level aggregates k-nearest-neighbor context with a shared two-layer MLP
and max pooling, then the next level keeps a farthest-point subset (ratio ~4,
clamped to at least one row). Row counts per level follow
``n_next = max(1, ceil(n_prev / ratio))``; every level records the row
indices into the original sample set so coarse features stay traceable.

Neighbor search and subsampling run on positions only (plain numpy, stable
tie-breaks), so they are data as far as autograd is concerned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


def farthest_point_indices(positions: np.ndarray, count: int) -> np.ndarray:
    """Greedy farthest-point subset, seeded at row 0; ties pick the lowest index."""
    n = len(positions)
    if count >= n:
        return np.arange(n, dtype=np.int64)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    pos = np.asarray(positions, dtype=np.float64)
    chosen = np.empty(count, dtype=np.int64)
    chosen[0] = 0
    d2 = ((pos - pos[0]) ** 2).sum(axis=1)
    for i in range(1, count):
        nxt = int(np.argmax(d2))  # first max = lowest index on ties
        chosen[i] = nxt
        d2 = np.minimum(d2, ((pos - pos[nxt]) ** 2).sum(axis=1))
    return chosen


def knn_indices(queries: np.ndarray, refs: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest reference rows per query (stable order)."""
    queries = np.asarray(queries, dtype=np.float64)
    refs = np.asarray(refs, dtype=np.float64)
    k = min(k, len(refs))
    d2 = ((queries[:, None, :] - refs[None, :, :]) ** 2).sum(axis=2)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


@dataclass
class PyramidLevel:
    features: torch.Tensor  # [M, D]
    positions: torch.Tensor  # [M, 2], normalized
    indices: np.ndarray  # [M] rows into the original sample set


@dataclass
class FeaturePyramid:
    levels: list[PyramidLevel]

    @property
    def finest(self) -> PyramidLevel:
        return self.levels[0]

    def row_counts(self) -> list[int]:
        return [len(l.indices) for l in self.levels]


class _NeighborBlock(nn.Module):
    """max_j MLP([h_j, p_j - p_i]) over the neighborhood of each kept row."""

    def __init__(self, dim: int):
        super().__init__()
        self.mlp = nn.Sequential(nn.Linear(dim + 2, dim), nn.ReLU(), nn.Linear(dim, dim))

    def forward(self, h: torch.Tensor, pos: torch.Tensor, kept: np.ndarray,
                neighbors: np.ndarray) -> torch.Tensor:
        nbr = torch.as_tensor(neighbors, dtype=torch.long, device=h.device)
        kept_t = torch.as_tensor(kept, dtype=torch.long, device=h.device)
        rel = pos[nbr] - pos[kept_t][:, None, :]
        x = torch.cat([h[nbr], rel], dim=-1)
        return self.mlp(x).max(dim=1).values


class PointEncoder(nn.Module):
    """Multi-level point encoder producing a feature pyramid (finest first)."""

    def __init__(self, feature_dim: int = 6, dim: int = 128, levels: int = 5,
                 k: int = 8, ratio: int = 4):
        super().__init__()
        if levels < 2:
            raise ValueError(f"need >= 2 pyramid levels, got {levels}")
        if ratio < 2:
            raise ValueError(f"downsampling ratio must be >= 2, got {ratio}")
        self.dim = dim
        self.k = k
        self.ratio = ratio
        self.num_levels = levels
        self.input_proj = nn.Linear(2 + feature_dim, dim)
        self.blocks = nn.ModuleList(_NeighborBlock(dim) for _ in range(levels))

    def forward(self, positions: torch.Tensor, features: torch.Tensor) -> FeaturePyramid:
        n = positions.shape[0]
        if n == 0:
            raise ValueError("cannot encode an empty point set")
        pos_np = positions.detach().cpu().numpy()
        h = self.input_proj(torch.cat([positions, features], dim=-1))

        levels: list[PyramidLevel] = []
        prev_idx = np.arange(n, dtype=np.int64)
        prev_pos_np, prev_pos, prev_h = pos_np, positions, h
        for r, block in enumerate(self.blocks):
            if r == 0:
                kept = np.arange(n, dtype=np.int64)
            else:
                target = max(1, math.ceil(len(prev_idx) / self.ratio))
                kept = farthest_point_indices(prev_pos_np, target)
            nbr = knn_indices(prev_pos_np[kept], prev_pos_np, self.k)
            out = block(prev_h, prev_pos, kept, nbr)
            idx = prev_idx[kept]
            pos_t = prev_pos[torch.as_tensor(kept, dtype=torch.long, device=positions.device)]
            levels.append(PyramidLevel(features=out, positions=pos_t, indices=idx))
            prev_idx, prev_pos_np, prev_pos, prev_h = idx, prev_pos_np[kept], pos_t, out
        return FeaturePyramid(levels=levels)
