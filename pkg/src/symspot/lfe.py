"""Layer-context feature fusion.

CAD layers group related primitives. For every layer group this module pools
a layer descriptor, projects it, and fuses it back into each member feature:

    u      = pool(rows)                      # mean / max / attn / concat of all three
    ctx    = fc2(relu(fc1(u)))               # layer context vector, dim D
    row_i' = fc3([row_i, ctx])               # fusion "concat" (default)
    row_i' = row_i + ctx                     # fusion "sum"

Attention pooling scores each row with a linear head and softmax-normalizes
within the group, so a single-row group pools to the row itself. Outputs are
finite whenever inputs are, and rows only ever see context from their own
layer group.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .drawing import group_by_layer

POOL_MODES = ("mean", "max", "attn", "concat")
FUSION_MODES = ("concat", "sum")


class LayerFeatureEnhance(nn.Module):
    def __init__(self, dim: int, hidden_dim: int = 256, pool_mode: str = "concat",
                 fusion: str = "concat"):
        super().__init__()
        if pool_mode not in POOL_MODES:
            raise ValueError(f"pool_mode must be one of {POOL_MODES}, got {pool_mode!r}")
        if fusion not in FUSION_MODES:
            raise ValueError(f"fusion must be one of {FUSION_MODES}, got {fusion!r}")
        self.dim = dim
        self.pool_mode = pool_mode
        self.fusion = fusion
        self.attn_score = nn.Linear(dim, 1)
        pooled = 3 * dim if pool_mode == "concat" else dim
        self.fc1 = nn.Linear(pooled, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, dim)
        self.fc3 = nn.Linear(2 * dim, dim) if fusion == "concat" else None

    def _pool(self, rows: torch.Tensor) -> torch.Tensor:
        parts = []
        if self.pool_mode in ("mean", "concat"):
            parts.append(rows.mean(dim=0))
        if self.pool_mode in ("max", "concat"):
            parts.append(rows.max(dim=0).values)
        if self.pool_mode in ("attn", "concat"):
            w = torch.softmax(self.attn_score(rows), dim=0)
            parts.append((w * rows).sum(dim=0))
        return torch.cat(parts) if len(parts) > 1 else parts[0]

    def forward(self, feats: torch.Tensor, layer_ids: np.ndarray) -> torch.Tensor:
        if feats.shape[0] != len(layer_ids):
            raise ValueError("features and layer ids must align")
        if feats.shape[0] == 0:
            return feats
        out = torch.zeros_like(feats)
        for _, idx in group_by_layer(np.asarray(layer_ids)).items():
            rows = feats[torch.as_tensor(idx, dtype=torch.long, device=feats.device)]
            ctx = self.fc2(torch.relu(self.fc1(self._pool(rows))))
            if self.fusion == "concat":
                fused = self.fc3(torch.cat([rows, ctx.expand_as(rows)], dim=-1))
            else:
                fused = rows + ctx
            out[torch.as_tensor(idx, dtype=torch.long, device=feats.device)] = fused
        return out
