"""Masked-attention query decoder over the point feature pyramid.

Queries are refined through L layers of (masked cross-attention over one
pyramid level, self-attention, FFN) with pre-norm residual blocks:

    X_l = X_{l-1} + Attn(A_{l-1} + Q K^T / sqrt(d)) V

where the additive bias A is 0 at points whose previous mask sigmoid clears
``tau_mask`` and -inf elsewhere (a query whose mask keeps nothing is rescued
by resetting its row to attend everywhere). Coarse levels are visited
round-robin from coarsest to second-finest. Shared prediction heads read
every layer's queries (plus the pre-decoder queries), so there are L+1
prediction sets; mask logits are inner products with the finest-level mask
features.

Query rows come in two blocks that never mix on the learnable side: learnable
queries attend only to themselves in self-attention, while training-time
center-query rows (see ``center_queries``) attend to both blocks. The blocks
run through every op as separate tensors, so the learnable forward pass is
the same computation with or without center rows.

The attention output projection carries no bias: zeroing the value projection
makes every attention block an exact identity (used by the fixed-point
regression tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


class _Attention(nn.Module):
    """Multi-head attention with an optional additive bias on the logits."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self.scale = self.head_dim ** -0.5
        self.proj_q = nn.Linear(dim, dim)
        self.proj_k = nn.Linear(dim, dim)
        self.proj_v = nn.Linear(dim, dim)
        self.proj_out = nn.Linear(dim, dim, bias=False)
        self.record = False
        self.last_attention: torch.Tensor | None = None

    def forward(self, q_in: torch.Tensor, k_in: torch.Tensor, v_in: torch.Tensor,
                bias: torch.Tensor | None = None) -> torch.Tensor:
        nq, nk = q_in.shape[0], k_in.shape[0]
        q = self.proj_q(q_in).reshape(nq, self.heads, self.head_dim).permute(1, 0, 2)
        k = self.proj_k(k_in).reshape(nk, self.heads, self.head_dim).permute(1, 0, 2)
        v = self.proj_v(v_in).reshape(nk, self.heads, self.head_dim).permute(1, 0, 2)
        logits = (q @ k.transpose(-1, -2)) * self.scale
        if bias is not None:
            logits = logits + bias
        attn = torch.softmax(logits, dim=-1)
        if self.record:
            self.last_attention = attn.detach()
        out = (attn @ v).permute(1, 0, 2).reshape(nq, self.heads * self.head_dim)
        return self.proj_out(out)


class _FFN(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(dim, hidden), nn.ReLU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class DecoderLayer(nn.Module):
    """One refinement step over both query blocks."""

    def __init__(self, dim: int, heads: int, ffn_dim: int):
        super().__init__()
        self.cross = _Attention(dim, heads)
        self.self_attn = _Attention(dim, heads)
        self.ffn = _FFN(dim, ffn_dim)
        self.norm_cross = nn.LayerNorm(dim)
        self.norm_self = nn.LayerNorm(dim)
        self.norm_ffn = nn.LayerNorm(dim)

    def forward(
        self,
        x_learn: torch.Tensor,
        pos_learn: torch.Tensor,
        memory: torch.Tensor,
        memory_pos: torch.Tensor,
        bias_learn: torch.Tensor,
        x_center: torch.Tensor | None = None,
        pos_center: torch.Tensor | None = None,
        bias_center: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        keys = memory + memory_pos
        q = self.norm_cross(x_learn)
        x_learn = x_learn + self.cross(q + pos_learn, keys, memory, bias_learn)
        if x_center is not None:
            qc = self.norm_cross(x_center)
            x_center = x_center + self.cross(qc + pos_center, keys, memory, bias_center)

        s = self.norm_self(x_learn)
        x_learn = x_learn + self.self_attn(s + pos_learn, s + pos_learn, s)
        if x_center is not None:
            # Center rows see both blocks; learnable rows never see center rows.
            sc = self.norm_self(x_center)
            all_keys = torch.cat([s + pos_learn, sc + pos_center])
            all_vals = torch.cat([s, sc])
            x_center = x_center + self.self_attn(sc + pos_center, all_keys, all_vals)

        x_learn = x_learn + self.ffn(self.norm_ffn(x_learn))
        if x_center is not None:
            x_center = x_center + self.ffn(self.norm_ffn(x_center))
        return x_learn, x_center


class PredictionHeads(nn.Module):
    """Shared classification and mask heads applied after every layer."""

    def __init__(self, dim: int, num_classes: int):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.class_head = nn.Linear(dim, num_classes + 1)
        self.mask_head = nn.Sequential(nn.Linear(dim, dim), nn.ReLU(), nn.Linear(dim, dim))

    def forward(self, x: torch.Tensor, mask_features: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.norm(x)
        return self.class_head(h), self.mask_head(h) @ mask_features.T


@dataclass
class MemoryLevel:
    """One pyramid level as decoder memory."""

    features: torch.Tensor  # [M, D]
    pos_encoding: torch.Tensor  # [M, D]
    indices: np.ndarray  # [M] rows into the full sample set


@dataclass
class DecoderOutput:
    """Prediction sets (class logits [*, C+1], mask logits [*, N]), first set
    pre-decoder, then one per layer; ``center`` is None without center rows."""

    learn: list[tuple[torch.Tensor, torch.Tensor]]
    center: list[tuple[torch.Tensor, torch.Tensor]] | None

    @property
    def final(self) -> tuple[torch.Tensor, torch.Tensor]:
        return self.learn[-1]


def attention_bias(mask_logits: torch.Tensor, indices: np.ndarray,
                   tau: float) -> torch.Tensor:
    """0 where the previous mask keeps a point, -inf elsewhere (row-rescued)."""
    with torch.no_grad():
        idx = torch.as_tensor(indices, dtype=torch.long, device=mask_logits.device)
        keep = torch.sigmoid(mask_logits[:, idx]) >= tau
        keep[keep.sum(dim=-1) == 0] = True  # starved query: attend everywhere
        bias = torch.zeros(keep.shape, dtype=mask_logits.dtype, device=mask_logits.device)
        bias[~keep] = float("-inf")
    return bias


class QueryDecoder(nn.Module):
    def __init__(self, dim: int, num_classes: int, layers: int = 6, heads: int = 8,
                 ffn_dim: int = 0, num_queries: int = 100, tau_mask: float = 0.5):
        super().__init__()
        if num_queries < 1:
            raise ValueError("need at least one learnable query")
        self.dim = dim
        self.num_queries = num_queries
        self.tau_mask = tau_mask
        self.query_feat = nn.Embedding(num_queries, dim)
        self.query_pos = nn.Embedding(num_queries, dim)
        ffn_dim = ffn_dim if ffn_dim > 0 else 4 * dim
        self.layers = nn.ModuleList(
            DecoderLayer(dim, heads, ffn_dim) for _ in range(layers)
        )
        self.heads = PredictionHeads(dim, num_classes)

    def set_record_attention(self, record: bool) -> None:
        for layer in self.layers:
            layer.cross.record = record
            layer.self_attn.record = record

    def forward(
        self,
        memory: list[MemoryLevel],
        mask_features: torch.Tensor,
        center_content: torch.Tensor | None = None,
        center_pos: torch.Tensor | None = None,
    ) -> DecoderOutput:
        """Run all layers; ``memory`` is ordered coarsest -> second-finest."""
        if not memory:
            raise ValueError("decoder needs at least one memory level")
        if (center_content is None) != (center_pos is None):
            raise ValueError("center content and positions must come together")

        x = self.query_feat.weight
        pos = self.query_pos.weight
        xc, posc = center_content, center_pos

        learn_sets: list[tuple[torch.Tensor, torch.Tensor]] = []
        center_sets: list[tuple[torch.Tensor, torch.Tensor]] | None = (
            [] if xc is not None else None
        )

        cls_l, msk_l = self.heads(x, mask_features)
        learn_sets.append((cls_l, msk_l))
        if xc is not None:
            cls_c, msk_c = self.heads(xc, mask_features)
            center_sets.append((cls_c, msk_c))

        for i, layer in enumerate(self.layers):
            level = memory[i % len(memory)]
            bias_l = attention_bias(msk_l, level.indices, self.tau_mask)
            bias_c = (
                attention_bias(msk_c, level.indices, self.tau_mask)
                if xc is not None
                else None
            )
            x, xc = layer(
                x, pos, level.features, level.pos_encoding, bias_l,
                x_center=xc, pos_center=posc, bias_center=bias_c,
            )
            cls_l, msk_l = self.heads(x, mask_features)
            learn_sets.append((cls_l, msk_l))
            if xc is not None:
                cls_c, msk_c = self.heads(xc, mask_features)
                center_sets.append((cls_c, msk_c))

        return DecoderOutput(learn=learn_sets, center=center_sets)
