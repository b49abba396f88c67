"""End-to-end spotting model: backbone -> layer fusion -> query decoder.

The forward pass consumes one drawing (point positions normalized by the
drawing extent) and yields prediction sets for the learnable queries and,
during training with center guidance, for the center-query rows. Panoptic
inference assigns every primitive a (label, instance) pair; primitives no
kept query claims get the background label ``num_classes``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .backbone import FeaturePyramid, PointEncoder
from .center_queries import CenterQuerySet
from .config import ModelConfig
from .decoder import DecoderOutput, MemoryLevel, QueryDecoder
from .drawing import FEATURE_DIM, STUFF_INSTANCE, Drawing
from .encoding import PositionEncoder
from .lfe import LayerFeatureEnhance


@dataclass
class ModelOutput:
    decoder: DecoderOutput
    pyramid: FeaturePyramid
    mask_features: torch.Tensor

    @property
    def learn_sets(self) -> list[tuple[torch.Tensor, torch.Tensor]]:
        return self.decoder.learn

    @property
    def center_sets(self) -> list[tuple[torch.Tensor, torch.Tensor]] | None:
        return self.decoder.center

    @property
    def final(self) -> tuple[torch.Tensor, torch.Tensor]:
        return self.decoder.final


class SpottingModel(nn.Module):
    def __init__(self, config: ModelConfig, num_classes: int, things: frozenset[int]):
        super().__init__()
        if num_classes < 1:
            raise ValueError("need at least one class")
        self.config = config
        self.num_classes = num_classes
        self.things = frozenset(things)
        dim = config.backbone.dim

        self.backbone = PointEncoder(
            feature_dim=FEATURE_DIM,
            dim=dim,
            levels=config.backbone.levels,
            k=config.backbone.knn,
            ratio=config.backbone.ratio,
        )
        self.lfe = (
            LayerFeatureEnhance(
                dim=dim,
                hidden_dim=config.lfe.hidden_dim,
                pool_mode=config.lfe.pool_mode,
                fusion=config.lfe.fusion,
            )
            if config.lfe.enabled
            else None
        )
        self.decoder = QueryDecoder(
            dim=dim,
            num_classes=num_classes,
            layers=config.decoder.layers,
            heads=config.decoder.heads,
            ffn_dim=config.decoder.ffn_dim,
            num_queries=config.decoder.num_queries,
            tau_mask=config.decoder.tau_mask,
        )
        self.pos_encoder = PositionEncoder(
            dim=dim,
            mode=config.pgt.encoding,
            fourier_scale=config.pgt.fourier_scale,
        )
        self.class_embed = nn.Embedding(num_classes, dim)

    def _prepare(self, drawing: Drawing) -> tuple[torch.Tensor, torch.Tensor, np.ndarray]:
        if len(drawing) == 0:
            raise ValueError(f"drawing {drawing.id}: empty point set")
        dtype = self.class_embed.weight.dtype
        pos = torch.as_tensor(drawing.normalized_positions(), dtype=dtype)
        feats = torch.as_tensor(drawing.features(), dtype=dtype)
        return pos, feats, drawing.layer_ids()

    def _enhance(self, pyramid: FeaturePyramid, layer_ids: np.ndarray) -> list[torch.Tensor]:
        """Per-level features after layer fusion (finest always, rest per config)."""
        out = []
        for i, level in enumerate(pyramid.levels):
            if self.lfe is not None and (i == 0 or self.config.lfe.multi_scale):
                out.append(self.lfe(level.features, layer_ids[level.indices]))
            else:
                out.append(level.features)
        return out

    def forward(self, drawing: Drawing, centers: CenterQuerySet | None = None) -> ModelOutput:
        pos, feats, layer_ids = self._prepare(drawing)
        pyramid = self.backbone(pos, feats)
        enhanced = self._enhance(pyramid, layer_ids)
        mask_features = enhanced[0]

        memory = [
            MemoryLevel(
                features=enhanced[i],
                pos_encoding=self.pos_encoder(pyramid.levels[i].positions),
                indices=pyramid.levels[i].indices,
            )
            for i in range(len(pyramid.levels) - 1, 0, -1)
        ]

        center_content = center_pos = None
        if centers is not None and len(centers) > 0:
            dtype = self.class_embed.weight.dtype
            center_content = self.class_embed(torch.as_tensor(centers.labels))
            center_pos = self.pos_encoder(torch.as_tensor(centers.centers, dtype=dtype))

        decoded = self.decoder(
            memory, mask_features,
            center_content=center_content, center_pos=center_pos,
        )
        return ModelOutput(decoder=decoded, pyramid=pyramid, mask_features=mask_features)


@dataclass
class PanopticAssignment:
    """Per-primitive decisions plus per-primitive confidence of the owning query."""

    labels: np.ndarray  # [N]; num_classes = background
    instances: np.ndarray  # [N]; STUFF_INSTANCE for stuff/background rows
    scores: np.ndarray  # [N] owning-query class probability (0 for background)


@torch.no_grad()
def panoptic_inference(
    class_logits: torch.Tensor,
    mask_logits: torch.Tensor,
    num_classes: int,
    things: frozenset[int],
    tau_cls: float = 0.5,
    tau_mask: float = 0.5,
) -> PanopticAssignment:
    """Resolve query predictions into one (label, instance) per primitive.

    A query survives when its argmax class is real (not no-object) with
    probability >= tau_cls. Each primitive goes to the surviving query
    maximizing class_prob * mask_sigmoid among those whose sigmoid clears
    tau_mask; ties pick the lowest query index. Surviving thing queries mint
    fresh instance ids in query order; stuff predictions of one class merge.
    """
    probs = torch.softmax(class_logits, dim=-1)
    best_p, best_c = probs.max(dim=-1)
    kept = (best_c != num_classes) & (best_p >= tau_cls)

    n = mask_logits.shape[1]
    labels = np.full(n, num_classes, dtype=np.int64)
    instances = np.full(n, STUFF_INSTANCE, dtype=np.int64)
    scores = np.zeros(n, dtype=np.float64)
    if kept.sum() == 0:
        return PanopticAssignment(labels, instances, scores)

    kept_idx = torch.nonzero(kept, as_tuple=False).flatten()
    sig = torch.sigmoid(mask_logits[kept_idx])
    score = best_p[kept_idx, None] * sig
    eligible = sig > tau_mask
    score = torch.where(eligible, score, torch.zeros_like(score))

    owner_row = score.argmax(dim=0)  # first max wins: lowest kept query
    has_owner = eligible.any(dim=0)

    owner_np = owner_row.cpu().numpy()
    has_owner_np = has_owner.cpu().numpy()
    owner_query = np.where(has_owner_np, kept_idx.cpu().numpy()[owner_np], -1)

    # Thing queries owning at least one primitive mint ids in query order.
    instance_of_query: dict[int, int] = {}
    for q in sorted(set(owner_query[owner_query >= 0].tolist())):
        if int(best_c[q]) in things:
            instance_of_query[q] = len(instance_of_query)

    for k in range(n):
        q = int(owner_query[k])
        if q < 0:
            continue
        labels[k] = int(best_c[q])
        scores[k] = float(best_p[q])
        if q in instance_of_query:
            instances[k] = instance_of_query[q]
    return PanopticAssignment(labels=labels, instances=instances, scores=scores)
