"""Training-time center queries.

For each GT symbol a query is planted near the symbol's center: its content
row is a class embedding of the GT label and its positional row encodes a
perturbed center

    c ~ Normal(center, diag((eps*w)^2, (eps*h)^2)),  clipped to [0,1]^2

with (w, h) the symbol's normalized extent. These rows carry a fixed GT
assignment (no matching) and exist only during training; inference uses the
learnable queries alone. The normal draw happens for every object even when
eps == 0 (where it degenerates to the exact center), so rng consumption does
not depend on eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .targets import GtObject


@dataclass(frozen=True)
class CenterQuerySet:
    """Sampled center queries: row i guides GT object ``gt_indices[i]``."""

    gt_indices: np.ndarray  # [Oc] into the drawing's GT object list
    labels: np.ndarray  # [Oc]
    centers: np.ndarray  # [Oc, 2], clipped to the unit square

    def __len__(self) -> int:
        return len(self.gt_indices)


def sample_center_queries(
    objects: list[GtObject],
    epsilon: float,
    rng: np.random.Generator,
    max_queries: int = 0,
) -> CenterQuerySet | None:
    """Draw one center query per GT object (None when there are no objects).

    ``max_queries`` > 0 caps the set with a uniform subsample; 0 means one
    query per object.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if not objects:
        return None
    picked = np.arange(len(objects), dtype=np.int64)
    if 0 < max_queries < len(objects):
        picked = np.sort(rng.choice(len(objects), size=max_queries, replace=False))

    centers = np.array([objects[i].center for i in picked], dtype=np.float64)
    extents = np.array([objects[i].extent for i in picked], dtype=np.float64)
    noise = rng.standard_normal(centers.shape)
    sampled = np.clip(centers + epsilon * extents * noise, 0.0, 1.0)
    return CenterQuerySet(
        gt_indices=picked,
        labels=np.array([objects[i].label for i in picked], dtype=np.int64),
        centers=sampled,
    )
