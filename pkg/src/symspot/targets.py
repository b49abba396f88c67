"""Ground-truth objects: the per-drawing targets the decoder is trained on.

A GT object is one symbol: either a thing instance (unique ``(label,
instance)``) or the union of all stuff primitives of one class. Centers and
extents are normalized by the drawing size; the extent is the axis-aligned
hull of the member primitives' geometry, the center is that hull's center for
things and the member-midpoint centroid for stuff (stuff often rings the
drawing, so the hull center would sit in empty space).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drawing import STUFF_INSTANCE, Drawing


@dataclass(frozen=True)
class GtObject:
    label: int
    instance_id: int  # STUFF_INSTANCE for stuff objects
    is_thing: bool
    member_indices: tuple[int, ...]
    center: tuple[float, float]  # normalized [0,1]^2
    extent: tuple[float, float]  # normalized (w, h) of the member hull

    @property
    def size(self) -> int:
        return len(self.member_indices)


def extract_gt_objects(drawing: Drawing) -> list[GtObject]:
    """Group primitives into GT symbols, ordered by (label, instance)."""
    semantics = drawing.semantics()
    instances = drawing.instances()
    boxes = drawing.primitive_boxes()
    pos = drawing.normalized_positions()
    scale = np.array([drawing.width, drawing.height], dtype=np.float64)

    groups: dict[tuple[int, int], list[int]] = {}
    for i, (l, z) in enumerate(zip(semantics, instances)):
        groups.setdefault((int(l), int(z)), []).append(i)

    things = drawing.thing_ids()
    objects = []
    for (label, inst) in sorted(groups):
        idx = groups[(label, inst)]
        hull = np.array(
            [
                boxes[idx, 0].min(),
                boxes[idx, 1].min(),
                boxes[idx, 2].max(),
                boxes[idx, 3].max(),
            ]
        )
        lo, hi = hull[:2] / scale, hull[2:] / scale
        if label in things:
            center = 0.5 * (lo + hi)
        else:
            center = pos[idx].mean(axis=0)
        objects.append(
            GtObject(
                label=label,
                instance_id=inst,
                is_thing=label in things,
                member_indices=tuple(idx),
                center=(float(center[0]), float(center[1])),
                extent=(float(hi[0] - lo[0]), float(hi[1] - lo[1])),
            )
        )
    return objects


def gt_mask_matrix(objects: list[GtObject], num_samples: int) -> np.ndarray:
    """Boolean membership matrix [G, N]; rows partition the sample set."""
    masks = np.zeros((len(objects), num_samples), dtype=bool)
    for g, obj in enumerate(objects):
        masks[g, list(obj.member_indices)] = True
    return masks
