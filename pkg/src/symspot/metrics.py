"""Arc-length-aware spotting metrics.

Every metric weights primitives by arc length rather than counting pixels:
the default weight of primitive i is ``log(1 + L_i)`` (raw length available
via ``weight="raw"``). Matching for panoptic quality requires equal labels and
weighted IoU strictly above the threshold; with a threshold >= 0.5 the match
is provably unique.

Instance ids follow the drawing convention: stuff symbols carry -1, things a
non-negative id. A prediction-side label equal to ``num_classes`` means
"unassigned" (background) and never forms a symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .drawing import STUFF_INSTANCE, Drawing

WEIGHT_LOG = "log"
WEIGHT_RAW = "raw"


def primitive_weights(lengths: np.ndarray, weight: str = WEIGHT_LOG) -> np.ndarray:
    """Per-primitive metric weights from raw arc lengths."""
    lengths = np.asarray(lengths, dtype=np.float64)
    if np.any(lengths <= 0) or not np.all(np.isfinite(lengths)):
        raise ValueError("arc lengths must be positive and finite")
    if weight == WEIGHT_LOG:
        return np.log1p(lengths)
    if weight == WEIGHT_RAW:
        return lengths.copy()
    raise ValueError(f"unknown weight mode {weight!r}")


@dataclass(frozen=True)
class SymbolMask:
    """One spotted symbol: a label, an instance id and its member primitives."""

    label: int
    instance_id: int
    members: tuple[int, ...]
    score: float = 1.0

    def __post_init__(self) -> None:
        if len(self.members) == 0:
            raise ValueError("symbol mask has no members")
        if len(set(self.members)) != len(self.members):
            raise ValueError("symbol mask has duplicate members")
        if self.label < 0:
            raise ValueError("symbol label must be >= 0")
        object.__setattr__(self, "members", tuple(sorted(self.members)))

    @property
    def key(self) -> tuple[int, int]:
        return (self.label, self.instance_id)


def arc_iou(pred: SymbolMask | Iterable[int], gt: SymbolMask | Iterable[int],
            lengths: np.ndarray) -> float:
    """Arc-length-weighted IoU: sum of log(1+L) over the intersection / union."""
    w = primitive_weights(lengths, WEIGHT_LOG)
    a = set(pred.members if isinstance(pred, SymbolMask) else pred)
    b = set(gt.members if isinstance(gt, SymbolMask) else gt)
    union = a | b
    if not union:
        raise ValueError("arc_iou of two empty masks")
    inter = a & b
    if not inter:
        return 0.0
    return float(w[sorted(inter)].sum() / w[sorted(union)].sum())


def masks_from_assignment(labels: np.ndarray, instances: np.ndarray,
                          num_classes: int,
                          scores: np.ndarray | None = None) -> list[SymbolMask]:
    """Group per-primitive (label, instance) pairs into symbol masks.

    Rows labeled ``num_classes`` are background and dropped. The score of a
    symbol is the max member score (1.0 without scores).
    """
    labels = np.asarray(labels)
    instances = np.asarray(instances)
    groups: dict[tuple[int, int], list[int]] = {}
    for i, (l, z) in enumerate(zip(labels, instances)):
        if l == num_classes:
            continue
        if l < 0 or l > num_classes:
            raise ValueError(f"primitive {i}: label {l} outside [0, {num_classes}]")
        groups.setdefault((int(l), int(z)), []).append(i)
    out = []
    for (l, z) in sorted(groups):
        idx = groups[(l, z)]
        s = 1.0 if scores is None else float(np.max(np.asarray(scores)[idx]))
        out.append(SymbolMask(label=l, instance_id=z, members=tuple(idx), score=s))
    return out


def gt_symbol_masks(drawing: Drawing) -> list[SymbolMask]:
    return masks_from_assignment(
        drawing.semantics(), drawing.instances(), drawing.num_classes
    )


def _check_unique(masks: Sequence[SymbolMask], side: str, drawing: int) -> None:
    keys = [m.key for m in masks]
    if len(set(keys)) != len(keys):
        dupes = sorted({k for k in keys if keys.count(k) > 1})
        raise ValueError(f"drawing {drawing}: duplicate {side} symbols {dupes}")


@dataclass
class ClassPQ:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    iou_sum: float = 0.0

    @property
    def participates(self) -> bool:
        return (self.tp + self.fp + self.fn) > 0

    @property
    def sq(self) -> float:
        return self.iou_sum / self.tp if self.tp else 0.0

    @property
    def rq(self) -> float:
        denom = self.tp + 0.5 * self.fp + 0.5 * self.fn
        return self.tp / denom if denom else 0.0

    @property
    def pq(self) -> float:
        return self.sq * self.rq


@dataclass(frozen=True)
class PQAggregate:
    pq: float
    sq: float
    rq: float
    classes: int


@dataclass
class PQReport:
    per_class: dict[int, ClassPQ]
    total: PQAggregate
    things: PQAggregate
    stuff: PQAggregate


def _aggregate(stats: Iterable[ClassPQ]) -> PQAggregate:
    rows = [s for s in stats if s.participates]
    if not rows:
        return PQAggregate(pq=0.0, sq=0.0, rq=0.0, classes=0)
    return PQAggregate(
        pq=float(np.mean([s.pq for s in rows])),
        sq=float(np.mean([s.sq for s in rows])),
        rq=float(np.mean([s.rq for s in rows])),
        classes=len(rows),
    )


def panoptic_quality(
    preds: Sequence[Sequence[SymbolMask]],
    gts: Sequence[Sequence[SymbolMask]],
    lengths: Sequence[np.ndarray],
    things: Iterable[int],
    num_classes: int,
    match_threshold: float = 0.5,
) -> PQReport:
    """Arc-length panoptic quality, per class then averaged.

    ``preds[k]``/``gts[k]``/``lengths[k]`` describe drawing k. A prediction
    matches a GT symbol when labels agree and weighted IoU is strictly above
    ``match_threshold`` (>= 0.5 so matches are unique). Classes enter the
    per-class averages only when they have any TP/FP/FN. Empty corpus
    aggregates are 0 by convention.
    """
    if not (0.5 <= match_threshold < 1.0):
        raise ValueError("match_threshold must be in [0.5, 1) for unique matching")
    if not (len(preds) == len(gts) == len(lengths)):
        raise ValueError("preds, gts and lengths must align per drawing")
    things = frozenset(things)
    stats: dict[int, ClassPQ] = {c: ClassPQ() for c in range(num_classes)}

    for k, (p_masks, g_masks, lens) in enumerate(zip(preds, gts, lengths)):
        _check_unique(p_masks, "predicted", k)
        _check_unique(g_masks, "ground-truth", k)
        matched_g: set[int] = set()
        for pm in p_masks:
            hit = None
            for gi, gm in enumerate(g_masks):
                if gm.label != pm.label:
                    continue
                iou = arc_iou(pm, gm, lens)
                if iou > match_threshold:
                    if hit is not None:
                        raise AssertionError("non-unique match above threshold 0.5")
                    hit = (gi, iou)
            if hit is None:
                stats[pm.label].fp += 1
            else:
                gi, iou = hit
                matched_g.add(gi)
                stats[pm.label].tp += 1
                stats[pm.label].iou_sum += iou
        for gi, gm in enumerate(g_masks):
            if gi not in matched_g:
                stats[gm.label].fn += 1

    return PQReport(
        per_class=stats,
        total=_aggregate(stats.values()),
        things=_aggregate(s for c, s in stats.items() if c in things),
        stuff=_aggregate(s for c, s in stats.items() if c not in things),
    )


@dataclass(frozen=True)
class SemanticScores:
    f1: float
    weighted_f1: float
    precision: float
    recall: float
    weighted_precision: float
    weighted_recall: float


def semantic_scores(
    pred_labels: np.ndarray,
    gt_labels: np.ndarray,
    lengths: np.ndarray,
    num_classes: int,
    weight: str = WEIGHT_LOG,
) -> SemanticScores:
    """Micro F1 over primitive labels, plain and arc-length weighted.

    Label ``num_classes`` on either side means background/unassigned; such
    rows count against precision (pred side) or recall (gt side) only.
    """
    pred = np.asarray(pred_labels)
    gt = np.asarray(gt_labels)
    if pred.shape != gt.shape:
        raise ValueError("pred and gt label arrays must align")
    w = primitive_weights(lengths, weight)
    ones = np.ones_like(w)

    def _prf(weights: np.ndarray) -> tuple[float, float, float]:
        hit = (pred == gt) & (gt < num_classes)
        tp = weights[hit].sum()
        p_total = weights[pred < num_classes].sum()
        g_total = weights[gt < num_classes].sum()
        precision = tp / p_total if p_total > 0 else 0.0
        recall = tp / g_total if g_total > 0 else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return float(precision), float(recall), float(f1)

    p, r, f1 = _prf(ones)
    wp, wr, wf1 = _prf(w)
    return SemanticScores(
        f1=f1, weighted_f1=wf1, precision=p, recall=r,
        weighted_precision=wp, weighted_recall=wr,
    )


def mean_iou(
    pred_labels: np.ndarray,
    gt_labels: np.ndarray,
    lengths: np.ndarray,
    num_classes: int,
    weight: str = WEIGHT_LOG,
) -> float:
    """Arc-length-weighted Jaccard per class, averaged over classes present."""
    pred = np.asarray(pred_labels)
    gt = np.asarray(gt_labels)
    w = primitive_weights(lengths, weight)
    ious = []
    for c in range(num_classes):
        union = w[(pred == c) | (gt == c)].sum()
        if union <= 0:
            continue
        inter = w[(pred == c) & (gt == c)].sum()
        ious.append(inter / union)
    return float(np.mean(ious)) if ious else 0.0


def symbol_box(mask: SymbolMask, boxes: np.ndarray) -> np.ndarray:
    """Axis-aligned hull of the member primitives' boxes."""
    member = boxes[list(mask.members)]
    return np.array(
        [member[:, 0].min(), member[:, 1].min(), member[:, 2].max(), member[:, 3].max()]
    )


def box_iou(a: np.ndarray, b: np.ndarray) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return float(inter / union) if union > 0 else 0.0


BOX_AP_THRESHOLDS = tuple(np.round(np.linspace(0.5, 0.95, 10), 2))
_RECALL_LEVELS = np.linspace(0.0, 1.0, 101)


def _average_precision(scores: list[float], is_tp: list[bool], num_gt: int) -> float:
    if num_gt == 0:
        raise ValueError("AP undefined without GT instances")
    if not scores:
        return 0.0
    order = np.argsort(-np.asarray(scores), kind="stable")
    tp = np.asarray(is_tp)[order]
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(~tp)
    recall = tp_cum / num_gt
    precision = tp_cum / (tp_cum + fp_cum)
    ap = 0.0
    for r in _RECALL_LEVELS:
        mask = recall >= r
        ap += precision[mask].max() if mask.any() else 0.0
    return float(ap / len(_RECALL_LEVELS))


@dataclass(frozen=True)
class BoxApReport:
    map: float
    ap50: float
    ap75: float
    per_threshold: dict[float, float] = field(default_factory=dict)


def instance_box_ap(
    preds: Sequence[Sequence[SymbolMask]],
    gts: Sequence[Sequence[SymbolMask]],
    boxes: Sequence[np.ndarray],
    things: Iterable[int],
) -> BoxApReport:
    """Box-level AP over thing classes (101-point interpolation, COCO grid).

    Boxes are axis-aligned hulls of member primitive geometry; matching is
    greedy in descending score order at IoU >= threshold. Classes participate
    when they have at least one GT instance anywhere in the corpus.
    """
    things = frozenset(things)
    # Collected per class: GT boxes per drawing, prediction (score, drawing, box).
    gt_by_class: dict[int, dict[int, list[np.ndarray]]] = {}
    pred_by_class: dict[int, list[tuple[float, int, np.ndarray]]] = {}
    for k, (p_masks, g_masks, bx) in enumerate(zip(preds, gts, boxes)):
        for gm in g_masks:
            if gm.label in things:
                gt_by_class.setdefault(gm.label, {}).setdefault(k, []).append(
                    symbol_box(gm, bx)
                )
        for pm in p_masks:
            if pm.label in things:
                pred_by_class.setdefault(pm.label, []).append(
                    (pm.score, k, symbol_box(pm, bx))
                )

    participating = sorted(gt_by_class)
    per_threshold: dict[float, float] = {}
    ap50 = ap75 = 0.0
    for t in BOX_AP_THRESHOLDS:
        aps = []
        for c in participating:
            entries = pred_by_class.get(c, [])
            order = sorted(range(len(entries)), key=lambda i: (-entries[i][0], i))
            used: dict[int, set[int]] = {}
            scores, is_tp = [], []
            num_gt = sum(len(v) for v in gt_by_class[c].values())
            for i in order:
                score, k, box = entries[i]
                cand = gt_by_class[c].get(k, [])
                best, best_iou = None, 0.0
                for gi, gbox in enumerate(cand):
                    if gi in used.setdefault(k, set()):
                        continue
                    iou = box_iou(box, gbox)
                    if iou >= t and iou > best_iou:
                        best, best_iou = gi, iou
                if best is not None:
                    used[k].add(best)
                    is_tp.append(True)
                else:
                    is_tp.append(False)
                scores.append(score)
            aps.append(_average_precision(scores, is_tp, num_gt))
        ap_t = float(np.mean(aps)) if aps else 0.0
        per_threshold[float(t)] = ap_t
        if abs(t - 0.5) < 1e-9:
            ap50 = ap_t
        if abs(t - 0.75) < 1e-9:
            ap75 = ap_t
    mean_ap = float(np.mean(list(per_threshold.values()))) if per_threshold else 0.0
    return BoxApReport(map=mean_ap, ap50=ap50, ap75=ap75, per_threshold=per_threshold)


def mask_recall(
    pred_members: Sequence[Iterable[int]],
    gt_masks: Sequence[SymbolMask],
    lengths: np.ndarray,
    threshold: float = 0.5,
) -> float:
    """Class-agnostic fraction of GT symbols covered by some predicted mask.

    Training diagnostic: a GT symbol counts as covered when any candidate
    member set reaches arc IoU above ``threshold``.
    """
    if not gt_masks:
        return 1.0
    pred_sets = [set(p) for p in pred_members]
    covered = 0
    for gm in gt_masks:
        for p in pred_sets:
            if p and arc_iou(p, gm, lengths) > threshold:
                covered += 1
                break
    return covered / len(gt_masks)


@dataclass
class SpottingReport:
    """Evaluation bundle: panoptic, semantic, segmentation and detection views."""

    pq: PQReport
    semantic: SemanticScores
    miou: float
    box_ap: BoxApReport
    class_names: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pq": {
                "total": vars(self.pq.total).copy(),
                "things": vars(self.pq.things).copy(),
                "stuff": vars(self.pq.stuff).copy(),
                "per_class": {
                    str(c): {
                        "pq": s.pq, "sq": s.sq, "rq": s.rq,
                        "tp": s.tp, "fp": s.fp, "fn": s.fn,
                    }
                    for c, s in self.pq.per_class.items()
                    if s.participates
                },
            },
            "f1": self.semantic.f1,
            "weighted_f1": self.semantic.weighted_f1,
            "miou": self.miou,
            "ap": {"map": self.box_ap.map, "ap50": self.box_ap.ap50, "ap75": self.box_ap.ap75},
        }

    def format_table(self) -> str:
        rows = [f"{'class':<12} {'PQ':>7} {'SQ':>7} {'RQ':>7} {'TP':>4} {'FP':>4} {'FN':>4}"]
        for c, s in sorted(self.pq.per_class.items()):
            if not s.participates:
                continue
            name = self.class_names.get(c, str(c))
            rows.append(
                f"{name:<12} {s.pq:7.4f} {s.sq:7.4f} {s.rq:7.4f} {s.tp:4d} {s.fp:4d} {s.fn:4d}"
            )
        for label, agg in (("TOTAL", self.pq.total), ("things", self.pq.things),
                           ("stuff", self.pq.stuff)):
            rows.append(
                f"{label:<12} {agg.pq:7.4f} {agg.sq:7.4f} {agg.rq:7.4f}"
                f"   ({agg.classes} classes)"
            )
        rows.append(
            f"F1 {self.semantic.f1:.4f}  wF1 {self.semantic.weighted_f1:.4f}  "
            f"mIoU {self.miou:.4f}  mAP {self.box_ap.map:.4f}  "
            f"AP50 {self.box_ap.ap50:.4f}  AP75 {self.box_ap.ap75:.4f}"
        )
        return "\n".join(rows)
