import math

import numpy as np
import pytest

from symspot.metrics import (
    SymbolMask,
    arc_iou,
    box_iou,
    gt_symbol_masks,
    instance_box_ap,
    mask_recall,
    masks_from_assignment,
    mean_iou,
    panoptic_quality,
    primitive_weights,
    semantic_scores,
    symbol_box,
)
from symspot.synthetic import generate_synthetic

E = math.e


def test_primitive_weights_modes():
    lengths = np.array([E - 1, E**2 - 1])
    assert primitive_weights(lengths, "log") == pytest.approx([1.0, 2.0])
    assert primitive_weights(lengths, "raw") == pytest.approx(lengths)
    with pytest.raises(ValueError):
        primitive_weights(np.array([0.0]), "log")
    with pytest.raises(ValueError):
        primitive_weights(np.array([1.0]), "sqrt")


def test_arc_iou_frozen_case():
    # all lengths e-1 so every log-weight is exactly 1; |inter|=1, |union|=3
    lengths = np.full(3, E - 1)
    assert arc_iou({0, 1}, {1, 2}, lengths) == pytest.approx(1 / 3, abs=1e-12)


def test_arc_iou_weighted_case():
    # lengths with log1p weights 1, 2, 3: pred {0,1}, gt {1,2}
    lengths = np.array([E - 1, E**2 - 1, E**3 - 1])
    # intersection weight 2, union weight 6
    assert arc_iou({0, 1}, {1, 2}, lengths) == pytest.approx(2 / 6, abs=1e-12)
    assert arc_iou({0}, {2}, lengths) == 0.0
    assert arc_iou({0, 1, 2}, {0, 1, 2}, lengths) == 1.0


def test_arc_iou_bounds_random(rng):
    lengths = rng.uniform(0.1, 50, size=30)
    for _ in range(200):
        a = set(rng.choice(30, size=rng.integers(1, 20), replace=False).tolist())
        b = set(rng.choice(30, size=rng.integers(1, 20), replace=False).tolist())
        v = arc_iou(a, b, lengths)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(arc_iou(b, a, lengths))  # symmetric


def test_symbol_mask_validation():
    with pytest.raises(ValueError):
        SymbolMask(label=0, instance_id=0, members=())
    with pytest.raises(ValueError):
        SymbolMask(label=0, instance_id=0, members=(1, 1))
    m = SymbolMask(label=0, instance_id=0, members=(3, 1, 2))
    assert m.members == (1, 2, 3)


def _mask(label, inst, members):
    return SymbolMask(label=label, instance_id=inst, members=tuple(members))


def test_panoptic_quality_frozen_scenario():
    """Two classes; A: one TP at IoU 0.8 plus one FN; B: one perfect TP.

    Hand oracle: SQ_A=0.8, RQ_A=2/3, PQ_A=8/15; PQ_B=1; mean PQ=(8/15+1)/2.
    """
    # 10 primitives of length e-1 (unit weights): IoU = |inter|/|union|
    lengths = [np.full(10, E - 1)]
    # GT: A-instance {0..4}, A-instance {8,9}, B-stuff {5,6,7}
    gts = [[_mask(0, 0, range(5)), _mask(0, 1, (8, 9)), _mask(1, -1, (5, 6, 7))]]
    # Pred: A covers {0,1,2,3} of the first (IoU 4/5), B exact
    preds = [[_mask(0, 0, range(4)), _mask(1, -1, (5, 6, 7))]]
    rep = panoptic_quality(preds, gts, lengths, things={0}, num_classes=2)
    a, b = rep.per_class[0], rep.per_class[1]
    assert (a.tp, a.fp, a.fn) == (1, 0, 1)
    assert a.sq == pytest.approx(0.8, abs=1e-12)
    assert a.rq == pytest.approx(2 / 3, abs=1e-12)
    assert a.pq == pytest.approx(8 / 15, abs=1e-12)
    assert (b.tp, b.fp, b.fn) == (1, 0, 0)
    assert b.pq == 1.0
    assert rep.total.pq == pytest.approx((8 / 15 + 1) / 2, abs=1e-12)
    assert rep.things.pq == pytest.approx(8 / 15, abs=1e-12)
    assert rep.stuff.pq == 1.0


def test_pq_factorization_invariant(rng):
    """PQ == SQ * RQ for every class, exactly."""
    lengths = [rng.uniform(0.5, 20, size=40) for _ in range(3)]
    preds, gts = [], []
    for k in range(3):
        idx = rng.permutation(40)
        gts.append([
            _mask(0, 0, idx[:10]), _mask(0, 1, idx[10:14]),
            _mask(1, -1, idx[14:30]),
        ])
        preds.append([
            _mask(0, 0, idx[:9]), _mask(0, 2, idx[30:33]),
            _mask(1, -1, idx[14:29]),
        ])
    rep = panoptic_quality(preds, gts, lengths, things={0}, num_classes=2)
    for s in rep.per_class.values():
        assert s.pq == s.sq * s.rq


def test_pq_match_is_strictly_above_threshold():
    # IoU exactly 0.5 must NOT match
    lengths = [np.full(4, E - 1)]
    gts = [[_mask(0, 0, (0, 1))]]
    preds = [[_mask(0, 0, (0, 2))]]  # inter {0} w=1, union {0,1,2} w=3 -> 1/3
    rep = panoptic_quality(preds, gts, lengths, things={0}, num_classes=1)
    assert rep.per_class[0].tp == 0
    # IoU = 1/2 exactly: inter {0,1}, union {0,1,2,3}
    preds = [[_mask(0, 0, (0, 1, 2, 3))]]
    gts = [[_mask(0, 0, (0, 1))]]
    rep = panoptic_quality(preds, gts, lengths, things={0}, num_classes=1)
    assert rep.per_class[0].tp == 0 and rep.per_class[0].fp == 1


def test_pq_label_must_agree():
    lengths = [np.full(3, E - 1)]
    gts = [[_mask(0, 0, (0, 1, 2))]]
    preds = [[_mask(1, 0, (0, 1, 2))]]
    rep = panoptic_quality(preds, gts, lengths, things={0, 1}, num_classes=2)
    assert rep.per_class[0].fn == 1
    assert rep.per_class[1].fp == 1
    assert rep.total.pq == 0.0


def test_pq_empty_everything_is_zero():
    rep = panoptic_quality([[]], [[]], [np.array([1.0])], things={0}, num_classes=1)
    assert rep.total.pq == 0.0 and rep.total.sq == 0.0 and rep.total.rq == 0.0
    assert rep.total.classes == 0


def test_pq_perfect_prediction_is_one(rng):
    for seed in range(3):
        d = generate_synthetic(seed)
        gt = gt_symbol_masks(d)
        rep = panoptic_quality([gt], [gt], [d.lengths()], things=d.thing_ids(),
                               num_classes=d.num_classes)
        assert rep.total.pq == pytest.approx(1.0, abs=1e-12)
        assert rep.things.pq == 1.0 and rep.stuff.pq == 1.0


def test_pq_duplicate_symbols_rejected():
    lengths = [np.full(2, E - 1)]
    dup = [_mask(0, 0, (0,)), _mask(0, 0, (1,))]
    ok = [_mask(0, 0, (0, 1))]
    with pytest.raises(ValueError, match="duplicate"):
        panoptic_quality([dup], [ok], lengths, things={0}, num_classes=1)
    with pytest.raises(ValueError, match="duplicate"):
        panoptic_quality([ok], [dup], lengths, things={0}, num_classes=1)


def test_pq_threshold_must_guarantee_uniqueness():
    with pytest.raises(ValueError):
        panoptic_quality([[]], [[]], [np.array([1.0])], things=set(), num_classes=1,
                         match_threshold=0.3)


def test_masks_from_assignment_groups_and_background():
    labels = np.array([0, 0, 1, 1, 2, 1])
    instances = np.array([-1, -1, 0, 0, -1, 1])
    masks = masks_from_assignment(labels, instances, num_classes=2)
    # label 2 == num_classes -> background, dropped
    keys = [(m.label, m.instance_id) for m in masks]
    assert keys == [(0, -1), (1, 0), (1, 1)]
    assert masks[0].members == (0, 1)
    assert masks[1].members == (2, 3)
    assert masks[2].members == (5,)


def test_semantic_scores_frozen_case():
    # weights 1, 2, 3; pred [0, 1, bg], gt [0, 0, 1]
    lengths = np.array([E - 1, E**2 - 1, E**3 - 1])
    pred = np.array([0, 1, 2])
    gt = np.array([0, 0, 1])
    s = semantic_scores(pred, gt, lengths, num_classes=2)
    assert s.precision == pytest.approx(0.5, abs=1e-12)
    assert s.recall == pytest.approx(1 / 3, abs=1e-12)
    assert s.f1 == pytest.approx(0.4, abs=1e-12)
    # weighted: P=1/3, R=1/6, F1=2/9 (hand oracle)
    assert s.weighted_precision == pytest.approx(1 / 3, abs=1e-12)
    assert s.weighted_recall == pytest.approx(1 / 6, abs=1e-12)
    assert s.weighted_f1 == pytest.approx(2 / 9, abs=1e-12)


def test_semantic_scores_perfect():
    lengths = np.array([1.0, 2.0, 3.0])
    labels = np.array([0, 1, 1])
    s = semantic_scores(labels, labels, lengths, num_classes=2)
    assert s.f1 == 1.0 and s.weighted_f1 == 1.0


def test_mean_iou_cases():
    lengths = np.array([E - 1] * 4)  # unit weights
    pred = np.array([0, 0, 1, 1])
    gt = np.array([0, 1, 1, 1])
    # class 0: inter {0} / union {0,1} = 1/2; class 1: inter {2,3} / union {1,2,3} = 2/3
    v = mean_iou(pred, gt, lengths, num_classes=2)
    assert v == pytest.approx((0.5 + 2 / 3) / 2, abs=1e-12)
    assert mean_iou(gt, gt, lengths, num_classes=2) == 1.0


def test_box_iou_frozen_case():
    assert box_iou(np.array([0, 0, 1, 1]), np.array([0.5, 0, 1.5, 1])) == pytest.approx(
        1 / 3, abs=1e-12
    )
    assert box_iou(np.array([0, 0, 1, 1]), np.array([2, 2, 3, 3])) == 0.0
    assert box_iou(np.array([0, 0, 1, 1]), np.array([0, 0, 1, 1])) == 1.0


def test_symbol_box_hull():
    boxes = np.array([[0, 0, 1, 1], [2, -1, 3, 0.5], [0.2, 0.2, 0.4, 0.4]])
    m = _mask(0, 0, (0, 1))
    assert symbol_box(m, boxes) == pytest.approx([0, -1, 3, 1])


def test_instance_box_ap_perfect():
    boxes = [np.array([[0, 0, 1, 1], [2, 2, 3, 3]])]
    gts = [[_mask(0, 0, (0,)), _mask(0, 1, (1,))]]
    preds = [[SymbolMask(0, 0, (0,), score=1.0), SymbolMask(0, 1, (1,), score=1.0)]]
    rep = instance_box_ap(preds, gts, boxes, things={0})
    assert rep.map == 1.0 and rep.ap50 == 1.0 and rep.ap75 == 1.0


def test_instance_box_ap_zero_without_predictions():
    boxes = [np.array([[0, 0, 1, 1]])]
    gts = [[_mask(0, 0, (0,))]]
    rep = instance_box_ap([[]], gts, boxes, things={0})
    assert rep.map == 0.0 and rep.ap50 == 0.0


def test_instance_box_ap_threshold_sensitivity():
    """A prediction with box IoU ~0.6 counts below t=0.6 but not above."""
    # gt box [0,0,1,1]; pred box [0,0.2,1,1.2]: inter 0.8, union 1.2 -> IoU 2/3
    boxes = [np.array([[0, 0, 1, 1], [0, 0.2, 1, 1.2]])]
    gts = [[_mask(0, 0, (0,))]]
    preds = [[SymbolMask(0, 0, (1,), score=0.9)]]
    rep = instance_box_ap(preds, gts, boxes, things={0})
    assert rep.per_threshold[0.5] == 1.0
    assert rep.per_threshold[0.65] == 1.0  # 2/3 >= 0.65
    assert rep.per_threshold[0.7] == 0.0
    assert rep.ap75 == 0.0
    # mAP = mean over the 10-threshold grid: 4 thresholds pass (.5,.55,.6,.65)
    assert rep.map == pytest.approx(0.4, abs=1e-12)


def test_instance_box_ap_ranking():
    """Low-scored false positive after a true positive: AP stays 1 at recall 1."""
    boxes = [np.array([[0, 0, 1, 1], [5, 5, 6, 6]])]
    gts = [[_mask(0, 0, (0,))]]
    preds = [[SymbolMask(0, 0, (0,), score=0.9), SymbolMask(0, 1, (1,), score=0.1)]]
    rep = instance_box_ap(preds, gts, boxes, things={0})
    assert rep.ap50 == 1.0
    # reversed scores: the FP comes first, precision at recall 1 is 1/2
    preds = [[SymbolMask(0, 0, (0,), score=0.1), SymbolMask(0, 1, (1,), score=0.9)]]
    rep = instance_box_ap(preds, gts, boxes, things={0})
    assert rep.ap50 == pytest.approx(0.5, abs=1e-12)


def test_instance_box_ap_ignores_stuff():
    boxes = [np.array([[0, 0, 1, 1]])]
    gts = [[_mask(1, -1, (0,))]]
    preds = [[_mask(1, -1, (0,))]]
    rep = instance_box_ap(preds, gts, boxes, things={0})
    assert rep.map == 0.0  # no thing GT anywhere: no participating classes


def test_mask_recall():
    lengths = np.full(6, E - 1)
    gt = [_mask(0, 0, (0, 1, 2)), _mask(1, 1, (3, 4, 5))]
    # one candidate covers the first symbol, none the second
    members = [np.array([0, 1, 2]), np.array([0, 3])]
    assert mask_recall(members, gt, lengths) == 0.5
    assert mask_recall([np.arange(3), np.arange(3, 6)], gt, lengths) == 1.0
    assert mask_recall([], [], lengths) == 1.0
