"""Training loop, checkpointing and evaluation glue.

Single-drawing forward passes are accumulated into effective batches of
``optim.batch_size`` (mean-scaled gradients), clipped, stepped with AdamW and
a per-step cosine schedule. One JSON line of diagnostics is appended per
logged epoch (loss breakdown, class-agnostic query recall, learning rate).
A non-finite loss aborts training and leaves the checkpoint of the last
completed epoch in place.

Determinism: all stochastic choices (epoch shuffling, center-query sampling)
come from one numpy generator seeded with ``seed`` and parameter init from
``torch.manual_seed(seed)``; identical runs produce byte-identical model
state.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .center_queries import sample_center_queries
from .config import RunConfig, config_from_dict, config_to_dict, save_config
from .drawing import ClassDef, Drawing
from .losses import KEY_ORDER, LossWeights, spotting_loss
from .metrics import (
    SpottingReport,
    gt_symbol_masks,
    instance_box_ap,
    mask_recall,
    masks_from_assignment,
    mean_iou,
    panoptic_quality,
    semantic_scores,
)
from .model import ModelOutput, PanopticAssignment, SpottingModel, panoptic_inference
from .targets import extract_gt_objects, gt_mask_matrix


class TrainingDiverged(RuntimeError):
    pass


def loss_weights(cfg: RunConfig) -> LossWeights:
    return LossWeights(
        bce=cfg.loss.bce,
        dice=cfg.loss.dice,
        cls=cfg.loss.cls,
        no_object=cfg.loss.no_object,
        dice_smooth=cfg.loss.dice_smooth,
    )


def check_vocab(drawings: Sequence[Drawing]) -> tuple[ClassDef, ...]:
    vocab = drawings[0].class_vocab
    for d in drawings[1:]:
        if d.class_vocab != vocab:
            raise ValueError(f"drawing {d.id}: vocabulary differs within the dataset")
    return vocab


def build_model(cfg: RunConfig, vocab: tuple[ClassDef, ...]) -> SpottingModel:
    """Seeded model construction (torch RNG drives parameter init)."""
    torch.manual_seed(cfg.seed)
    things = frozenset(c.id for c in vocab if c.is_thing)
    return SpottingModel(cfg.model, num_classes=len(vocab), things=things)


def drawing_loss(
    model: SpottingModel,
    drawing: Drawing,
    cfg: RunConfig,
    weights: LossWeights,
    rng: np.random.Generator | None,
) -> tuple[torch.Tensor, dict[str, float], ModelOutput, float]:
    """Forward one drawing and compute the full loss plus query recall."""
    objects = extract_gt_objects(drawing)
    masks = gt_mask_matrix(objects, len(drawing))
    labels = np.array([o.label for o in objects], dtype=np.int64)

    centers = None
    if rng is not None and cfg.model.pgt.enabled and objects:
        centers = sample_center_queries(
            objects, cfg.model.pgt.epsilon, rng, cfg.model.pgt.max_center_queries
        )
    out = model(drawing, centers)
    for sets in (out.learn_sets, out.center_sets or []):
        for cls_logits, mask_logits in sets:
            if not (torch.isfinite(cls_logits).all() and torch.isfinite(mask_logits).all()):
                raise TrainingDiverged(f"drawing {drawing.id}: non-finite model output")
    total, breakdown = spotting_loss(
        out.learn_sets,
        labels,
        masks,
        weights,
        model.num_classes,
        center_sets=out.center_sets,
        center_gt_indices=centers.gt_indices if centers is not None else None,
    )
    with torch.no_grad():
        _, final_masks = out.final
        members = [
            np.flatnonzero(torch.sigmoid(final_masks[q]).numpy() > 0.5)
            for q in range(final_masks.shape[0])
        ]
        recall = mask_recall(members, gt_symbol_masks(drawing), drawing.lengths())
    return total, breakdown, out, recall


@dataclass
class TrainResult:
    history: list[dict]
    checkpoint_path: Path | None
    diverged: bool
    epochs_run: int


def train(
    cfg: RunConfig,
    train_drawings: Sequence[Drawing],
    out_dir: str | Path | None = None,
) -> TrainResult:
    if not train_drawings:
        raise ValueError("training set is empty")
    vocab = check_vocab(train_drawings)
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(out / "config.yaml", cfg)
    metrics_path = out / "metrics.jsonl"
    metrics_path.write_text("")
    ckpt_path = out / "checkpoint.pt"

    model = build_model(cfg, vocab)
    model.train()
    weights = loss_weights(cfg)
    opt = torch.optim.AdamW(
        model.parameters(), lr=cfg.optim.lr, weight_decay=cfg.optim.weight_decay
    )
    steps_per_epoch = math.ceil(len(train_drawings) / cfg.optim.batch_size)
    sched = (
        torch.optim.lr_scheduler.CosineAnnealingLR(
            opt, T_max=cfg.optim.epochs * steps_per_epoch
        )
        if cfg.optim.schedule == "cosine"
        else None
    )
    rng = np.random.default_rng(cfg.seed)

    history: list[dict] = []
    saved_any = False
    for epoch in range(cfg.optim.epochs):
        order = rng.permutation(len(train_drawings))
        sums = {k: 0.0 for k in KEY_ORDER}
        loss_sum = 0.0
        recall_sum = 0.0
        for start in range(0, len(order), cfg.optim.batch_size):
            group = order[start : start + cfg.optim.batch_size]
            opt.zero_grad()
            for di in group:
                try:
                    loss, breakdown, _, recall = drawing_loss(
                        model, train_drawings[int(di)], cfg, weights, rng
                    )
                    if not math.isfinite(float(loss.item())):
                        raise TrainingDiverged("non-finite loss")
                except TrainingDiverged as exc:
                    with open(metrics_path, "a") as fh:
                        fh.write(json.dumps({"aborted": str(exc), "epoch": epoch}) + "\n")
                    return TrainResult(
                        history=history,
                        checkpoint_path=ckpt_path if saved_any else None,
                        diverged=True,
                        epochs_run=epoch,
                    )
                (loss / len(group)).backward()
                loss_sum += float(loss.item())
                recall_sum += recall
                for k in KEY_ORDER:
                    sums[k] += breakdown[k]
            if cfg.optim.clip_norm > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.optim.clip_norm)
            opt.step()
            if sched is not None:
                sched.step()
        n = len(train_drawings)
        record = {
            "epoch": epoch,
            "loss": loss_sum / n,
            **{k: sums[k] / n for k in KEY_ORDER},
            "query_recall": recall_sum / n,
            "lr": float(opt.param_groups[0]["lr"]),
        }
        history.append(record)
        if epoch % cfg.log_every == 0 or epoch == cfg.optim.epochs - 1:
            with open(metrics_path, "a") as fh:
                fh.write(json.dumps(record) + "\n")
        save_checkpoint(ckpt_path, model, cfg, vocab, epoch=epoch)
        saved_any = True

    return TrainResult(
        history=history,
        checkpoint_path=ckpt_path,
        diverged=False,
        epochs_run=cfg.optim.epochs,
    )


def save_checkpoint(
    path: str | Path,
    model: SpottingModel,
    cfg: RunConfig,
    vocab: tuple[ClassDef, ...],
    epoch: int | None = None,
) -> None:
    payload = {
        "model": model.state_dict(),
        "config": config_to_dict(cfg),
        "vocab": [{"id": c.id, "name": c.name, "is_thing": c.is_thing} for c in vocab],
        "epoch": epoch,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[SpottingModel, RunConfig, tuple[ClassDef, ...]]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = config_from_dict(payload["config"])
    vocab = tuple(ClassDef(**v) for v in payload["vocab"])
    things = frozenset(c.id for c in vocab if c.is_thing)
    model = SpottingModel(cfg.model, num_classes=len(vocab), things=things)
    model.load_state_dict(payload["model"])
    model.eval()
    return model, cfg, vocab


def state_digest(state_dict: dict) -> str:
    """sha256 over sorted (name, dtype, shape, bytes) of all entries."""
    h = hashlib.sha256()
    for name in sorted(state_dict):
        t = state_dict[name]
        h.update(name.encode())
        h.update(str(t.dtype).encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


@torch.no_grad()
def predict_drawing(model: SpottingModel, drawing: Drawing) -> PanopticAssignment:
    out = model(drawing, None)
    cls_logits, mask_logits = out.final
    return panoptic_inference(
        cls_logits,
        mask_logits,
        model.num_classes,
        model.things,
        tau_cls=model.config.decoder.tau_cls,
        tau_mask=model.config.decoder.tau_mask,
    )


@torch.no_grad()
def evaluate_model(model: SpottingModel, drawings: Sequence[Drawing]) -> SpottingReport:
    """Full metric bundle over a dataset (vocabulary must match the model)."""
    vocab = check_vocab(drawings)
    if len(vocab) != model.num_classes:
        raise ValueError(
            f"dataset has {len(vocab)} classes, model expects {model.num_classes}"
        )
    things = model.things
    preds, gts, lens, boxes = [], [], [], []
    pred_labels, gt_labels = [], []
    was_training = model.training
    model.eval()
    for d in drawings:
        assign = predict_drawing(model, d)
        preds.append(
            masks_from_assignment(
                assign.labels, assign.instances, model.num_classes, assign.scores
            )
        )
        gts.append(gt_symbol_masks(d))
        lens.append(d.lengths())
        boxes.append(d.primitive_boxes())
        pred_labels.append(assign.labels)
        gt_labels.append(d.semantics())
    if was_training:
        model.train()

    all_pred = np.concatenate(pred_labels)
    all_gt = np.concatenate(gt_labels)
    all_len = np.concatenate(lens)
    return SpottingReport(
        pq=panoptic_quality(preds, gts, lens, things, model.num_classes),
        semantic=semantic_scores(all_pred, all_gt, all_len, model.num_classes),
        miou=mean_iou(all_pred, all_gt, all_len, model.num_classes),
        box_ap=instance_box_ap(preds, gts, boxes, things),
        class_names={c.id: c.name for c in vocab},
    )
