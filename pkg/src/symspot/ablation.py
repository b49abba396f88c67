"""Single-axis ablation harness.

Each axis trains a fresh model per variant (same seed, same data) and
evaluates it on a held-out set, emitting one row per variant. Axes:

- ``pgt``: center-query guidance off/on
- ``lfe``: layer fusion off/on
- ``multi_scale``: layer fusion on the finest level only vs all levels
- ``pool_type``: layer pooling in {mean, max, attn, concat}
- ``epsilon``: center sampling spread sweep (custom values allowed)
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .config import RunConfig, config_from_dict, config_to_dict
from .drawing import Drawing
from .training import evaluate_model, load_checkpoint, train

AXES = ("pgt", "lfe", "multi_scale", "pool_type", "epsilon")

DEFAULT_EPSILONS = (0.0, 0.05, 0.1, 0.5, 2.0)


def _clone(cfg: RunConfig) -> RunConfig:
    return config_from_dict(config_to_dict(cfg))


def axis_variants(
    axis: str, base: RunConfig, values: Sequence[float] | None = None
) -> list[tuple[str, RunConfig]]:
    variants: list[tuple[str, RunConfig]] = []
    if axis == "pgt":
        for name, flag in (("pgt_off", False), ("pgt_on", True)):
            cfg = _clone(base)
            cfg.model.pgt.enabled = flag
            variants.append((name, cfg))
    elif axis == "lfe":
        for name, flag in (("lfe_off", False), ("lfe_on", True)):
            cfg = _clone(base)
            cfg.model.lfe.enabled = flag
            variants.append((name, cfg))
    elif axis == "multi_scale":
        for name, flag in (("finest_only", False), ("all_levels", True)):
            cfg = _clone(base)
            cfg.model.lfe.enabled = True
            cfg.model.lfe.multi_scale = flag
            variants.append((name, cfg))
    elif axis == "pool_type":
        for mode in ("mean", "max", "attn", "concat"):
            cfg = _clone(base)
            cfg.model.lfe.enabled = True
            cfg.model.lfe.pool_mode = mode
            variants.append((f"pool_{mode}", cfg))
    elif axis == "epsilon":
        for eps in values if values is not None else DEFAULT_EPSILONS:
            cfg = _clone(base)
            cfg.model.pgt.enabled = True
            cfg.model.pgt.epsilon = float(eps)
            variants.append((f"eps_{eps}", cfg))
    else:
        raise ValueError(f"unknown ablation axis {axis!r} (valid: {', '.join(AXES)})")
    return variants


def run_ablation(
    axis: str,
    base: RunConfig,
    train_drawings: Sequence[Drawing],
    eval_drawings: Sequence[Drawing],
    out_dir: str | Path,
    values: Sequence[float] | None = None,
) -> list[dict]:
    """Train and evaluate every variant; returns one metrics row per variant."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    for name, cfg in axis_variants(axis, base, values):
        run_dir = out / name
        result = train(cfg, train_drawings, out_dir=run_dir)
        if result.diverged or result.checkpoint_path is None:
            rows.append({"variant": name, "diverged": True})
            continue
        model, _, _ = load_checkpoint(result.checkpoint_path)
        report = evaluate_model(model, eval_drawings)
        rows.append(
            {
                "variant": name,
                "pq": report.pq.total.pq,
                "sq": report.pq.total.sq,
                "rq": report.pq.total.rq,
                "f1": report.semantic.f1,
                "wf1": report.semantic.weighted_f1,
                "miou": report.miou,
                "map": report.box_ap.map,
                "final_recall": result.history[-1]["query_recall"],
            }
        )
    with open(out / "ablation.json", "w") as fh:
        json.dump({"axis": axis, "rows": rows}, fh, indent=2)
    (out / "ablation.txt").write_text(format_ablation_table(axis, rows) + "\n")
    return rows


def format_ablation_table(axis: str, rows: list[dict]) -> str:
    lines = [f"axis: {axis}"]
    header = f"{'variant':<16} {'PQ':>7} {'SQ':>7} {'RQ':>7} {'F1':>7} {'mIoU':>7}"
    lines.append(header)
    lines.append("-" * len(header))
    for r in rows:
        if r.get("diverged"):
            lines.append(f"{r['variant']:<16} diverged")
            continue
        lines.append(
            f"{r['variant']:<16} {r['pq']:7.4f} {r['sq']:7.4f} {r['rq']:7.4f}"
            f" {r['f1']:7.4f} {r['miou']:7.4f}"
        )
    return "\n".join(lines)
