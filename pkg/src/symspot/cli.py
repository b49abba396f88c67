"""Command-line entry point.

Subcommands: ``gen-data`` (seeded synthetic floorplans), ``train``, ``eval``,
``predict`` and ``ablate``. Config values come from an optional YAML file,
overridable with repeated ``--set section.key=value`` flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ablation import AXES, run_ablation
from .config import RunConfig, apply_overrides, load_config
from .dataset_io import load_dataset, save_dataset
from .synthetic import GeneratorSpec, generate_dataset
from .training import evaluate_model, load_checkpoint, predict_drawing, train


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.set:
        cfg = apply_overrides(cfg, args.set)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = str(args.out)
    return cfg


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="YAML run config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, e.g. model.lfe.pool_mode=max")
    p.add_argument("--seed", type=int, default=None)


def cmd_gen_data(args: argparse.Namespace) -> int:
    spec = GeneratorSpec(
        rooms=args.rooms,
        doors_per_room=args.doors,
        windows_per_room=args.windows,
        blinds_per_room=args.blinds,
        tables_per_room=args.tables,
        num_layers=args.layers,
    )
    drawings = generate_dataset(args.seed, args.count, spec)
    save_dataset(args.out, drawings)
    print(f"wrote {len(drawings)} drawings to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    drawings = load_dataset(args.data)
    result = train(cfg, drawings, out_dir=cfg.out_dir)
    if result.diverged:
        print(f"training diverged after {result.epochs_run} epochs", file=sys.stderr)
        return 1
    last = result.history[-1]
    print(
        f"trained {result.epochs_run} epochs; final loss {last['loss']:.4f}, "
        f"query recall {last['query_recall']:.3f}; checkpoint {result.checkpoint_path}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model, _, vocab = load_checkpoint(args.checkpoint)
    drawings = load_dataset(args.data)
    if drawings[0].class_vocab != vocab:
        raise SystemExit("dataset vocabulary does not match the checkpoint")
    report = evaluate_model(model, drawings)
    print(report.format_table())
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        print(f"report written to {args.out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model, _, vocab = load_checkpoint(args.checkpoint)
    drawings = load_dataset(args.data)
    if drawings[0].class_vocab != vocab:
        raise SystemExit("dataset vocabulary does not match the checkpoint")
    payload = []
    for d in drawings:
        assign = predict_drawing(model, d)
        payload.append(
            {
                "id": d.id,
                "assignments": [
                    {"semantic": int(l), "instance": int(z)}
                    for l, z in zip(assign.labels, assign.instances)
                ],
            }
        )
    out = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(out + "\n")
        print(f"predictions written to {args.out}")
    else:
        print(out)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    train_drawings = load_dataset(args.data)
    eval_drawings = load_dataset(args.eval_data) if args.eval_data else train_drawings
    values = [float(v) for v in args.values.split(",")] if args.values else None
    rows = run_ablation(args.axis, cfg, train_drawings, eval_drawings,
                        out_dir=cfg.out_dir, values=values)
    print((Path(cfg.out_dir) / "ablation.txt").read_text())
    return 0 if all(not r.get("diverged") for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symspot",
        description="Panoptic symbol spotting on vector drawings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic floorplan dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--rooms", type=int, default=4)
    p.add_argument("--doors", type=int, default=1)
    p.add_argument("--windows", type=int, default=1)
    p.add_argument("--blinds", type=int, default=1)
    p.add_argument("--tables", type=int, default=1)
    p.add_argument("--layers", type=int, default=5)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="run directory")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="per-primitive (semantic, instance) output")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="single-axis ablation study")
    p.add_argument("--axis", choices=AXES, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--eval-data", type=Path, default=None)
    p.add_argument("--values", type=str, default=None,
                   help="comma-separated values for the epsilon axis")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    _add_config_args(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
