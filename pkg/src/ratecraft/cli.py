"""Command-line entry points: run one experiment, sweep many, or serve the
human labeling UI. Config files are single JSON documents; flags override
file values."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import ExperimentConfig, run_experiment, sweep


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _config_from_args(args) -> ExperimentConfig:
    doc = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.modality is not None:
        doc["modality"] = args.modality
    if args.n is not None:
        doc["n_classes"] = args.n
    if args.out is not None:
        doc["out_dir"] = args.out
    return ExperimentConfig.from_dict(doc)


def cmd_run(args) -> int:
    config = _config_from_args(args)
    record = run_experiment(config)
    print(f"run {record.config_hash}: {record.labels_total} labels, "
          f"final ground-truth return {record.final_eval_mean:.2f} "
          f"+- {record.final_eval_std:.2f} ({record.wall_time_s:.1f}s)")
    if config.out_dir:
        print(f"artifacts in {config.out_dir}")
    return 0


def cmd_sweep(args) -> int:
    spec = _load_json(args.config)
    out_dir = args.out or spec.get("out_dir") or "sweep-out"
    summary = sweep(spec, out_dir)
    print(f"summary written to {summary}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve_labeling

    doc = _load_json(args.config) if args.config else {}
    doc.setdefault("teacher", "http-human")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out_dir"] = args.out
    config = ExperimentConfig.from_dict(doc)
    static = args.static_dir
    if static is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static = str(bundled) if bundled.exists() else None
    serve_labeling(config, bind=args.bind, static_dir=static)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ratecraft",
                                     description="reward learning from segment ratings")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--modality", choices=["rating", "preference"])
    p_run.add_argument("--n", type=int, help="rating class count")
    p_run.add_argument("--out", help="output directory")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a sweep spec")
    p_sweep.add_argument("--config", required=True, help="JSON sweep spec")
    p_sweep.add_argument("--out", help="sweep output directory")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_serve = sub.add_parser("serve", help="serve the human labeling UI")
    p_serve.add_argument("--config", help="JSON config file")
    p_serve.add_argument("--bind", default="127.0.0.1:8000")
    p_serve.add_argument("--seed", type=int)
    p_serve.add_argument("--out", help="output directory")
    p_serve.add_argument("--static-dir", help="UI bundle directory")
    p_serve.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
