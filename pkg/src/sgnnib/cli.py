"""Command line entry point: generate, train, evaluate, sweep, ablate.

Configs are JSON files; command-line flags override file values. Exit
codes: 0 success, 1 runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .data import (
    CheckpointError,
    DatasetError,
    SyntheticSpec,
    generate_synthetic,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    save_dataset,
)
from .graph import GraphError
from .losses import LossConfig, LossError
from .metrics import MetricsError
from .model import init_params
from .trainer import TrainConfig, TrainError, evaluate, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# hyperparameter grids used by the sensitivity experiments; a grid value of
# "default" in a sweep config expands to the matching range here
DEFAULT_GRIDS = {
    "lambda": [round(0.1 * k, 1) for k in range(1, 16)],   # 0.1 .. 1.5
    "eta": [round(0.1 * k, 1) for k in range(1, 16)],      # 0.1 .. 1.5
    "mu": [10.0 ** -k for k in range(6, 0, -1)],           # 1e-6 .. 1e-1
    "alpha": [0, 1, 2, 3],
    "beta": [1, 2, 3, 4],
}


class UsageError(ValueError):
    pass


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{p}: file not found")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: invalid JSON: {exc}") from exc


def _train_config_from_dict(d: dict) -> TrainConfig:
    """Build a TrainConfig from a config dict using the JSON key names
    (lambda/eta/mu live under "loss")."""
    d = dict(d)
    loss_d = dict(d.pop("loss", {}))
    rename = {"lambda": "edge_weight", "eta": "ib_weight"}
    loss_kwargs = {rename.get(k, k): v for k, v in loss_d.items()}
    try:
        loss = LossConfig(**loss_kwargs)
        return TrainConfig(loss=loss, **d)
    except (TypeError, LossError, TrainError) as exc:
        raise UsageError(f"invalid training config: {exc}") from exc


def _load_graph(cfg: dict, seed_override=None):
    """Resolve the single data source named by the run config."""
    has_dataset = "dataset" in cfg
    has_synthetic = "synthetic" in cfg
    if has_dataset == has_synthetic:
        raise UsageError(
            'config must name exactly one data source: "dataset" (a directory '
            'path) or "synthetic" (a generator spec object)')
    if has_dataset:
        graph, _ = load_dataset(cfg["dataset"])
        return graph
    spec_dict = dict(cfg["synthetic"])
    if seed_override is not None:
        spec_dict["seed"] = seed_override
    return generate_synthetic(SyntheticSpec.from_dict(spec_dict))[0]


def cmd_generate(args) -> int:
    spec_dict = _read_json(args.spec) if args.spec else {}
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    spec = SyntheticSpec.from_dict(spec_dict)
    graph, manifest = generate_synthetic(spec)
    out = save_dataset(graph, manifest, args.out)
    print(f"wrote dataset to {out} ({graph.num_nodes} nodes, "
          f"{graph.num_relations} relations)")
    return EXIT_OK


def _report_paths(out_dir: str):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(out: Path, name: str, payload: dict, fmt: str):
    if fmt == "json":
        path = out / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        path = out / f"{name}.csv"
        flat = _flatten(payload)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(flat.keys())
            writer.writerow(flat.values())
    return path


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, f"{key}."))
        elif not isinstance(v, list):
            out[key] = v
    return out


def _metrics_payload(report) -> dict:
    d = report.test_metrics.to_dict()
    return {"recall": d["recall"], "f1_macro": d["f1_macro"],
            "auc": d["auc"], "gmean": d["gmean"],
            "recall_macro": d["recall_macro"]}


def cmd_train(args) -> int:
    cfg = _read_json(args.config)
    train_cfg = _train_config_from_dict(cfg.get("train", {}))
    if args.seed is not None:
        train_cfg.seed = args.seed
    graph = _load_graph(cfg, seed_override=args.seed)
    store, report = train(graph, train_cfg)
    out = _report_paths(args.out)
    save_checkpoint(store, train_cfg, out / "model.ckpt")
    payload = {
        "variant": report.variant,
        "best_epoch": report.best_epoch,
        "epochs_run": len(report.epochs),
        "wall_seconds": report.wall_seconds,
        "test_metrics": _metrics_payload(report),
        "history": [
            {"epoch": r.epoch,
             "loss_total": r.losses.total,
             "loss_classification": r.losses.classification,
             "loss_edge": r.losses.edge,
             "loss_denoising": r.losses.denoising,
             "val_auc": r.val_metrics.auc,
             "val_gmean": r.val_metrics.gmean}
            for r in report.epochs],
    }
    (out / "train_report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _write_report(out, "metrics", _metrics_payload(report), args.format)
    print(f"[{report.variant}] best epoch {report.best_epoch}, "
          f"test AUC {report.test_metrics.auc:.4f}, "
          f"GMean {report.test_metrics.gmean:.4f} "
          f"({report.wall_seconds:.1f}s)")
    print(f"reports in {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _read_json(args.config) if args.config else {}
    values, train_cfg = load_checkpoint(args.checkpoint)
    graph = _load_graph(cfg if cfg else {"dataset": args.dataset},
                        seed_override=None)
    store = init_params(graph.feature_dim, graph.num_relations,
                        train_cfg.model_config(), seed=train_cfg.seed)
    store.load_values(values)
    report = evaluate(graph, store, args.split, train_cfg)
    payload = report.to_dict()
    out = _report_paths(args.out)
    path = _write_report(out, f"eval_{args.split}", payload, args.format)
    print(json.dumps(payload, indent=2, sort_keys=True))
    print(f"report at {path}")
    return EXIT_OK


def _expand_grid(grid_cfg: dict) -> list[dict]:
    axes = {}
    for key, values in grid_cfg.items():
        if key not in DEFAULT_GRIDS:
            raise UsageError(
                f"unknown sweep axis {key!r}; valid: {sorted(DEFAULT_GRIDS)}")
        if values == "default":
            axes[key] = DEFAULT_GRIDS[key]
        elif isinstance(values, list) and values:
            axes[key] = values
        else:
            raise UsageError(
                f"sweep axis {key!r} needs a non-empty list or \"default\"")
    names = sorted(axes)
    return [dict(zip(names, combo))
            for combo in itertools.product(*(axes[n] for n in names))]


def _apply_sweep_point(base: TrainConfig, point: dict) -> TrainConfig:
    cfg = TrainConfig.from_dict(base.to_dict())
    for key, value in point.items():
        if key == "lambda":
            cfg.loss.edge_weight = float(value)
        elif key == "eta":
            cfg.loss.ib_weight = float(value)
        elif key == "mu":
            cfg.loss.mu = float(value)
        elif key == "alpha":
            cfg.filter_alpha = int(value)
            if int(value) == 0:
                cfg.allow_zero_order_filters = True
        elif key == "beta":
            cfg.filter_beta = int(value)
    return cfg


def _run_sweep_point(packed):
    cfg_dict, point, seed = packed
    try:
        train_cfg = _apply_sweep_point(_train_config_from_dict(
            cfg_dict.get("train", {})), point)
        train_cfg.seed = seed
        graph = _load_graph(cfg_dict, seed_override=seed)
        _, report = train(graph, train_cfg)
        row = dict(point)
        row.update(_metrics_payload(report))
        row["status"] = "ok"
        return row
    except Exception as exc:  # per-row failure must not kill the sweep
        row = dict(point)
        row.update({"recall": "", "f1_macro": "", "auc": "", "gmean": "",
                    "recall_macro": "", "status": f"error: {exc}"})
        return row


def cmd_sweep(args) -> int:
    cfg = _read_json(args.config)
    grid_cfg = cfg.get("grid")
    if not grid_cfg:
        raise UsageError('sweep config needs a "grid" object')
    points = _expand_grid(grid_cfg)
    seed = args.seed if args.seed is not None else \
        cfg.get("train", {}).get("seed", 0)
    jobs = [(cfg, point, seed) for point in points]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_run_sweep_point, jobs))
    else:
        rows = [_run_sweep_point(job) for job in jobs]
    out = _report_paths(args.out)
    axis_names = sorted(grid_cfg)
    fieldnames = axis_names + ["recall", "f1_macro", "auc", "gmean",
                               "recall_macro", "status"]
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"{len(rows)} grid points ({failed} failed) -> {path}")
    return EXIT_OK


ABLATION_FLAGS = {
    "SGNN-IB": {},
    "SGNN-IB_edge": {"disable_edge_classifier": True},
    "SGNN-IB_low": {"disable_low_pass": True},
    "SGNN-IB_high": {"disable_high_pass": True},
    "SGNN-IB_rel": {"disable_relation_fusion": True},
    "SGNN-IB_IB": {"disable_ib": True},
}


def cmd_ablate(args) -> int:
    cfg = _read_json(args.config)
    base = _train_config_from_dict(cfg.get("train", {}))
    if args.seed is not None:
        base.seed = args.seed
    graph = _load_graph(cfg, seed_override=args.seed)
    rows = []
    for label, flags in ABLATION_FLAGS.items():
        variant_cfg = TrainConfig.from_dict(base.to_dict())
        for flag, value in flags.items():
            setattr(variant_cfg, flag, value)
        _, report = train(graph, variant_cfg)
        row = {"variant": label}
        row.update(_metrics_payload(report))
        rows.append(row)
        print(f"[{label}] AUC {row['auc']:.4f} GMean {row['gmean']:.4f}",
              flush=True)
    out = _report_paths(args.out)
    path = out / "ablation.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"ablation table -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgnnib",
        description="Spectral fraud detection on multi-relation graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic dataset")
    p_gen.add_argument("--spec", help="JSON file with generator settings")
    p_gen.add_argument("--out", required=True, help="output dataset directory")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train and write checkpoint + reports")
    p_train.add_argument("--config", required=True, help="JSON run config")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--format", choices=("json", "csv"), default="json")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", help="run config naming the data source")
    p_eval.add_argument("--dataset", help="dataset directory (alternative to --config)")
    p_eval.add_argument("--split", choices=("val", "test"), default="test")
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--format", choices=("json", "csv"), default="json")
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="grid sweep over loss/filter settings")
    p_sweep.add_argument("--config", required=True,
                         help='run config with a "grid" object')
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_abl = sub.add_parser("ablate", help="train the full model and each ablation")
    p_abl.add_argument("--config", required=True)
    p_abl.add_argument("--out", required=True)
    p_abl.add_argument("--seed", type=int, default=None)
    p_abl.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, DatasetError, LossError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainError, GraphError, MetricsError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
