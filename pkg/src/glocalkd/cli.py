"""Command-line front end: ingest, synth, train, score, experiment.

Settings resolve in this order (later wins): built-in defaults, the
``--config`` key=value file, ``GLOCALKD_*`` environment variables, then
explicit flags. Every command writes a JSON run manifest next to its main
output before any result file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .data import (
    SynthSpec,
    file_checksum,
    parse_benchmark_dir,
    read_snapshot,
    synth_corpus,
    to_anomaly_labels,
    write_snapshot,
)
from .errors import FeatureDimMismatch, GlocalkdError, InvalidConfig, InvalidGridAxis, MissingFile
from .evaluation import GRID_KINDS, ExperimentGrid, auc, folds_csv, run_grid, summary_csv, summary_json
from .model import DistillModel, TrainConfig, score_many, train

ENV_PREFIX = "GLOCALKD_"

# config-file key -> (TrainConfig field, parser)
_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _parse_bool(raw: str) -> bool:
    try:
        return _BOOL[raw.strip().lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {raw!r}") from None


def _parse_dims(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)


TRAIN_KEYS = {
    "lr": ("lr", float),
    "batch_size": ("batch_size", int),
    "epochs": ("epochs", int),
    "lambda": ("lam", float),
    "lam": ("lam", float),
    "layer_dims": ("layer_dims", _parse_dims),
    "seed_target": ("seed_target", int),
    "seed_predictor": ("seed_predictor", int),
    "seed_shuffle": ("seed_shuffle", int),
    "graph_term": ("graph_term", _parse_bool),
    "node_term": ("node_term", _parse_bool),
}

GRID_KEYS = {"axis", "repeats", "k", "seed", "retrain"}


def read_kv_file(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    p = Path(path)
    if not p.exists() or p.is_dir():
        raise MissingFile(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig([f"{p}:{lineno}: expected key=value, got {line!r}"])
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lower()] = value
    return out


def _env_values(keys) -> dict[str, str]:
    out = {}
    for key in keys:
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            out[key] = raw
    return out


def resolve_train_config(
    file_values: Optional[dict] = None, flag_values: Optional[dict] = None, allow_extra=()
) -> TrainConfig:
    """Merge defaults, file, environment and flags; report every bad field at once."""
    merged: dict[str, str] = {}
    merged.update(file_values or {})
    merged.update(_env_values(TRAIN_KEYS))
    merged.update({k: str(v) for k, v in (flag_values or {}).items() if v is not None})
    kwargs, problems = {}, []
    for key, raw in merged.items():
        if key in allow_extra:
            continue
        if key not in TRAIN_KEYS:
            problems.append(f"unknown config key {key!r}")
            continue
        name, conv = TRAIN_KEYS[key]
        try:
            kwargs[name] = conv(raw)
        except ValueError:
            problems.append(f"{key}: cannot parse {raw!r}")
    if problems:
        raise InvalidConfig(problems)
    cfg = TrainConfig(**kwargs)
    problems = cfg.problems()
    if problems:
        raise InvalidConfig(problems)
    return cfg


def write_manifest(path, command: str, config: dict, seeds: dict, inputs: dict, artifacts: dict) -> Path:
    """Reproduction record; deliberately free of timestamps so reruns match."""
    doc = {
        "tool": "glocalkd",
        "version": __version__,
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": inputs,
        "artifacts": artifacts,
    }
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return p


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _summary_line(ds) -> str:
    s = ds.summary()
    rate = "n/a" if s["anomaly_rate"] is None else f"{s['anomaly_rate']:.2f}"
    return (
        f"{ds.name}: {s['graphs']} graphs, mean nodes {s['mean_nodes']:.2f}, "
        f"mean edges {s['mean_edges']:.2f}, anomaly rate {rate}"
    )


def _seeds(cfg: TrainConfig) -> dict:
    return {"target": cfg.seed_target, "predictor": cfg.seed_predictor, "shuffle": cfg.seed_shuffle}


def _flag_values(args) -> dict:
    return {
        "seed_target": getattr(args, "seed_target", None),
        "seed_predictor": getattr(args, "seed_predictor", None),
        "seed_shuffle": getattr(args, "seed_shuffle", None),
    }


# ---------------------------------------------------------------------------
# commands

def cmd_ingest(args) -> int:
    out = Path(args.out)
    ds = parse_benchmark_dir(args.dataset_dir)
    if ds.classes is not None:
        ds = to_anomaly_labels(ds, args.anomaly_class)
    write_manifest(
        _manifest_path(out), "ingest",
        {"anomaly_class": args.anomaly_class}, {},
        {"dataset_dir": str(args.dataset_dir)}, {"snapshot": str(out)},
    )
    write_snapshot(ds, out)
    print(_summary_line(ds))
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    values = read_kv_file(args.spec_file) if args.spec_file else {}
    spec = SynthSpec.from_mapping(values)
    write_manifest(
        _manifest_path(out), "synth", {"spec": values}, {"synth": args.seed},
        {"spec_file": None if args.spec_file is None else str(args.spec_file)}, {"snapshot": str(out)},
    )
    ds = synth_corpus(spec, args.seed)
    write_snapshot(ds, out)
    print(_summary_line(ds))
    return 0


def _trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "loss_graph", "loss_node", "objective"])
    for row in trace:
        w.writerow([row["epoch"], repr(row["loss_graph"]), repr(row["loss_node"]), repr(row["objective"])])
    return buf.getvalue()


def cmd_train(args) -> int:
    out = Path(args.out)
    trace_path = Path(args.trace) if args.trace else out.with_name(out.name + ".trace.csv")
    cfg = resolve_train_config(read_kv_file(args.config) if args.config else {}, _flag_values(args))
    ds = read_snapshot(args.dataset)
    train_set = ds.normals() if ds.is_labeled else ds
    write_manifest(
        _manifest_path(out), "train", cfg.to_dict(), _seeds(cfg),
        {"dataset": str(args.dataset), "dataset_sha256": file_checksum(args.dataset),
         "n_train": len(train_set)},
        {"model": str(out), "trace": str(trace_path)},
    )
    model = train(train_set, cfg)
    model.save(out)
    trace_path.write_text(_trace_csv(model.trace))
    last = model.trace[-1]
    print(f"trained on {len(train_set)} graphs, final objective {last['objective']:.6g}")
    return 0


def cmd_score(args) -> int:
    out = Path(args.out)
    model = DistillModel.load(args.model)
    ds = read_snapshot(args.dataset)
    if ds.feature_kind != model.feature_kind:
        raise FeatureDimMismatch(
            f"model expects {model.feature_kind} features, dataset has {ds.feature_kind}"
        )
    write_manifest(
        _manifest_path(out), "score",
        None if model.config is None else model.config.to_dict(),
        {} if model.config is None else _seeds(model.config),
        {"model": str(args.model), "model_sha256": file_checksum(args.model),
         "dataset": str(args.dataset), "dataset_sha256": file_checksum(args.dataset)},
        {"scores": str(out)},
    )
    scores = score_many(model, ds.graphs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labeled = ds.is_labeled
    w.writerow(["graph_id", "score", "label"] if labeled else ["graph_id", "score"])
    for i, s in enumerate(scores):
        w.writerow([i, repr(float(s)), ds.labels[i]] if labeled else [i, repr(float(s))])
    text = buf.getvalue()
    if labeled and 0 < sum(ds.labels) < len(ds.labels):
        value = auc(scores, ds.label_array())
        text += f"# auc={value!r}\n"
        print(f"AUC {value:.4f}")
    out.write_text(text)
    return 0


def _parse_axis(kind: str, raw: str) -> tuple:
    vals = []
    for tok in raw.replace(" ", "").split(","):
        if not tok:
            continue
        if kind == "ablation":
            vals.append(tok)
            continue
        try:
            v = float(tok)
        except ValueError:
            raise InvalidGridAxis(f"invalid {kind} axis value {tok!r}") from None
        vals.append(int(v) if kind in ("dim_sweep", "depth_sweep") and v.is_integer() else v)
    return tuple(vals)


def build_grid(kind: str, values: dict, flag_values: Optional[dict] = None) -> ExperimentGrid:
    if kind not in GRID_KINDS:
        raise InvalidGridAxis(f"unknown experiment kind {kind!r}")
    cfg = resolve_train_config(values, flag_values, allow_extra=GRID_KEYS)
    try:
        repeats = int(values.get("repeats", 1))
        k = int(values.get("k", 5))
        seed = int(values.get("seed", 0))
        retrain = _parse_bool(values.get("retrain", "true"))
    except ValueError as exc:
        raise InvalidConfig([str(exc)]) from None
    axis = _parse_axis(kind, values["axis"]) if "axis" in values else ()
    if kind == "cv" and axis:
        raise InvalidGridAxis("kind=cv takes no axis")
    return ExperimentGrid(kind, axis, repeats, cfg, k, seed, retrain)


def cmd_experiment(args) -> int:
    out = Path(args.out)
    values = read_kv_file(args.grid) if args.grid else {}
    if args.config:
        values = {**read_kv_file(args.config), **values}
    grid = build_grid(args.kind, values, _flag_values(args))
    ds = read_snapshot(args.dataset)
    out.mkdir(parents=True, exist_ok=True)
    names = {"folds": out / "folds.csv", "summary": out / "summary.csv", "json": out / "summary.json"}
    write_manifest(
        out / "manifest.json", f"experiment {grid.kind}", grid.base.to_dict(),
        {**_seeds(grid.base), "folds": grid.seed},
        {"dataset": str(args.dataset), "dataset_sha256": file_checksum(args.dataset),
         "grid": None if args.grid is None else str(args.grid),
         "axis": list(grid.axis), "repeats": grid.repeats, "k": grid.k, "retrain": grid.retrain},
        {k: str(v) for k, v in names.items()},
    )
    rows = run_grid(ds, grid, args.jobs)
    names["folds"].write_text(folds_csv(grid.kind, rows))
    names["summary"].write_text(summary_csv(grid.kind, rows))
    names["json"].write_text(summary_json(grid, rows, ds.name))
    for row in rows:
        label = "" if row.axis_value is None else f"{row.axis_value}: "
        print(f"{label}AUC {row.mean:.4f} +/- {row.std:.4f} over {len(row.aucs)} runs")
    return 0


# ---------------------------------------------------------------------------

def _seed_flags(p):
    p.add_argument("--seed-target", type=int)
    p.add_argument("--seed-predictor", type=int)
    p.add_argument("--seed-shuffle", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glocalkd", description="Graph-level anomaly detection by random distillation.")
    ap.add_argument("--version", action="version", version=f"glocalkd {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a benchmark directory into a snapshot")
    p.add_argument("dataset_dir")
    p.add_argument("--out", required=True)
    p.add_argument("--anomaly-class", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic corpus snapshot")
    p.add_argument("spec_file", nargs="?")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a snapshot's normal graphs")
    p.add_argument("dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    _seed_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score every graph of a snapshot")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("experiment", help="run a cross-validated experiment grid")
    p.add_argument("kind", choices=GRID_KINDS)
    p.add_argument("dataset")
    p.add_argument("--grid")
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=int(os.environ.get(ENV_PREFIX + "JOBS", "1")))
    p.add_argument("--out", required=True)
    _seed_flags(p)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except GlocalkdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
