"""ROC-AUC and the experiment suites: k-fold detection, sample efficiency,
contamination robustness, dimension/depth sweeps and loss ablations.

Report files deliberately omit wall-clock time so that identical seeds
give byte-identical output; timings stay on the in-memory reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import (
    GraphDataset,
    inject_contamination,
    split_fold,
    stratified_kfold,
    subsample_training,
)
from .errors import InputError, InvalidGridAxis, SingleClassInput
from .model import TrainConfig, score_many, train, with_terms


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with mid-ranks for ties.

    Works on doubled ranks so the U statistic is an exact integer and the
    only rounding is the final division.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise InputError(f"scores {s.shape} and labels {y.shape} must be equal-length vectors")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos + n_neg != y.size:
        raise InputError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # tie groups [start, end) in sorted order; doubled mid-rank = start + end + 1
    bounds = np.flatnonzero(np.diff(sorted_s)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [s.size]])
    doubled = np.repeat(starts + ends + 1, ends - starts)
    rank2 = np.empty(s.size, dtype=np.int64)
    rank2[order] = doubled
    u2 = int(rank2[y == 1].sum()) - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


@dataclass
class ScoreReport:
    graph_ids: list[int]
    scores: np.ndarray
    labels: np.ndarray
    auc: float
    config: dict
    fold: int
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)


@dataclass
class CvResult:
    reports: list[ScoreReport]

    @property
    def aucs(self) -> list[float]:
        return [r.auc for r in self.reports]

    @property
    def mean(self) -> float:
        return float(np.mean(self.aucs))

    @property
    def std(self) -> float:
        # sample standard deviation across folds
        return float(np.std(self.aucs, ddof=1)) if len(self.aucs) > 1 else 0.0


def _run_fold(args) -> ScoreReport:
    ds, plan, fold, cfg, transform, score_terms = args
    start = time.perf_counter()
    keep = transform is not None and transform[0] == "contamination"
    tr, te = split_fold(ds, plan, fold, keep_anomalies=keep)
    meta = {}
    if transform is not None:
        kind, value, seed = transform
        if kind == "sample_efficiency":
            tr = subsample_training(tr, value, seed)
        elif kind == "contamination":
            # anomalies come from the training side of the split only
            pool = tr.anomalies()
            tr = inject_contamination(tr.normals(), pool, value, seed)
            meta["injected"] = tr.meta.get("injected", 0)
    model = train(tr, cfg)
    use_g, use_n = score_terms
    s = score_many(model, te.graphs, use_g, use_n)
    y = te.label_array()
    return ScoreReport(
        graph_ids=plan.test_indices(fold),
        scores=s,
        labels=y,
        auc=auc(s, y),
        config=cfg.to_dict(),
        fold=fold,
        wall_time=time.perf_counter() - start,
        meta={"n_train": len(tr), **meta},
    )


def _map(fn, jobs_args, jobs: int):
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, jobs_args))


def _terms_for(cfg: TrainConfig) -> tuple[bool, bool]:
    return cfg.graph_term, cfg.node_term


def run_cv(
    ds: GraphDataset,
    cfg: TrainConfig = TrainConfig(),
    k: int = 5,
    seed: int = 0,
    jobs: int = 1,
    transform=None,
    score_terms: Optional[tuple[bool, bool]] = None,
) -> CvResult:
    """k-fold CV: train on each fold-complement's normals, score the held-out fold."""
    labels = ds.label_array()
    if labels.min() == labels.max():
        raise SingleClassInput("cross-validation needs both normal and anomalous graphs")
    plan = stratified_kfold(ds, k, seed)
    terms = score_terms if score_terms is not None else _terms_for(cfg)
    args = [
        (ds, plan, f, cfg, None if transform is None else (*transform, seed + f), terms)
        for f in range(k)
    ]
    return CvResult(_map(_run_fold, args, jobs))


def load_split_file(path, n_graphs: Optional[int] = None) -> tuple[list[int], list[int]]:
    """Read a fixed train/test split: one ``<graph index> <train|test>`` pair per line."""
    train_idx, test_idx = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2 or parts[1] not in ("train", "test"):
                raise InputError(f"{path}:{lineno}: expected '<index> train|test', got {line!r}")
            i = int(parts[0])
            if n_graphs is not None and not 0 <= i < n_graphs:
                raise InputError(f"{path}:{lineno}: graph index {i} out of range")
            (train_idx if parts[1] == "train" else test_idx).append(i)
    return train_idx, test_idx


def run_fixed_split(
    ds: GraphDataset,
    train_idx: Sequence[int],
    test_idx: Sequence[int],
    cfg: TrainConfig = TrainConfig(),
    repeats: int = 5,
) -> CvResult:
    """Repeat training on a fixed split with shifted seeds (one report per repeat)."""
    labels = ds.label_array()
    tr = ds.subset([i for i in train_idx if labels[i] == 0])
    te = ds.subset(test_idx)
    reports = []
    for r in range(repeats):
        start = time.perf_counter()
        c = replace(
            cfg,
            seed_target=cfg.seed_target + 1000 * r,
            seed_predictor=cfg.seed_predictor + 1000 * r,
            seed_shuffle=cfg.seed_shuffle + 1000 * r,
        )
        model = train(tr, c)
        s = score_many(model, te.graphs, c.graph_term, c.node_term)
        y = te.label_array()
        reports.append(
            ScoreReport(list(test_idx), s, y, auc(s, y), c.to_dict(), r, time.perf_counter() - start)
        )
    return CvResult(reports)


# ---------------------------------------------------------------------------
# experiment grids

GRID_KINDS = ("cv", "sample_efficiency", "contamination", "dim_sweep", "depth_sweep", "ablation")

DEFAULT_AXES = {
    "cv": [None],
    "sample_efficiency": [0.05, 0.25, 0.5, 0.75, 1.0],
    "contamination": [0.0, 0.04, 0.08, 0.12, 0.16],
    "dim_sweep": [32, 64, 128, 256, 512],
    "depth_sweep": [1, 2, 3, 5],
    "ablation": ["full", "no_node", "no_graph"],
}


@dataclass(frozen=True)
class ExperimentGrid:
    kind: str
    axis: tuple = ()
    repeats: int = 1
    base: TrainConfig = TrainConfig()
    k: int = 5
    seed: int = 0
    # ablation only: retrain each variant (default) or rescore the full model
    retrain: bool = True

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise InvalidGridAxis(f"unknown experiment kind {self.kind!r}")
        axis = tuple(self.axis) if self.axis else tuple(DEFAULT_AXES[self.kind])
        object.__setattr__(self, "axis", axis)
        for v in axis:
            if not _axis_ok(self.kind, v):
                raise InvalidGridAxis(f"invalid {self.kind} axis value {v!r}")
        if self.repeats < 1:
            raise InvalidGridAxis(f"repeats must be >= 1, got {self.repeats}")


def _axis_ok(kind: str, v) -> bool:
    if kind == "cv":
        return v is None
    if kind == "ablation":
        return v in ("full", "no_node", "no_graph")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return False
    if kind == "sample_efficiency":
        return 0 < v <= 1
    if kind == "contamination":
        return 0 <= v <= 0.5
    return float(v).is_integer() and v >= 1


def _hidden_width(cfg: TrainConfig) -> int:
    return cfg.layer_dims[0] if len(cfg.layer_dims) > 1 else 512


@dataclass
class GridRow:
    axis_value: object
    aucs: list[float]
    reports: list[ScoreReport]

    @property
    def mean(self) -> float:
        return float(np.mean(self.aucs))

    @property
    def std(self) -> float:
        return float(np.std(self.aucs, ddof=1)) if len(self.aucs) > 1 else 0.0


def _point(grid: ExperimentGrid, value):
    """(config, transform, score_terms) for one axis point."""
    cfg = grid.base
    if grid.kind == "dim_sweep":
        dims = list(cfg.layer_dims)
        dims[-1] = int(value)
        return replace(cfg, layer_dims=tuple(dims)), None, None
    if grid.kind == "depth_sweep":
        d = int(value)
        dims = (_hidden_width(cfg),) * (d - 1) + (cfg.layer_dims[-1],)
        return replace(cfg, layer_dims=dims), None, None
    if grid.kind == "ablation":
        if grid.retrain:
            c = with_terms(cfg, value)
            return c, None, None
        terms = {"full": (True, True), "no_node": (True, False), "no_graph": (False, True)}[value]
        return with_terms(cfg, "full"), None, terms
    if grid.kind in ("sample_efficiency", "contamination"):
        return cfg, (grid.kind, float(value)), None
    return cfg, None, None


def run_grid(ds: GraphDataset, grid: ExperimentGrid, jobs: int = 1) -> list[GridRow]:
    rows = []
    for value in grid.axis:
        cfg, transform, terms = _point(grid, value)
        aucs, reports = [], []
        for r in range(grid.repeats):
            res = run_cv(ds, cfg, grid.k, grid.seed + 7919 * r, jobs, transform, terms)
            aucs.extend(res.aucs)
            for rep in res.reports:
                rep.meta["repeat"] = r
            reports.extend(res.reports)
        rows.append(GridRow(value, aucs, reports))
    return rows


# ---------------------------------------------------------------------------
# report files

FOLD_HEADER = ["kind", "axis_value", "repeat", "fold", "auc", "n_train", "n_test", "n_test_anomalies"]
SUMMARY_HEADER = ["kind", "axis_value", "mean_auc", "std_auc", "n_runs"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def folds_csv(kind: str, rows: Sequence[GridRow]) -> str:
    out = [FOLD_HEADER]
    for row in rows:
        for rep in row.reports:
            out.append([
                kind, row.axis_value, rep.meta.get("repeat", 0), rep.fold, rep.auc,
                rep.meta.get("n_train"), len(rep.labels), int(np.sum(rep.labels)),
            ])
    return _csv(out)


def summary_csv(kind: str, rows: Sequence[GridRow]) -> str:
    out = [SUMMARY_HEADER]
    for row in rows:
        out.append([kind, row.axis_value, row.mean, row.std, len(row.aucs)])
    return _csv(out)


def summary_json(grid: ExperimentGrid, rows: Sequence[GridRow], dataset: str) -> str:
    doc = {
        "dataset": dataset,
        "kind": grid.kind,
        "k": grid.k,
        "seed": grid.seed,
        "repeats": grid.repeats,
        "retrain": grid.retrain,
        "config": grid.base.to_dict(),
        "rows": [
            {"axis_value": r.axis_value, "mean_auc": r.mean, "std_auc": r.std, "aucs": r.aucs}
            for r in rows
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"
