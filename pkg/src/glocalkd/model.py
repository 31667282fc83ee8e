"""Joint graph- and node-level random distillation.

A target GCN is frozen at its random initialization. A predictor GCN of
the same shape learns to reproduce the target's node representations and
max-pooled graph representation on normal training graphs. A graph's
anomaly score is the squared error of the graph representation plus the
mean squared error of its node representations.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from types import SimpleNamespace
from typing import Optional, Sequence

import numpy as np

from .data import ATTRIBUTED, DEGREE_ONE_HOT, GraphDataset
from .errors import (
    EmptyTrainingSet,
    FeatureDimMismatch,
    InvalidConfig,
    NoTermEnabled,
    NonFiniteGradient,
    NonFiniteLoss,
)
from .gcn import (
    DEFAULT_LAYER_DIMS,
    AdamState,
    GcnArch,
    GcnParams,
    adam_step,
    backward_batch,
    forward_batch,
    init_params,
)
from .graph import Graph, degree_features, max_degree_of

log = logging.getLogger(__name__)

MODEL_MAGIC = "glocalkd-model 1"


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 300
    epochs: int = 150
    lam: float = 1.0
    layer_dims: tuple[int, ...] = DEFAULT_LAYER_DIMS
    seed_target: int = 0
    seed_predictor: int = 1
    seed_shuffle: int = 2
    # ablations: drop one of the two distillation terms
    graph_term: bool = True
    node_term: bool = True

    def problems(self) -> list[str]:
        out = []
        if not (isinstance(self.lr, (int, float)) and self.lr > 0 and math.isfinite(self.lr)):
            out.append(f"lr must be a positive finite number, got {self.lr!r}")
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            out.append(f"batch_size must be an integer >= 1, got {self.batch_size!r}")
        if not (isinstance(self.epochs, int) and self.epochs >= 1):
            out.append(f"epochs must be an integer >= 1, got {self.epochs!r}")
        if not (isinstance(self.lam, (int, float)) and self.lam >= 0 and math.isfinite(self.lam)):
            out.append(f"lambda must be a non-negative finite number, got {self.lam!r}")
        if not self.layer_dims or any(int(d) < 1 for d in self.layer_dims):
            out.append(f"layer_dims must be a non-empty list of positive widths, got {self.layer_dims!r}")
        if not (self.graph_term or self.node_term):
            out.append("at least one of graph_term / node_term must be enabled")
        return out

    def validate(self) -> "TrainConfig":
        problems = self.problems()
        if problems:
            raise InvalidConfig(problems)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer_dims"] = list(self.layer_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "layer_dims" in d:
            d["layer_dims"] = tuple(int(v) for v in d["layer_dims"])
        return cls(**d)


@dataclass
class DistillModel:
    target: GcnParams
    predictor: GcnParams
    arch: GcnArch
    feature_kind: str
    max_degree: Optional[int]
    lam: float = 1.0
    config: Optional[TrainConfig] = None
    trace: list[dict] = field(default_factory=list)

    def featurize(self, g: Graph) -> np.ndarray:
        if self.feature_kind == DEGREE_ONE_HOT:
            return degree_features(g, self.max_degree)
        if g.features is None:
            raise FeatureDimMismatch("model expects node attributes but graph has none")
        if g.features.shape[1] != self.arch.input_dim:
            raise FeatureDimMismatch(
                f"graph feature width {g.features.shape[1]} != model input dim {self.arch.input_dim}"
            )
        return g.features

    # -- persistence -------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "format": MODEL_MAGIC,
            "arch": self.arch.to_dict(),
            "feature_kind": self.feature_kind,
            "max_degree": self.max_degree,
            "lambda": self.lam,
            "config": None if self.config is None else self.config.to_dict(),
            "target": self.target.to_dict(None if self.config is None else self.config.seed_target),
            "predictor": self.predictor.to_dict(
                None if self.config is None else self.config.seed_predictor
            ),
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_json().encode("ascii"))

    @classmethod
    def from_json(cls, text: str) -> "DistillModel":
        doc = json.loads(text)
        if doc.get("format") != MODEL_MAGIC:
            raise FeatureDimMismatch("not a glocalkd model file")
        cfg = None if doc["config"] is None else TrainConfig.from_dict(doc["config"])
        return cls(
            target=GcnParams.from_dict(doc["target"]),
            predictor=GcnParams.from_dict(doc["predictor"]),
            arch=GcnArch.from_dict(doc["arch"]),
            feature_kind=doc["feature_kind"],
            max_degree=doc["max_degree"],
            lam=doc["lambda"],
            config=cfg,
        )

    @classmethod
    def load(cls, path) -> "DistillModel":
        return cls.from_json(Path(path).read_text(encoding="ascii"))


def _input_dim(feature_kind: str, graphs: Sequence[Graph]) -> tuple[int, Optional[int]]:
    if feature_kind == DEGREE_ONE_HOT:
        md = max_degree_of(graphs)
        return md + 1, md
    return graphs[0].features.shape[1], None


def _stack(model: DistillModel, graphs: Sequence[Graph]) -> tuple[list[np.ndarray], np.ndarray]:
    return [g.norm_adj for g in graphs], np.concatenate([model.featurize(g) for g in graphs])


def _errors(cache_p, cache_t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-graph squared graph error, per-graph mean node error, node diff rows."""
    gdiff = cache_p.graph_repr - cache_t.graph_repr
    graph_err = np.einsum("gk,gk->g", gdiff, gdiff)
    ndiff = cache_p.node_repr - cache_t.node_repr
    row_err = np.einsum("nk,nk->n", ndiff, ndiff)
    sizes = np.diff(cache_p.offsets)
    node_err = np.add.reduceat(row_err, cache_p.offsets[:-1]) / sizes
    return graph_err, node_err, ndiff


def batch_losses(model: DistillModel, graphs: Sequence[Graph]) -> tuple[float, float]:
    """Mean graph-level and mean node-level distillation losses over ``graphs``."""
    adjs, x = _stack(model, graphs)
    graph_err, node_err, _ = _errors(
        forward_batch(model.predictor, adjs, x), forward_batch(model.target, adjs, x)
    )
    return float(graph_err.mean()), float(node_err.mean())


def objective_and_grads(
    predictor: GcnParams,
    target_cache,
    adjs: list[np.ndarray],
    x: np.ndarray,
    lam: float,
    graph_term: bool = True,
    node_term: bool = True,
):
    """Objective ``L_graph + lam * L_node`` over one batch and its gradient."""
    cache = forward_batch(predictor, adjs, x)
    graph_err, node_err, ndiff = _errors(cache, target_cache)
    n_graphs = len(adjs)
    l_graph, l_node = float(graph_err.mean()), float(node_err.mean())
    g_w = 1.0 if graph_term else 0.0
    n_w = lam if node_term else 0.0
    objective = g_w * l_graph + n_w * l_node
    grad_graph = None
    grad_nodes = None
    if g_w:
        grad_graph = (2.0 * g_w / n_graphs) * (cache.graph_repr - target_cache.graph_repr)
    if n_w:
        sizes = np.diff(cache.offsets)
        row_scale = np.repeat(2.0 * n_w / (n_graphs * sizes), sizes)
        grad_nodes = ndiff * row_scale[:, None]
    grads = backward_batch(predictor, cache, grad_graph, grad_nodes)
    return objective, l_graph, l_node, grads


def train(train_set, cfg: TrainConfig = TrainConfig(), feature_kind: Optional[str] = None):
    """Fit a predictor to a frozen random target on ``train_set``.

    ``train_set`` is a :class:`GraphDataset` (labels, if any, are ignored:
    every graph is treated as training data) or a plain list of graphs.
    Returns the model; its ``trace`` holds one dict per epoch with the
    batch-size-weighted means of ``loss_graph``, ``loss_node`` and
    ``objective``.
    """
    cfg.validate()
    if isinstance(train_set, GraphDataset):
        graphs = list(train_set.graphs)
        feature_kind = train_set.feature_kind
    else:
        graphs = list(train_set)
        if feature_kind is None:
            feature_kind = ATTRIBUTED if graphs and graphs[0].features is not None else DEGREE_ONE_HOT
    if not graphs:
        raise EmptyTrainingSet("no training graphs")

    input_dim, max_degree = _input_dim(feature_kind, graphs)
    arch = GcnArch(input_dim, cfg.layer_dims)
    target = init_params(arch, cfg.seed_target)
    predictor = init_params(arch, cfg.seed_predictor)
    model = DistillModel(target, predictor, arch, feature_kind, max_degree, cfg.lam, cfg)

    feats = [model.featurize(g) for g in graphs]
    adjs_all = [g.norm_adj for g in graphs]
    # target outputs never change: compute once, slice per batch
    target_nodes, target_graph = [], []
    for a, x in zip(adjs_all, feats):
        c = forward_batch(target, [a], x)
        target_nodes.append(c.node_repr)
        target_graph.append(c.graph_repr[0])

    m = len(graphs)
    n_batches = math.ceil(m / cfg.batch_size)
    rng = np.random.default_rng(cfg.seed_shuffle)
    state = AdamState.for_params(predictor)
    trace = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(m)
        sums = np.zeros(3)
        for b in range(n_batches):
            idx = perm[b * cfg.batch_size: (b + 1) * cfg.batch_size]
            adjs = [adjs_all[i] for i in idx]
            x = np.concatenate([feats[i] for i in idx])
            tv = SimpleNamespace(
                node_repr=np.concatenate([target_nodes[i] for i in idx]),
                graph_repr=np.stack([target_graph[i] for i in idx]),
            )
            objective, l_graph, l_node, grads = objective_and_grads(
                predictor, tv, adjs, x, cfg.lam, cfg.graph_term, cfg.node_term
            )
            if not math.isfinite(objective):
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch + 1}, step {b + 1}")
            try:
                state, predictor = adam_step(state, predictor, grads, cfg.lr)
            except NonFiniteGradient as exc:
                raise NonFiniteGradient(f"epoch {epoch + 1}, step {b + 1}: {exc}") from exc
            sums += len(idx) * np.array([l_graph, l_node, objective])
        mean = sums / m
        trace.append(
            {"epoch": epoch + 1, "loss_graph": mean[0], "loss_node": mean[1], "objective": mean[2]}
        )
        log.debug("epoch %d objective %.6g", epoch + 1, mean[2])
    model.predictor = predictor
    model.trace = trace
    return model


def score_components(model: DistillModel, graphs: Sequence[Graph]) -> tuple[np.ndarray, np.ndarray]:
    """Per-graph squared graph error and mean node error."""
    graphs = list(graphs)
    graph_err = np.empty(len(graphs))
    node_err = np.empty(len(graphs))
    chunk = 256
    for s in range(0, len(graphs), chunk):
        part = graphs[s: s + chunk]
        adjs, x = _stack(model, part)
        ge, ne, _ = _errors(
            forward_batch(model.predictor, adjs, x), forward_batch(model.target, adjs, x)
        )
        graph_err[s: s + len(part)] = ge
        node_err[s: s + len(part)] = ne
    return graph_err, node_err


def score_many(
    model: DistillModel, graphs: Sequence[Graph], use_graph_term: bool = True, use_node_term: bool = True
) -> np.ndarray:
    if not (use_graph_term or use_node_term):
        raise NoTermEnabled("enable at least one score term")
    ge, ne = score_components(model, graphs)
    out = np.zeros(len(ge))
    if use_graph_term:
        out += ge
    if use_node_term:
        out += ne
    return out


def score(model: DistillModel, g: Graph) -> float:
    """Anomaly score: graph error plus mean node error (unit weight on both)."""
    return float(score_many(model, [g])[0])


def score_variant(model: DistillModel, g: Graph, use_graph_term: bool, use_node_term: bool) -> float:
    return float(score_many(model, [g], use_graph_term, use_node_term)[0])


def with_terms(cfg: TrainConfig, variant: str) -> TrainConfig:
    """Config for one ablation variant: ``full``, ``no_node`` or ``no_graph``."""
    if variant == "full":
        return replace(cfg, graph_term=True, node_term=True)
    if variant == "no_node":
        return replace(cfg, graph_term=True, node_term=False)
    if variant == "no_graph":
        return replace(cfg, graph_term=False, node_term=True)
    raise ValueError(f"unknown variant {variant!r}")
