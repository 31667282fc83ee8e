"""Graph datasets: benchmark ingestion, canonical text snapshots, anomaly
labelling, stratified folds, training-set subsampling and contamination,
and a synthetic corpus with planted local and global anomalies.

All randomness goes through ``numpy.random.default_rng(seed)`` (PCG64),
whose output for a given seed is identical across platforms.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CrossGraphEdge,
    EmptyResult,
    FoldCountTooLarge,
    InputError,
    InvalidSpec,
    MalformedSnapshot,
    MissingFile,
    NodeWithoutGraphAssignment,
    PoolTooSmall,
    RaggedAttributeRow,
    UnknownClassId,
)
from .graph import Graph, build_graph

ATTRIBUTED = "attributed"
DEGREE_ONE_HOT = "degree-one-hot"
FEATURE_KINDS = (ATTRIBUTED, DEGREE_ONE_HOT)

SNAPSHOT_MAGIC = "glocalkd-dataset 1"
LOCAL_MODES = ("features", "motif")
GLOBAL_MODES = ("clique", "star", "hubless", "mixed")


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """Ordered graphs with aligned binary anomaly labels (1 = anomalous).

    ``labels`` is ``None`` for an unlabeled collection. ``classes`` keeps
    the original class id of each graph when the data came from a
    classification benchmark.
    """

    graphs: tuple[Graph, ...]
    labels: Optional[tuple[int, ...]]
    name: str = "dataset"
    feature_kind: str = ATTRIBUTED
    classes: Optional[tuple[int, ...]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if self.labels is not None:
            labels = tuple(int(v) for v in self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != len(self.graphs):
                raise InputError(f"{len(labels)} labels for {len(self.graphs)} graphs")
            if any(v not in (0, 1) for v in labels):
                raise InputError("labels must be 0 or 1")
            if labels and 0 not in labels:
                raise InputError("dataset needs at least one normal graph")
        if self.classes is not None:
            object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
            if len(self.classes) != len(self.graphs):
                raise InputError("classes not aligned with graphs")
        if self.feature_kind not in FEATURE_KINDS:
            raise InputError(f"unknown feature_kind {self.feature_kind!r}")
        if self.feature_kind == ATTRIBUTED:
            dims = {g.features.shape[1] for g in self.graphs if g.features is not None}
            if any(g.features is None for g in self.graphs):
                raise InputError("attributed dataset contains a graph without features")
            if len(dims) > 1:
                raise InputError(f"attributed graphs disagree on feature dimension: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def feature_dim(self) -> Optional[int]:
        if self.feature_kind != ATTRIBUTED or not self.graphs:
            return None
        return self.graphs[0].features.shape[1]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def label_array(self) -> np.ndarray:
        if self.labels is None:
            raise InputError(f"dataset {self.name!r} is unlabeled")
        return np.array(self.labels, dtype=np.int64)

    def subset(self, indices: Sequence[int], name: Optional[str] = None, **meta) -> "GraphDataset":
        idx = [int(i) for i in indices]
        return replace(
            self,
            graphs=tuple(self.graphs[i] for i in idx),
            labels=None if self.labels is None else tuple(self.labels[i] for i in idx),
            classes=None if self.classes is None else tuple(self.classes[i] for i in idx),
            name=name or self.name,
            meta={**self.meta, **meta},
        )

    def normals(self) -> "GraphDataset":
        return self.subset([i for i, v in enumerate(self.label_array()) if v == 0])

    def anomalies(self) -> list[Graph]:
        return [g for g, v in zip(self.graphs, self.label_array()) if v == 1]

    def summary(self) -> dict:
        n = max(len(self), 1)
        out = {
            "graphs": len(self),
            "mean_nodes": sum(g.num_nodes for g in self.graphs) / n,
            "mean_edges": sum(g.num_edges for g in self.graphs) / n,
        }
        out["anomaly_rate"] = None if self.labels is None else sum(self.labels) / n
        return out

    def same_as(self, other: "GraphDataset") -> bool:
        return (
            self.name == other.name
            and self.feature_kind == other.feature_kind
            and self.labels == other.labels
            and self.classes == other.classes
            and len(self) == len(other)
            and all(a.same_structure(b) for a, b in zip(self.graphs, other.graphs))
        )


# ---------------------------------------------------------------------------
# benchmark directory ingestion

def _read_rows(path: Path, kind: str, convert) -> list[list]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([convert(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: cannot parse {kind} row {line!r}") from exc
    return rows


def _find(directory: Path, name: str, suffix: str) -> Path:
    return directory / f"{name}_{suffix}.txt"


def _infer_name(directory: Path) -> str:
    hits = sorted(directory.glob("*_A.txt"))
    if not hits:
        raise MissingFile(f"no '<DS>_A.txt' in {directory}")
    return hits[0].name[: -len("_A.txt")]


def parse_benchmark_dir(path, name: Optional[str] = None) -> GraphDataset:
    """Read the multi-file text layout used by the public graph-kernel benchmarks.

    Node ids in the files are 1-based. Node attributes, when present, become
    the feature matrix; otherwise discrete node labels are one-hot encoded;
    otherwise the dataset is marked for degree features. The result is
    unlabeled; original graph classes sit in ``classes``.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise MissingFile(f"{directory} is not a directory")
    name = name or _infer_name(directory)
    required = {s: _find(directory, name, s) for s in ("A", "graph_indicator", "graph_labels")}
    for p in required.values():
        if not p.exists():
            raise MissingFile(f"missing {p}")

    indicator = [r[0] for r in _read_rows(required["graph_indicator"], "graph_indicator", int)]
    graph_classes = [r[0] for r in _read_rows(required["graph_labels"], "graph_labels", int)]
    num_graphs = len(graph_classes)
    n_nodes = len(indicator)
    for lineno, gid in enumerate(indicator, 1):
        if not 1 <= gid <= num_graphs:
            raise NodeWithoutGraphAssignment(
                f"{required['graph_indicator']}:{lineno}: node {lineno} assigned to unknown graph {gid}"
            )

    gid0 = np.array(indicator, dtype=np.int64) - 1
    counts = np.bincount(gid0, minlength=num_graphs)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0]) + 1
        raise NodeWithoutGraphAssignment(f"graph {missing} has no nodes")
    starts = np.concatenate([[0], np.cumsum(counts)])
    # nodes are usually contiguous per graph; map to local ids in first-seen order either way
    local = np.empty(n_nodes, dtype=np.int64)
    seen = np.zeros(num_graphs, dtype=np.int64)
    for node, g in enumerate(gid0):
        local[node] = seen[g]
        seen[g] += 1

    edges: list[list[tuple[int, int]]] = [[] for _ in range(num_graphs)]
    with open(required["A"]) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                u, v = (int(t) for t in line.split(","))
            except ValueError as exc:
                raise InputError(f"{required['A']}:{lineno}: cannot parse edge {line!r}") from exc
            if not (1 <= u <= n_nodes and 1 <= v <= n_nodes):
                raise NodeWithoutGraphAssignment(
                    f"{required['A']}:{lineno}: edge endpoint outside 1..{n_nodes}"
                )
            gu, gv = gid0[u - 1], gid0[v - 1]
            if gu != gv:
                raise CrossGraphEdge(
                    f"{required['A']}:{lineno}: edge {u}, {v} joins graphs {gu + 1} and {gv + 1}"
                )
            if u != v:
                edges[gu].append((int(local[u - 1]), int(local[v - 1])))

    features = None
    feature_kind = DEGREE_ONE_HOT
    attr_path = _find(directory, name, "node_attributes")
    label_path = _find(directory, name, "node_labels")
    if attr_path.exists():
        rows = _read_rows(attr_path, "node_attributes", float)
        if len(rows) != n_nodes:
            raise RaggedAttributeRow(f"{attr_path}: {len(rows)} rows for {n_nodes} nodes")
        width = len(rows[0])
        for lineno, r in enumerate(rows, 1):
            if len(r) != width:
                raise RaggedAttributeRow(f"{attr_path}:{lineno}: {len(r)} values, expected {width}")
        features = np.array(rows, dtype=np.float64)
        feature_kind = ATTRIBUTED
    elif label_path.exists():
        rows = _read_rows(label_path, "node_labels", int)
        if len(rows) != n_nodes:
            raise RaggedAttributeRow(f"{label_path}: {len(rows)} rows for {n_nodes} nodes")
        codes = np.array([r[0] for r in rows])
        values = np.unique(codes)
        features = (codes[:, None] == values[None, :]).astype(np.float64)
        feature_kind = ATTRIBUTED

    order = np.argsort(gid0, kind="stable")
    graphs = []
    for g in range(num_graphs):
        x = None
        if features is not None:
            x = features[order[starts[g]: starts[g + 1]]]
        graphs.append(build_graph(int(counts[g]), edges[g], x))
    return GraphDataset(
        tuple(graphs), None, name=name, feature_kind=feature_kind, classes=tuple(graph_classes)
    )


def write_benchmark_dir(ds: GraphDataset, path, name: Optional[str] = None) -> Path:
    """Write ``ds`` in the 1-based multi-file benchmark layout (both edge directions)."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or ds.name
    classes = ds.classes if ds.classes is not None else ds.labels
    if classes is None:
        raise InputError("dataset has neither classes nor labels to write")
    a_lines, ind_lines, attr_lines = [], [], []
    base = 0
    for gi, g in enumerate(ds.graphs):
        for i, j in g.edges:
            a_lines.append(f"{base + i + 1}, {base + j + 1}")
            a_lines.append(f"{base + j + 1}, {base + i + 1}")
        ind_lines.extend([str(gi + 1)] * g.num_nodes)
        if g.features is not None:
            attr_lines.extend(", ".join(repr(float(v)) for v in row) for row in g.features)
        base += g.num_nodes
    (directory / f"{name}_A.txt").write_text("\n".join(a_lines) + "\n")
    (directory / f"{name}_graph_indicator.txt").write_text("\n".join(ind_lines) + "\n")
    (directory / f"{name}_graph_labels.txt").write_text("\n".join(str(c) for c in classes) + "\n")
    if ds.feature_kind == ATTRIBUTED:
        (directory / f"{name}_node_attributes.txt").write_text("\n".join(attr_lines) + "\n")
    return directory


# ---------------------------------------------------------------------------
# canonical snapshot

def dumps_snapshot(ds: GraphDataset) -> str:
    dim = ds.feature_dim
    out = [
        SNAPSHOT_MAGIC,
        f"name {ds.name}",
        f"feature_kind {ds.feature_kind}",
        f"feature_dim {dim if dim is not None else 0}",
        f"labeled {'yes' if ds.is_labeled else 'no'}",
        f"num_graphs {len(ds)}",
    ]
    for gi, g in enumerate(ds.graphs):
        out.append(f"graph {gi}")
        out.append(f"nodes {g.num_nodes}")
        out.append(f"class {ds.classes[gi] if ds.classes is not None else '-'}")
        out.append(f"label {ds.labels[gi] if ds.labels is not None else '-'}")
        out.append(f"edges {g.num_edges}")
        out.extend(f"{i} {j}" for i, j in g.edges)
        if g.features is not None:
            out.append("features")
            out.extend(" ".join(repr(float(v)) for v in row) for row in g.features)
        out.append("end")
    return "\n".join(out) + "\n"


def write_snapshot(ds: GraphDataset, path) -> None:
    Path(path).write_bytes(dumps_snapshot(ds).encode("utf-8"))


def loads_snapshot(text: str, source: str = "<snapshot>") -> GraphDataset:
    lines = text.split("\n")
    pos = 0

    def take(prefix: Optional[str] = None) -> str:
        nonlocal pos
        if pos >= len(lines):
            raise MalformedSnapshot(f"{source}: unexpected end of file")
        line = lines[pos]
        pos += 1
        if prefix is not None:
            if not line.startswith(prefix + " ") and line != prefix:
                raise MalformedSnapshot(f"{source}:{pos}: expected {prefix!r}, got {line!r}")
            return line[len(prefix) + 1:]
        return line

    try:
        if take() != SNAPSHOT_MAGIC:
            raise MalformedSnapshot(f"{source}:1: not a dataset snapshot")
        name = take("name")
        kind = take("feature_kind")
        dim = int(take("feature_dim"))
        labeled = take("labeled") == "yes"
        count = int(take("num_graphs"))
        graphs, labels, classes = [], [], []
        for gi in range(count):
            if int(take("graph")) != gi:
                raise MalformedSnapshot(f"{source}:{pos}: graph blocks out of order")
            n = int(take("nodes"))
            c = take("class")
            lab = take("label")
            m = int(take("edges"))
            edges = [tuple(int(t) for t in take().split()) for _ in range(m)]
            x = None
            if lines[pos] == "features":
                take()
                x = np.array([[float(t) for t in take().split()] for _ in range(n)])
                if x.shape[1] != dim:
                    raise MalformedSnapshot(f"{source}: graph {gi} feature width {x.shape[1]} != {dim}")
            take("end")
            graphs.append(build_graph(n, edges, x))
            classes.append(None if c == "-" else int(c))
            labels.append(None if lab == "-" else int(lab))
    except (ValueError, IndexError) as exc:
        if isinstance(exc, InputError):
            raise
        raise MalformedSnapshot(f"{source}:{pos}: {exc}") from exc
    return GraphDataset(
        tuple(graphs),
        tuple(labels) if labeled else None,
        name=name,
        feature_kind=kind,
        classes=None if any(c is None for c in classes) else tuple(classes),
    )


def read_snapshot(path) -> GraphDataset:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"no snapshot at {p}")
    return loads_snapshot(p.read_text(encoding="utf-8"), source=str(p))


def file_checksum(path) -> str:
    p = Path(path)
    h = hashlib.sha256()
    if p.is_dir():
        for f in sorted(p.iterdir()):
            if f.is_file():
                h.update(f.name.encode())
                h.update(f.read_bytes())
    else:
        h.update(p.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# labels, folds, training-set manipulation

def to_anomaly_labels(ds: GraphDataset, anomaly_class: Optional[int] = None) -> GraphDataset:
    """Mark one original class as anomalous (default: the rarest, ties to smallest id)."""
    if ds.classes is None:
        raise UnknownClassId(f"dataset {ds.name!r} carries no class ids")
    counts = Counter(ds.classes)
    if anomaly_class is None:
        anomaly_class = min(counts, key=lambda c: (counts[c], c))
    elif anomaly_class not in counts:
        raise UnknownClassId(f"class {anomaly_class} not in {sorted(counts)}")
    labels = tuple(int(c == anomaly_class) for c in ds.classes)
    return replace(ds, labels=labels, meta={**ds.meta, "anomaly_class": anomaly_class})


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]
    seed: int

    def test_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f != fold]


def stratified_kfold(ds: GraphDataset, k: int, seed: int) -> FoldPlan:
    """Shuffle each class, then deal graphs round-robin into ``k`` folds.

    The dealing position carries over from one class to the next, so total
    fold sizes differ by at most one as well as per-class counts.
    """
    if k < 2:
        raise FoldCountTooLarge(f"need k >= 2, got {k}")
    if k > len(ds):
        raise FoldCountTooLarge(f"k={k} exceeds {len(ds)} graphs")
    labels = ds.label_array() if ds.is_labeled else np.zeros(len(ds), dtype=np.int64)
    rng = np.random.default_rng(seed)
    assign = np.empty(len(ds), dtype=np.int64)
    pos = 0
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        assign[members] = (pos + np.arange(members.size)) % k
        pos = (pos + members.size) % k
    return FoldPlan(k, tuple(int(a) for a in assign), seed)


def split_fold(
    ds: GraphDataset, plan: FoldPlan, fold: int, keep_anomalies: bool = False
) -> tuple[GraphDataset, GraphDataset]:
    """Training set (normal graphs only unless ``keep_anomalies``) and full test fold."""
    train_idx = plan.train_indices(fold)
    if not keep_anomalies and ds.is_labeled:
        train_idx = [i for i in train_idx if ds.labels[i] == 0]
    return (
        ds.subset(train_idx, fold=fold, split="train"),
        ds.subset(plan.test_indices(fold), fold=fold, split="test"),
    )


def subsample_training(train: GraphDataset, fraction: float, seed: int) -> GraphDataset:
    """Keep ``ceil(fraction * len)`` graphs drawn without replacement; order preserved."""
    if not 0.0 < fraction <= 1.0:
        raise InputError(f"fraction must lie in (0, 1], got {fraction}")
    n = math.ceil(Fraction(fraction).limit_denominator(10**9) * len(train))
    if n == 0:
        raise EmptyResult(f"fraction {fraction} of {len(train)} graphs leaves nothing")
    if n == len(train):
        return train
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(train), size=n, replace=False))
    return train.subset(keep, subsample_fraction=fraction)


def contamination_count(n_normals: int, rate: float) -> int:
    """Smallest m with m >= rate * (n_normals + m)."""
    r = Fraction(rate).limit_denominator(10**9)
    if r == 0:
        return 0
    return math.ceil(r * n_normals / (1 - r))


def inject_contamination(
    train_normals: GraphDataset, anomaly_pool: Sequence[Graph], rate: float, seed: int
) -> GraphDataset:
    """Mix unlabeled anomalies into a normal training set at the given rate."""
    if not 0.0 <= rate <= 0.5:
        raise InputError(f"contamination rate must lie in [0, 0.5], got {rate}")
    pool = list(anomaly_pool.graphs if isinstance(anomaly_pool, GraphDataset) else anomaly_pool)
    m = contamination_count(len(train_normals), rate)
    if m == 0:
        return train_normals
    if m > len(pool):
        raise PoolTooSmall(f"rate {rate} needs {m} anomalies, pool has {len(pool)}")
    rng = np.random.default_rng(seed)
    picked = [pool[i].with_label(None) for i in rng.choice(len(pool), size=m, replace=False)]
    graphs = list(train_normals.graphs) + picked
    order = rng.permutation(len(graphs))
    return GraphDataset(
        tuple(graphs[i] for i in order),
        None,
        name=train_normals.name,
        feature_kind=train_normals.feature_kind,
        meta={**train_normals.meta, "contamination_rate": rate, "injected": m},
    )


# ---------------------------------------------------------------------------
# synthetic corpus

@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic corpus.

    Normal graphs are random recursive trees. Each node draws one of
    ``n_types`` prototype feature vectors and adds Gaussian noise of scale
    ``noise``. Local anomalies are normal trees in which ``outlier_nodes``
    nodes get their prototype displaced by ``outlier_shift`` noise scales in
    every dimension (``local_mode="features"``), or trees with ``motifs``
    cliques of ``motif_size`` extra nodes attached by one bridge edge each
    (``local_mode="motif"``). Global anomalies (``global_mode``) are
    near-cliques (complete graphs with a fraction ``clique_drop`` of edges
    removed), stars, hubless trees whose degrees never exceed ``hub_cap``,
    or an alternation of near-cliques and hubless trees, all carrying
    normal-looking features.
    With ``feature_kind="degree-one-hot"`` no node features are stored.
    """

    n_normal: int = 180
    n_local: int = 0
    n_global: int = 20
    min_nodes: int = 10
    max_nodes: int = 20
    feature_dim: int = 8
    n_types: int = 4
    noise: float = 0.1
    outlier_nodes: int = 1
    outlier_shift: float = 10.0
    clique_drop: float = 0.1
    feature_kind: str = ATTRIBUTED
    local_mode: str = "features"
    motif_size: int = 5
    motifs: int = 1
    global_mode: str = "clique"
    hub_cap: int = 3
    name: str = "synthetic"

    def validate(self) -> None:
        problems = []
        for f in ("n_normal", "n_local", "n_global", "outlier_nodes"):
            if getattr(self, f) < 0:
                problems.append(f"{f} must be >= 0")
        if self.n_normal < 1:
            problems.append("n_normal must be >= 1")
        if not 2 <= self.min_nodes <= self.max_nodes:
            problems.append("need 2 <= min_nodes <= max_nodes")
        if self.feature_dim < 1:
            problems.append("feature_dim must be >= 1")
        if self.n_types < 1:
            problems.append("n_types must be >= 1")
        if self.noise <= 0:
            problems.append("noise must be > 0")
        if self.n_local and not 1 <= self.outlier_nodes <= self.min_nodes:
            problems.append("outlier_nodes must lie in [1, min_nodes]")
        if not 0 <= self.clique_drop < 0.2:
            problems.append("clique_drop must lie in [0, 0.2)")
        if self.feature_kind not in FEATURE_KINDS:
            problems.append(f"feature_kind must be one of {FEATURE_KINDS}")
        if self.local_mode not in LOCAL_MODES:
            problems.append(f"local_mode must be one of {LOCAL_MODES}")
        if self.local_mode != "motif" and self.n_local and self.feature_kind != ATTRIBUTED:
            problems.append("feature outliers need feature_kind=attributed")
        if self.global_mode not in GLOBAL_MODES:
            problems.append(f"global_mode must be one of {GLOBAL_MODES}")
        if self.hub_cap < 2:
            problems.append("hub_cap must be >= 2")
        if self.motifs < 1:
            problems.append("motifs must be >= 1")
        if self.motif_size < 3:
            problems.append("motif_size must be >= 3")
        if problems:
            raise InvalidSpec("; ".join(problems))

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthSpec":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise InvalidSpec(f"unknown synth key {key!r}")
            default = known[key].default
            try:
                kwargs[key] = type(default)(raw) if not isinstance(default, str) else str(raw)
            except ValueError as exc:
                raise InvalidSpec(f"{key}: cannot parse {raw!r}") from exc
        spec = cls(**kwargs)
        spec.validate()
        return spec


def prototypes(spec: SynthSpec, seed: int) -> np.ndarray:
    """``n_types x feature_dim`` node-type prototypes, standard normal entries."""
    return np.random.default_rng([seed, 0]).standard_normal((spec.n_types, spec.feature_dim))


def _random_tree(rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    return [(int(rng.integers(0, i)), i) for i in range(1, n)]


def _near_clique(rng: np.random.Generator, n: int, drop: float) -> list[tuple[int, int]]:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    n_drop = int(math.floor(drop * len(edges)))
    if n_drop:
        gone = set(rng.choice(len(edges), size=n_drop, replace=False).tolist())
        edges = [e for k, e in enumerate(edges) if k not in gone]
    return edges


def _capped_tree(rng: np.random.Generator, n: int, cap: int) -> list[tuple[int, int]]:
    """Random recursive tree in which no node exceeds degree ``cap``."""
    deg = np.zeros(n, dtype=np.int64)
    edges = []
    for i in range(1, n):
        open_nodes = np.flatnonzero(deg[:i] < cap)
        j = int(open_nodes[rng.integers(0, open_nodes.size)])
        edges.append((j, i))
        deg[i] += 1
        deg[j] += 1
    return edges


def synth_corpus(spec: SynthSpec, seed: int) -> GraphDataset:
    """Labelled synthetic corpus: normals first, then local, then global anomalies.

    ``meta["node_types"]`` records each graph's per-node prototype index and
    ``meta["outliers"]`` the displaced rows of each local anomaly.
    """
    spec.validate()
    rng = np.random.default_rng([seed, 1])
    protos = prototypes(spec, seed)
    attributed = spec.feature_kind == ATTRIBUTED
    graphs, labels, node_types, outliers = [], [], [], []

    def features(n):
        types = rng.integers(0, spec.n_types, size=n)
        x = protos[types] + spec.noise * rng.standard_normal((n, spec.feature_dim))
        node_types.append(types)
        return x

    def size():
        return int(rng.integers(spec.min_nodes, spec.max_nodes + 1))

    def add(n, edges, x, label, bad=()):
        graphs.append(build_graph(n, edges, x if attributed else None, label))
        labels.append(label)
        outliers.append(tuple(int(b) for b in bad))

    for _ in range(spec.n_normal):
        n = size()
        add(n, _random_tree(rng, n), features(n), 0)
    for _ in range(spec.n_local):
        n = size()
        edges = _random_tree(rng, n)
        x = features(n)
        bad = ()
        if spec.local_mode == "features":
            bad = sorted(rng.choice(n, size=spec.outlier_nodes, replace=False).tolist())
            types = node_types[-1]
            for node in bad:
                signs = rng.choice([-1.0, 1.0], size=spec.feature_dim)
                x[node] = protos[types[node]] + spec.outlier_shift * spec.noise * signs
        else:
            k = spec.motif_size
            tree_nodes = n
            for _ in range(spec.motifs):
                # anchor on the original tree so motifs never chain together
                anchor = int(rng.integers(0, tree_nodes))
                edges += [(n + i, n + j) for i in range(k) for j in range(i + 1, k)]
                edges.append((anchor, n))
                extra = features(k)
                node_types[-2] = np.concatenate([node_types[-2], node_types.pop()])
                x = np.vstack([x, extra])
                n += k
        add(n, edges, x, 1, bad)
    for i in range(spec.n_global):
        n = size()
        mode = spec.global_mode
        if mode == "mixed":
            mode = "hubless" if i % 2 else "clique"
        if mode == "star":
            edges = [(0, j) for j in range(1, n)]
        elif mode == "hubless":
            edges = _capped_tree(rng, n, spec.hub_cap)
        else:
            edges = _near_clique(rng, n, spec.clique_drop)
        add(n, edges, features(n), 1)
    return GraphDataset(
        tuple(graphs),
        tuple(labels),
        name=spec.name,
        feature_kind=spec.feature_kind,
        meta={
            "synth_seed": seed,
            "prototypes": protos,
            "node_types": tuple(node_types),
            "outliers": tuple(outliers),
        },
    )
