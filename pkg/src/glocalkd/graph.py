"""Undirected graph model plus the two preprocessing steps every GCN
evaluation needs: symmetric normalized adjacency with self-loops, and
one-hot degree features for graphs that carry no node attributes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import FeatureShapeMismatch, OutOfRangeEndpoint, SelfLoopRejected


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected, unweighted graph.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``,
    sorted. Self-loops are never stored; they are only added inside
    :func:`normalized_adjacency`.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    features: Optional[np.ndarray] = None
    label: Optional[int] = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        if self.edges:
            e = np.asarray(self.edges)
            a[e[:, 0], e[:, 1]] = 1.0
            a[e[:, 1], e[:, 0]] = 1.0
        a.setflags(write=False)
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        d.setflags(write=False)
        return d

    @cached_property
    def norm_adj(self) -> np.ndarray:
        m = normalized_adjacency(self)
        m.setflags(write=False)
        return m

    def with_label(self, label: Optional[int]) -> "Graph":
        g = Graph(self.num_nodes, self.edges, self.features, label)
        return g

    def same_structure(self, other: "Graph") -> bool:
        if self.num_nodes != other.num_nodes or self.edges != other.edges:
            return False
        if (self.features is None) != (other.features is None):
            return False
        return self.features is None or np.array_equal(self.features, other.features)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.same_structure(other) and self.label == other.label

    __hash__ = object.__hash__


def build_graph(
    num_nodes: int,
    edges: Iterable[Sequence[int]],
    features=None,
    label: Optional[int] = None,
) -> Graph:
    """Validate and canonicalize a graph.

    Duplicate and reversed edges collapse to one ``(min, max)`` pair.
    """
    num_nodes = int(num_nodes)
    if num_nodes < 1:
        raise OutOfRangeEndpoint(f"graph needs at least one node, got {num_nodes}")
    canon = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < num_nodes and 0 <= j < num_nodes):
            raise OutOfRangeEndpoint(f"edge ({i}, {j}) outside [0, {num_nodes})")
        if i == j:
            raise SelfLoopRejected(f"self-loop on node {i}")
        canon.add((i, j) if i < j else (j, i))
    x = None
    if features is not None:
        x = np.array(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != num_nodes or x.shape[1] < 1:
            raise FeatureShapeMismatch(
                f"features must be {num_nodes} x n (n >= 1), got shape {x.shape}"
            )
        x.setflags(write=False)
    if label is not None:
        label = int(label)
    return Graph(num_nodes, tuple(sorted(canon)), x, label)


def normalized_adjacency(g: Graph) -> np.ndarray:
    """Return D~^-1/2 (A + I) D~^-1/2 as a dense N x N matrix."""
    a = np.array(g.adjacency, dtype=np.float64)
    a[np.diag_indices_from(a)] += 1.0
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def degree_features(g: Graph, max_degree: int) -> np.ndarray:
    """One-hot node degrees; degrees above ``max_degree`` share the last column."""
    if max_degree < 0:
        raise ValueError("max_degree must be non-negative")
    x = np.zeros((g.num_nodes, max_degree + 1))
    x[np.arange(g.num_nodes), np.minimum(g.degrees, max_degree)] = 1.0
    return x


def max_degree_of(graphs: Iterable[Graph]) -> int:
    return max((int(g.degrees.max()) for g in graphs), default=0)
