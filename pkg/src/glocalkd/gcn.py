"""Dense float64 GCN: forward pass, max-pool readout, exact reverse-mode
gradients, Kaiming-uniform initialization and Adam.

The single-graph functions (:func:`gcn_forward`, :func:`gcn_backward`) are
thin wrappers over a batched path that stacks the node rows of several
graphs. Feature transforms ``H @ W`` then run as one matrix product for the
whole batch, while propagation by each graph's normalized adjacency runs
block by block.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CacheMismatch, NonFiniteGradient, ShapeMismatch

DEFAULT_LAYER_DIMS = (512, 512, 256)


@dataclass(frozen=True)
class GcnArch:
    input_dim: int
    layer_dims: tuple[int, ...] = DEFAULT_LAYER_DIMS

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if self.input_dim < 1:
            raise ShapeMismatch(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.layer_dims or min(self.layer_dims) < 1:
            raise ShapeMismatch(f"layer_dims must be non-empty and positive, got {self.layer_dims}")

    @property
    def depth(self) -> int:
        return len(self.layer_dims)

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def shapes(self) -> list[tuple[int, int]]:
        dims = (self.input_dim,) + self.layer_dims
        return [(dims[i], dims[i + 1]) for i in range(self.depth)]

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "layer_dims": list(self.layer_dims)}

    @classmethod
    def from_dict(cls, d: dict) -> "GcnArch":
        return cls(int(d["input_dim"]), tuple(d["layer_dims"]))


@dataclass
class GcnParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def arch(self) -> GcnArch:
        return GcnArch(self.weights[0].shape[0], tuple(w.shape[1] for w in self.weights))

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "GcnParams":
        return GcnParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "GcnParams":
        return GcnParams(
            [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases]
        )

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def equals(self, other: "GcnParams") -> bool:
        mine, theirs = self.arrays(), other.arrays()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs)
        )

    def to_dict(self, seed: Optional[int] = None) -> dict:
        """Self-describing snapshot; arrays are row-major little-endian float64, base64."""

        def enc(a):
            return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")

        return {
            "arch": self.arch.to_dict(),
            "seed": seed,
            "layers": [
                {"weight": enc(w), "bias": enc(b)} for w, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GcnParams":
        arch = GcnArch.from_dict(d["arch"])
        if len(d["layers"]) != arch.depth:
            raise ShapeMismatch("layer count does not match arch descriptor")
        weights, biases = [], []
        for (fan_in, fan_out), layer in zip(arch.shapes(), d["layers"]):
            w = np.frombuffer(base64.b64decode(layer["weight"]), dtype="<f8")
            b = np.frombuffer(base64.b64decode(layer["bias"]), dtype="<f8")
            if w.size != fan_in * fan_out or b.size != fan_out:
                raise ShapeMismatch("parameter blob size does not match arch descriptor")
            weights.append(w.astype(np.float64).reshape(fan_in, fan_out))
            biases.append(b.astype(np.float64))
        return cls(weights, biases)


def init_params(arch: GcnArch, seed: int) -> GcnParams:
    """Kaiming-uniform weights, bound sqrt(6 / fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in arch.shapes():
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return GcnParams(weights, biases)


@dataclass
class ForwardCache:
    """Intermediates of a (possibly batched) forward pass.

    ``pre[l]`` and ``post[l]`` are the stacked pre- and post-activation
    matrices of layer ``l``; ``inputs`` is the stacked feature matrix.
    ``graph_repr[g]`` is the max-pooled output of graph ``g`` and
    ``argmax[g, d]`` the (global) row that won dimension ``d``.
    """

    inputs: np.ndarray
    adjs: list[np.ndarray]
    offsets: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]
    graph_repr: np.ndarray
    argmax: np.ndarray
    shapes: list[tuple[int, int]] = field(default_factory=list)

    @property
    def node_repr(self) -> np.ndarray:
        return self.post[-1]

    @property
    def num_graphs(self) -> int:
        return len(self.adjs)

    def node_slice(self, g: int) -> slice:
        return slice(int(self.offsets[g]), int(self.offsets[g + 1]))

    # single-graph aliases
    @property
    def h_graph(self) -> np.ndarray:
        return self.graph_repr[0]


def readout_max(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise max over node rows and the winning row per column.

    ``np.argmax`` returns the first maximal row, so ties go to the smallest
    node index.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] < 1:
        raise ShapeMismatch(f"readout needs a non-empty N x k matrix, got shape {h.shape}")
    idx = np.argmax(h, axis=0)
    return h[idx, np.arange(h.shape[1])], idx


def _propagate(adjs: Sequence[np.ndarray], offsets: np.ndarray, m: np.ndarray) -> np.ndarray:
    if len(adjs) == 1:
        return adjs[0] @ m
    out = np.empty_like(m)
    for g, a in enumerate(adjs):
        s, e = offsets[g], offsets[g + 1]
        out[s:e] = a @ m[s:e]
    return out


def forward_batch(params: GcnParams, adjs: Sequence[np.ndarray], x: np.ndarray) -> ForwardCache:
    """Forward pass over graphs whose node rows are stacked in ``x``."""
    adjs = list(adjs)
    sizes = np.array([a.shape[0] for a in adjs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    x = np.asarray(x, dtype=np.float64)
    shapes = [w.shape for w in params.weights]
    if x.ndim != 2 or x.shape[0] != offsets[-1]:
        raise ShapeMismatch(f"feature rows {x.shape} do not match {int(offsets[-1])} nodes")
    if x.shape[1] != shapes[0][0]:
        raise ShapeMismatch(f"feature width {x.shape[1]} != input dim {shapes[0][0]}")
    for a in adjs:
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeMismatch(f"adjacency must be square, got {a.shape}")

    pre, post = [], []
    h = x
    for w, b in zip(params.weights, params.biases):
        # A (H W) == (A H) W; pick the cheaper order
        if w.shape[0] < w.shape[1]:
            z = _propagate(adjs, offsets, h) @ w
        else:
            z = _propagate(adjs, offsets, h @ w)
        z += b
        pre.append(z)
        h = np.maximum(z, 0.0)
        post.append(h)

    k = h.shape[1]
    graph_repr = np.empty((len(adjs), k))
    argmax = np.empty((len(adjs), k), dtype=np.int64)
    cols = np.arange(k)
    for g in range(len(adjs)):
        s, e = offsets[g], offsets[g + 1]
        idx = np.argmax(h[s:e], axis=0)
        graph_repr[g] = h[s + idx, cols]
        argmax[g] = s + idx
    return ForwardCache(x, adjs, offsets, pre, post, graph_repr, argmax, shapes)


def gcn_forward(params: GcnParams, adj: np.ndarray, x: np.ndarray) -> ForwardCache:
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != np.asarray(x).shape[0]:
        raise ShapeMismatch(f"adjacency {adj.shape} does not match features {np.shape(x)}")
    return forward_batch(params, [adj], x)


def backward_batch(
    params: GcnParams,
    cache: ForwardCache,
    grad_graph: Optional[np.ndarray],
    grad_nodes: Optional[np.ndarray],
) -> GcnParams:
    """Gradients of a scalar loss w.r.t. weights and biases.

    ``grad_graph`` (G x k) is the loss cotangent of each graph's max-pooled
    representation, ``grad_nodes`` (total nodes x k) that of the output node
    rows. Either may be ``None`` for zero.
    """
    if [w.shape for w in params.weights] != list(cache.shapes):
        raise CacheMismatch("cache was produced by parameters of a different shape")
    h_out = cache.post[-1]
    if grad_nodes is None:
        grad = np.zeros_like(h_out)
    else:
        grad = np.array(grad_nodes, dtype=np.float64)
        if grad.shape != h_out.shape:
            raise CacheMismatch(f"node gradient shape {grad.shape} != {h_out.shape}")
    if grad_graph is not None:
        gg = np.asarray(grad_graph, dtype=np.float64).reshape(cache.graph_repr.shape)
        cols = np.arange(gg.shape[1])
        for g in range(gg.shape[0]):
            np.add.at(grad, (cache.argmax[g], cols), gg[g])

    out = params.zeros_like()
    for l in range(len(params.weights) - 1, -1, -1):
        dz = grad * (cache.pre[l] > 0.0)
        out.biases[l] = dz.sum(axis=0)
        # adjacency is symmetric, so its transpose is itself
        dp = _propagate(cache.adjs, cache.offsets, dz)
        h_in = cache.post[l - 1] if l > 0 else cache.inputs
        out.weights[l] = h_in.T @ dp
        if l > 0:
            grad = dp @ params.weights[l].T
    return out


def gcn_backward(params: GcnParams, cache: ForwardCache, grad_hG, grad_H) -> GcnParams:
    if cache.num_graphs != 1:
        raise CacheMismatch("gcn_backward expects a single-graph cache; use backward_batch")
    return backward_batch(params, cache, None if grad_hG is None else np.reshape(grad_hG, (1, -1)), grad_H)


@dataclass
class AdamState:
    m: GcnParams
    v: GcnParams
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: GcnParams) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like())


def adam_step(
    state: AdamState, params: GcnParams, grads: GcnParams, lr: float
) -> tuple[AdamState, GcnParams]:
    """One bias-corrected Adam update. Returns new state and params; inputs untouched."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    bad = [i for i, g in enumerate(grads.arrays()) if not np.isfinite(g).all()]
    if bad:
        raise NonFiniteGradient(f"non-finite gradient in parameter arrays {bad} at step {state.t + 1}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    k = len(params.weights)

    def pack(arrs):
        return GcnParams(arrs[:k], arrs[k:])

    return (
        AdamState(pack(new_m), pack(new_v), t, b1, b2, state.eps),
        pack(new_p),
    )
