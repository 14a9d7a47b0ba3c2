"""Directed communication graphs and the matrices derived from them.

Node indices are zero-based throughout the Python API; the configuration
files use one-based ids and are converted on load.

``weights[i, j]`` is the weight of the edge from node ``j`` to node ``i``,
i.e. agent ``i`` receives information from agent ``j``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Graph:
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("adjacency has non-finite weights")
        if np.any(w < 0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-loops are not allowed (a_ii must be 0)")
        object.__setattr__(self, "weights", w)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int, float]]) -> "Graph":
        """Build from ``(source, target, weight)`` triples with zero-based ids.

        Repeated edges accumulate their weights.
        """
        if n_nodes < 1:
            raise ValueError("graph needs at least one node")
        w = np.zeros((n_nodes, n_nodes))
        for src, dst, weight in edges:
            if not (0 <= src < n_nodes and 0 <= dst < n_nodes):
                raise ValueError(f"edge ({src}, {dst}) outside 0..{n_nodes - 1}")
            if src == dst:
                raise ValueError(f"self-loop on node {src}")
            w[dst, src] += weight
        return cls(w)

    def edges(self) -> list[tuple[int, int, float]]:
        """Edges as ``(source, target, weight)``, ordered by target then source."""
        rows, cols = np.nonzero(self.weights)
        return [(int(j), int(i), float(self.weights[i, j])) for i, j in zip(rows, cols)]


@dataclass(frozen=True)
class RootSet:
    """Agents that see their own output relative to the reference."""

    members: frozenset
    n_nodes: int

    def __init__(self, members: Iterable[int], n_nodes: int):
        m = frozenset(int(i) for i in members)
        if not m:
            raise ValueError("roots required: the root set must be nonempty")
        bad = sorted(i for i in m if not 0 <= i < n_nodes)
        if bad:
            raise ValueError(f"root ids {bad} outside 0..{n_nodes - 1}")
        object.__setattr__(self, "members", m)
        object.__setattr__(self, "n_nodes", int(n_nodes))

    @property
    def indicator(self) -> np.ndarray:
        iota = np.zeros(self.n_nodes)
        iota[sorted(self.members)] = 1.0
        return iota


@dataclass(frozen=True)
class DegreeBounds:
    """Per-node upper bounds on the weighted in-degree."""

    dbar_in: np.ndarray

    def __post_init__(self):
        d = _frozen(self.dbar_in)
        if d.ndim != 1 or np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("degree bounds must be a vector of finite nonnegative reals")
        object.__setattr__(self, "dbar_in", d)

    @classmethod
    def for_graph(cls, g: Graph, values: Sequence[float] | None = None) -> "DegreeBounds":
        """Tight bounds by default; explicit ``values`` are checked against ``g``."""
        d_in = in_degrees(g)
        if values is None:
            return cls(d_in)
        b = cls(values)
        if b.dbar_in.shape != d_in.shape:
            raise ValueError(f"bounds: expected {d_in.size} entries, got {b.dbar_in.size}")
        low = np.nonzero(b.dbar_in < d_in)[0]
        if low.size:
            raise ValueError(f"bounds: below the actual in-degree at nodes {low.tolist()}")
        return b


@dataclass(frozen=True)
class NetworkMatrices:
    laplacian: np.ndarray
    expanded_laplacian: np.ndarray
    dbar: np.ndarray


def in_degrees(g: Graph) -> np.ndarray:
    return g.weights.sum(axis=1)


def build_laplacian(g: Graph) -> np.ndarray:
    lap = -g.weights.copy()
    lap[np.diag_indices_from(lap)] = in_degrees(g)
    return lap


def expand_laplacian(lap, s: RootSet) -> np.ndarray:
    """Laplacian plus the root-set indicator on the diagonal."""
    lbar = np.array(lap, dtype=float)
    lbar[np.diag_indices_from(lbar)] += s.indicator
    return lbar


def build_dbar(lbar, bounds: DegreeBounds) -> np.ndarray:
    """``I - diag(1 / (2 + dbar_in)) @ lbar``.

    The upper bounds (not the actual in-degrees) set the scaling, since those
    are what each agent divides by in its protocol.
    """
    lbar = np.asarray(lbar, dtype=float)
    scale = 1.0 / (2.0 + bounds.dbar_in)
    return np.eye(lbar.shape[0]) - scale[:, None] * lbar


def in_graph_set(g: Graph, s: RootSet) -> bool:
    """True iff every node is reachable from some root along directed edges."""
    seen = set(s.members)
    queue = deque(seen)
    w = g.weights
    while queue:
        j = queue.popleft()
        for i in np.nonzero(w[:, j] > 0)[0]:
            if int(i) not in seen:
                seen.add(int(i))
                queue.append(int(i))
    return len(seen) == g.n_nodes


def network_matrices(g: Graph, s: RootSet, bounds: DegreeBounds) -> NetworkMatrices:
    lap = build_laplacian(g)
    lbar = expand_laplacian(lap, s)
    return NetworkMatrices(lap, lbar, build_dbar(lbar, bounds))
