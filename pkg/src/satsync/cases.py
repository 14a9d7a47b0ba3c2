"""The three benchmark networks and gain pairs used for the reproduction suite.

Only agent 1 sees the reference. Observer gains are ``f1 = 1.5, f2 = 0.5``,
which place the eigenvalues of ``A - FC`` at 0 and 0.5.
"""

from __future__ import annotations

from .engine import InitialConditions, SimConfig, default_record_every
from .graph import DegreeBounds, Graph, RootSet
from .protocol import GainSet

# one-based (from, to) pairs
CASE_EDGES = {
    "I": (3, [(1, 2), (2, 3)]),
    "II": (6, [(1, 2), (2, 3), (3, 1), (3, 4), (6, 3), (4, 5), (5, 6)]),
    "III": (60, [(i, i + 1) for i in range(1, 60)] + [(60, 1)]),
}

GAIN_PAIRS = {1: (0.5, 1.0), 2: (1.0, 2.0), 3: (1.5, 2.5)}
OBSERVER_GAINS = (1.5, 0.5)
SUITE_SEED = 1
SUITE_STEPS = 5000


def case_graph(case_id: str) -> Graph:
    try:
        nodes, edges = CASE_EDGES[case_id]
    except KeyError:
        raise ValueError(f"unknown case {case_id!r}; expected one of {sorted(CASE_EDGES)}") from None
    return Graph.from_edges(nodes, [(s - 1, d - 1, 1.0) for s, d in edges])


def suite_config(case_id: str, gains_id: int, mode: str = "partial-state",
                 steps: int = SUITE_STEPS, seed: int = SUITE_SEED,
                 record_every: int | None = None) -> SimConfig:
    g = case_graph(case_id)
    if gains_id not in GAIN_PAIRS:
        raise ValueError(f"unknown gain pair {gains_id!r}; expected one of {sorted(GAIN_PAIRS)}")
    k1, k2 = GAIN_PAIRS[gains_id]
    gains = GainSet(k1, k2, *OBSERVER_GAINS)
    if record_every is None:
        record_every = default_record_every(g.n_nodes)
    return SimConfig(n=1, graph=g, roots=RootSet([0], g.n_nodes),
                     bounds=DegreeBounds.for_graph(g), gains=gains, mode=mode,
                     steps=steps, record_every=record_every,
                     init=InitialConditions(seed=seed))
