import numpy as np
import pytest

from satsync.cases import case_graph
from satsync.graph import DegreeBounds, Graph, RootSet

_ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_line():
    """Record one pass/fail line for the acceptance summary."""
    def _add(criterion, ok, detail):
        _ACCEPTANCE_LINES.append(f"[{criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return _add


@pytest.fixture
def case1():
    g = case_graph("I")
    return g, RootSet([0], 3), DegreeBounds.for_graph(g)


def random_rooted_graph(rng, n_nodes, n_roots=1, extra_edge_prob=0.3, weight_range=(0.5, 2.0)):
    """Random digraph in which every node is reachable from the root set."""
    roots = rng.choice(n_nodes, size=n_roots, replace=False)
    w = np.zeros((n_nodes, n_nodes))
    reached = list(roots)
    pending = [i for i in rng.permutation(n_nodes) if i not in set(roots)]
    for i in pending:
        j = rng.choice(reached)
        w[i, j] = rng.uniform(*weight_range)
        reached.append(i)
    mask = (rng.random((n_nodes, n_nodes)) < extra_edge_prob) & (w == 0)
    np.fill_diagonal(mask, False)
    w[mask] = rng.uniform(*weight_range, size=mask.sum())
    return Graph(w), RootSet(roots.tolist(), n_nodes)
