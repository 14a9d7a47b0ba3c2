import dataclasses

import numpy as np
import pytest

from satsync.cases import case_graph, suite_config
from satsync.dynamics import agent_step, exo_step, output, plant_matrices
from satsync.engine import (
    ConfigError,
    InitialConditions,
    SimConfig,
    Trajectory,
    run,
    sync_metrics,
)
from satsync.graph import DegreeBounds, Graph, RootSet, in_degrees, network_matrices
from satsync.protocol import (
    FullStateController,
    GainSet,
    PartialStateController,
    broadcast,
    compute_zeta_bar,
    compute_zeta_hat,
    full_state_step,
    partial_state_step,
)

from conftest import random_rooted_graph


def make_cfg(g, roots, mode="partial-state", gains=GainSet(1.0, 2.0), steps=100, seed=0,
             bounds=None, record_every=1, **init):
    return SimConfig(n=1 if "n" not in init else init.pop("n"), graph=g,
                     roots=RootSet(roots, g.n_nodes),
                     bounds=bounds or DegreeBounds.for_graph(g), gains=gains, mode=mode,
                     steps=steps, record_every=record_every,
                     init=InitialConditions(seed=seed, **init))


def test_single_synchronized_agent_stays_synchronized():
    g = Graph(np.zeros((1, 1)))
    cfg = make_cfg(g, [0], mode="full-state", agent_states=[[3.0, -1.0]], exo_state=[3.0, -1.0])
    tr = run(cfg)
    assert np.all(tr.sync_error_inf == 0)
    assert np.all(tr.error_series == 0)


@pytest.mark.parametrize("steps, every", [(10, 1), (10, 3), (7, 7), (5000, 10), (1, 5)])
def test_snapshot_count(steps, every):
    cfg = make_cfg(case_graph("I"), [0], steps=steps, record_every=every)
    tr = run(cfg)
    assert len(tr.times) == -(-steps // every) + 1
    assert tr.times[0] == 0 and tr.times[-1] == steps
    assert tr.error_series.shape == (steps + 1,)


@pytest.mark.parametrize("mode", ["full-state", "partial-state"])
def test_runs_are_bit_identical(mode):
    cfg = make_cfg(case_graph("II"), [0], mode=mode, steps=300, seed=42)
    a, b = run(cfg), run(cfg)
    for field in ("x", "xr", "chi", "u", "sat_u", "error_series"):
        assert np.array_equal(getattr(a, field), getattr(b, field)), field


@pytest.mark.parametrize("mode", ["full-state", "partial-state"])
def test_engine_matches_per_agent_controllers(mode):
    """Stacked engine tick == N independent controllers exchanging packets."""
    rng = np.random.default_rng(9)
    g, s = random_rooted_graph(rng, 5, n_roots=2)
    bounds = DegreeBounds.for_graph(g, in_degrees(g) + rng.uniform(0, 1, 5))
    gains = GainSet(1.5, 2.5, 1.2, 0.4)
    cfg = SimConfig(n=2, graph=g, roots=s, bounds=bounds, gains=gains, mode=mode, steps=80,
                    init=InitialConditions(seed=3))
    tr = run(cfg)

    x, xr, chi0, xhat0 = cfg.init.resolve(5, 2)
    iota = s.indicator.astype(int)
    if mode == "full-state":
        ctrls = [FullStateController.create(2, int(iota[i]), bounds.dbar_in[i], chi0[i]) for i in range(5)]
    else:
        ctrls = [PartialStateController.create(2, int(iota[i]), bounds.dbar_in[i], chi0[i], xhat0[i])
                 for i in range(5)]
    for t in range(cfg.steps):
        np.testing.assert_allclose(np.array([c.chi for c in ctrls]), tr.chi[t], rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(x, tr.x[t], rtol=1e-12, atol=1e-9)
        packets = [broadcast(c, gains) for c in ctrls]
        new, us = [], []
        for i, c in enumerate(ctrls):
            if mode == "full-state":
                zb = compute_zeta_bar(i, x, xr, g, s, bounds)
                zh = compute_zeta_hat(i, packets, g, bounds)
                c2, u = full_state_step(c, zb, zh, gains)
            else:
                zb = compute_zeta_bar(i, output(x), output(xr), g, s, bounds)
                zh1, zh2 = compute_zeta_hat(i, packets, g, bounds)
                c2, u = partial_state_step(c, zb, zh1, zh2, packets[i].xi2, gains)
            new.append(c2)
            us.append(u)
        x = np.array([agent_step(x[i], us[i]) for i in range(5)])
        xr = exo_step(xr)
        ctrls = new


def test_full_state_error_follows_dbar_kron_a_on_random_graphs():
    rng = np.random.default_rng(21)
    a, _, _ = plant_matrices(1)
    for trial in range(20):
        n_nodes = int(rng.integers(1, 8))
        g, s = random_rooted_graph(rng, n_nodes)
        cfg = make_cfg(g, sorted(s.members), mode="full-state", steps=60, seed=trial,
                       gains=GainSet(0.5, 1.0))
        tr = run(cfg)
        m = np.kron(network_matrices(g, s, cfg.bounds).dbar, a)
        e = (tr.x - tr.xr[:, None, :] - tr.chi).reshape(len(tr.times), -1)
        expected = e[0]
        for t in range(1, len(tr.times)):
            expected = m @ expected
            np.testing.assert_allclose(e[t], expected, rtol=0, atol=1e-8)


def test_observer_error_follows_observer_dynamics_on_random_graphs():
    rng = np.random.default_rng(22)
    for trial in range(20):
        n_nodes = int(rng.integers(1, 8))
        g, s = random_rooted_graph(rng, n_nodes)
        gains = GainSet(1.0, 2.0, 1.5, 0.5)
        cfg = make_cfg(g, sorted(s.members), steps=60, seed=trial, gains=gains)
        tr = run(cfg)
        dbar = network_matrices(g, s, cfg.bounds).dbar
        a, _, c = plant_matrices(1)
        f = np.array([[gains.f1], [gains.f2]])
        proj = np.kron(np.eye(n_nodes) - dbar, np.eye(2))
        obs = np.kron(np.eye(n_nodes), a - f @ c)
        xt = (tr.x - tr.xr[:, None, :]).reshape(len(tr.times), -1)
        ebar = xt @ proj.T - tr.xhat.reshape(len(tr.times), -1)
        expected = ebar[0]
        for t in range(1, len(tr.times)):
            expected = obs @ expected
            np.testing.assert_allclose(ebar[t], expected, rtol=0, atol=1e-8)


def test_partial_state_error_pair_case1():
    """One-step closed-loop map of (e, ebar) with the observer in the loop.

    ``e`` picks up the observer error through ``A``:
    ``e+ = (Dbar kron A) e + (I kron A) ebar``, ``ebar+ = (I kron (A - FC)) ebar``.
    """
    g = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    gains = GainSet(0.5, 1.0, 1.5, 0.5)
    cfg = make_cfg(g, [0], steps=200, seed=5, gains=gains)
    tr = run(cfg)
    dbar = network_matrices(g, cfg.roots, cfg.bounds).dbar
    a, _, c = plant_matrices(1)
    f = np.array([[gains.f1], [gains.f2]])
    xt = tr.x - tr.xr[:, None, :]
    e = xt - tr.chi
    ebar = np.einsum("ij,tjk->tik", np.eye(3) - dbar, xt) - tr.xhat
    for t in range(200):
        np.testing.assert_allclose(e[t + 1], dbar @ e[t] @ a.T + ebar[t] @ a.T, rtol=0, atol=1e-10)
        np.testing.assert_allclose(ebar[t + 1], ebar[t] @ (a - f @ c).T, rtol=0, atol=1e-10)


def test_refuses_gains_outside_region_unless_forced():
    cfg = make_cfg(case_graph("I"), [0], gains=GainSet(1.0, 0.5), steps=5)
    with pytest.raises(ConfigError, match="gain region"):
        run(cfg)
    tr = run(cfg, force=True)
    assert any("gain region" in w for w in tr.warnings)


def test_refuses_unstable_observer_unless_forced():
    cfg = make_cfg(case_graph("I"), [0], gains=GainSet(1.0, 2.0, 0.0, 0.0), steps=5)
    with pytest.raises(ConfigError, match="observer"):
        run(cfg)
    assert run(cfg, force=True).warnings
    # the observer is irrelevant with full-state coupling
    run(dataclasses.replace(cfg, mode="full-state"))


def test_graph_set_violation_is_a_warning():
    tr = run(make_cfg(case_graph("I"), [2], steps=5))
    assert any("graph set" in w for w in tr.warnings)


def test_invalid_configs():
    g = case_graph("I")
    with pytest.raises(ConfigError):
        make_cfg(g, [0], mode="telepathy")
    with pytest.raises(ConfigError):
        make_cfg(g, [0], steps=0)
    with pytest.raises(ConfigError):
        make_cfg(g, [0], record_every=0)
    with pytest.raises(ConfigError, match="agent_states"):
        run(make_cfg(g, [0], agent_states=np.zeros((2, 2))))


def test_sync_metrics_zero_trajectory():
    z = np.zeros((4, 2, 2))
    tr = Trajectory(np.arange(4), z, np.zeros((4, 2)), z, None, np.zeros((4, 2, 1)),
                    np.zeros((4, 2, 1)))
    m = sync_metrics(tr)
    assert m.final_error == 0.0
    assert m.first_below == {1e-2: 0, 1e-4: 0, 1e-6: 0}
    assert m.max_abs_u == 0.0


def test_sync_metrics_diverging_trajectory():
    t = np.arange(5)
    x = np.zeros((5, 1, 2))
    x[:, 0, 0] = 1.0 + t
    tr = Trajectory(t, x, np.zeros((5, 2)), x, None, np.zeros((5, 1, 1)), np.zeros((5, 1, 1)))
    m = sync_metrics(tr)
    assert m.final_error == 5.0
    assert all(v is None for v in m.first_below.values())


def test_certified_random_configurations_converge_under_saturation():
    rng = np.random.default_rng(2024)
    for trial in range(4):
        n_nodes = int(rng.integers(2, 9))
        g, s = random_rooted_graph(rng, n_nodes)
        k1, k2 = [(0.5, 1.0), (1.0, 2.0), (1.5, 2.5), (1.0, 1.8)][trial]
        cfg = make_cfg(g, sorted(s.members), mode=["full-state", "partial-state"][trial % 2],
                       gains=GainSet(k1, k2), steps=5000, seed=trial, record_every=50)
        m = sync_metrics(run(cfg))
        assert m.final_error < 1e-6, (trial, m)
        assert m.max_abs_u > 1.0


def test_long_loop_converges_on_a_longer_horizon():
    # 60-node loop: slowest mode of Dbar is ~0.99614, so 1e-6 needs more than 5000 ticks
    cfg = suite_config("III", 2, steps=8000, record_every=100)
    m = sync_metrics(run(cfg))
    assert m.final_error < 1e-6
    assert 5000 < m.first_below[1e-6] < 8000
