"""Synchronous fixed-step simulation of the closed-loop network.

Every tick reads all outputs and broadcasts, computes the network
information and the inputs, then advances plants, exosystem and controllers
together. Per-agent work is expressed as array operations over the agent
axis using the protocol kernels, so N = 3 and N = 60 run the same code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import apply_a, apply_b, exo_step, output, saturate
from .graph import DegreeBounds, Graph, RootSet, in_graph_set
from .linalg import spectral_radius
from .protocol import (
    ZETA_BAR_FORMS,
    GainSet,
    control_input,
    full_state_update,
    observer_matrix,
    partial_state_update,
    zeta_bar_all,
    zeta_hat_all,
)

MODES = ("full-state", "partial-state")
THRESHOLDS = (1e-2, 1e-4, 1e-6)


class ConfigError(ValueError):
    """A simulation configuration is inconsistent or refused."""


@dataclass(frozen=True)
class InitialConditions:
    """Explicit arrays win; anything missing is drawn (agents, exosystem) or zeroed (controllers)."""

    seed: int = 0
    low: float = -10.0
    high: float = 10.0
    agent_states: np.ndarray | None = None
    exo_state: np.ndarray | None = None
    chi: np.ndarray | None = None
    xhat: np.ndarray | None = None

    def resolve(self, n_agents: int, n: int):
        """Return ``(x0, xr0, chi0, xhat0)`` as fresh arrays."""
        if not self.low <= self.high:
            raise ConfigError("sim.low must not exceed sim.high")
        rng = np.random.default_rng(self.seed)
        dim = 2 * n

        def pick(value, shape, name, draw):
            if value is None:
                return rng.uniform(self.low, self.high, size=shape) if draw else np.zeros(shape)
            arr = np.array(value, dtype=float)
            if arr.shape != shape:
                raise ConfigError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name}: non-finite entries")
            return arr

        x0 = pick(self.agent_states, (n_agents, dim), "agent_states", True)
        xr0 = pick(self.exo_state, (dim,), "exo_state", True)
        chi0 = pick(self.chi, (n_agents, dim), "chi", False)
        xhat0 = pick(self.xhat, (n_agents, dim), "xhat", False)
        return x0, xr0, chi0, xhat0


@dataclass(frozen=True)
class SimConfig:
    n: int
    graph: Graph
    roots: RootSet
    bounds: DegreeBounds
    gains: GainSet
    mode: str = "partial-state"
    steps: int = 5000
    record_every: int = 1
    init: InitialConditions = field(default_factory=InitialConditions)
    zeta_bar_form: str = "expanded"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("plant.n must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.steps < 1:
            raise ConfigError("sim.steps must be >= 1")
        if self.record_every < 1:
            raise ConfigError("sim.record_every must be >= 1")
        if self.zeta_bar_form not in ZETA_BAR_FORMS:
            raise ConfigError(f"zeta_bar_form must be one of {ZETA_BAR_FORMS}")
        n_nodes = self.graph.n_nodes
        if self.roots.n_nodes != n_nodes:
            raise ConfigError("root set and graph disagree on the number of nodes")
        if self.bounds.dbar_in.shape != (n_nodes,):
            raise ConfigError("degree bounds and graph disagree on the number of nodes")

    @property
    def n_agents(self) -> int:
        return self.graph.n_nodes


def default_record_every(n_agents: int) -> int:
    return 1 if n_agents <= 10 else 10


@dataclass
class Trajectory:
    """Recorded snapshots plus per-tick summaries over the whole run.

    Snapshot arrays have the tick axis first; ``error_series`` and
    ``u_peak_series`` cover every tick 0..T regardless of ``record_every``.
    """

    times: np.ndarray
    x: np.ndarray
    xr: np.ndarray
    chi: np.ndarray
    xhat: np.ndarray | None
    u: np.ndarray
    sat_u: np.ndarray
    error_series: np.ndarray | None = None
    u_peak_series: np.ndarray | None = None
    record_every: int = 1
    mode: str = "partial-state"
    warnings: tuple = ()

    @property
    def sync_error_inf(self) -> np.ndarray:
        """``max_i ||x_i - x_r||_inf`` at each recorded tick."""
        if self.times.size == 0:
            return np.zeros(0)
        return np.abs(self.x - self.xr[:, None, :]).max(axis=(1, 2))


@dataclass(frozen=True)
class SyncMetrics:
    final_error: float
    first_below: dict
    max_abs_u: float


def preflight(cfg: SimConfig, force: bool = False) -> list[str]:
    """Refuse uncertifiable configurations unless forced; return warnings."""
    warns = []
    if not cfg.gains.in_region:
        msg = f"gain region: (k1, k2) = ({cfg.gains.k1}, {cfg.gains.k2}) is outside the admissible triangle"
        if not force:
            raise ConfigError(msg)
        warns.append(msg)
    if cfg.mode == "partial-state":
        rho = spectral_radius(observer_matrix(cfg.n, cfg.gains))
        if rho >= 1.0:
            msg = f"observer: A - FC is not Schur (spectral radius {rho:.6g})"
            if not force:
                raise ConfigError(msg)
            warns.append(msg)
    if not in_graph_set(cfg.graph, cfg.roots):
        warns.append("graph set: some node is not reachable from the root set")
    return warns


def run(cfg: SimConfig, force: bool = False) -> Trajectory:
    """Simulate ``cfg.steps`` ticks and record every ``cfg.record_every``-th."""
    warns = preflight(cfg, force)
    n_agents, n = cfg.n_agents, cfg.n
    x, xr, chi, xhat = cfg.init.resolve(n_agents, n)
    partial = cfg.mode == "partial-state"
    gains = cfg.gains
    weights = cfg.graph.weights
    iota = cfg.roots.indicator
    dbar_in = cfg.bounds.dbar_in
    form = cfg.zeta_bar_form

    steps, every = cfg.steps, cfg.record_every
    n_rec = math.ceil(steps / every) + 1
    times = np.empty(n_rec, dtype=np.int64)
    rec_x = np.empty((n_rec, n_agents, 2 * n))
    rec_xr = np.empty((n_rec, 2 * n))
    rec_chi = np.empty_like(rec_x)
    rec_xhat = np.empty_like(rec_x) if partial else None
    rec_u = np.empty((n_rec, n_agents, n))
    rec_s = np.empty_like(rec_u)
    err = np.empty(steps + 1)
    upeak = np.empty(steps + 1)

    k = 0
    for t in range(steps + 1):
        u = control_input(chi, gains)
        s = saturate(u)
        err[t] = np.abs(x - xr).max()
        upeak[t] = np.abs(u).max()
        if t % every == 0 or t == steps:
            times[k] = t
            rec_x[k], rec_xr[k], rec_chi[k] = x, xr, chi
            if partial:
                rec_xhat[k] = xhat
            rec_u[k], rec_s[k] = u, s
            k += 1
        if t == steps:
            break
        if partial:
            zb = zeta_bar_all(output(x), output(xr), weights, iota, dbar_in, form)
            zh1 = zeta_hat_all(chi, weights, dbar_in)
            zh2 = zeta_hat_all(s, weights, dbar_in)
            chi, xhat = partial_state_update(chi, xhat, s, zb, zh1, zh2, iota, dbar_in, gains)
        else:
            zb = zeta_bar_all(x, xr, weights, iota, dbar_in, form)
            zh = zeta_hat_all(chi, weights, dbar_in)
            chi = full_state_update(chi, s, zb, zh, iota, dbar_in)
        x = apply_a(x) + apply_b(s)
        xr = exo_step(xr)

    return Trajectory(times, rec_x, rec_xr, rec_chi, rec_xhat, rec_u, rec_s,
                      error_series=err, u_peak_series=upeak, record_every=every,
                      mode=cfg.mode, warnings=tuple(warns))


def _first_below(series, ticks, threshold):
    hit = np.nonzero(series < threshold)[0]
    return int(ticks[hit[0]]) if hit.size else None


def sync_metrics(tr: Trajectory, thresholds=THRESHOLDS) -> SyncMetrics:
    """Final error, first tick under each threshold (``None`` = never), peak |u|."""
    if tr.error_series is not None:
        series = tr.error_series
        ticks = np.arange(series.size)
        peak = float(tr.u_peak_series.max()) if tr.u_peak_series.size else 0.0
    else:
        series = tr.sync_error_inf
        ticks = tr.times
        peak = float(np.abs(tr.u).max()) if tr.u.size else 0.0
    final = float(series[-1]) if series.size else float("nan")
    return SyncMetrics(final, {th: _first_below(series, ticks, th) for th in thresholds}, peak)
