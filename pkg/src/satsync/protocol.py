"""Scale-free linear dynamic protocols.

Two controllers are provided: one for full-state coupling, where agents
measure their whole state relative to neighbors, and an observer-based one
for partial-state coupling, where only positions are measured. Both are
built from local data alone (block size, root flag, in-degree bound,
gains); nothing depends on the number of agents or the graph.

The update kernels (``control_input``, ``full_state_update``,
``partial_state_update``) broadcast over leading axes, so the simulation
engine advances every agent with the same code a single controller uses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dynamics import apply_a, apply_b, output, plant_matrices, saturate
from .graph import DegreeBounds, Graph, RootSet

ZETA_BAR_FORMS = ("expanded", "literal")


@dataclass(frozen=True)
class GainSet:
    k1: float
    k2: float
    f1: float = 1.5
    f2: float = 0.5

    @property
    def in_region(self) -> bool:
        return gain_region_contains(self.k1, self.k2)


def gain_region_contains(k1: float, k2: float) -> bool:
    """Open triangle with vertices (0, 0), (0, 2), (2, 3)."""
    return bool(0 < k1 < 2 and k2 > 0 and (4 + k1 - 2 * k2) * (3 * k1 - 2 * k2) < 0)


def feedback_matrix(n: int, gains: GainSet) -> np.ndarray:
    """``K = [k1 I, k2 I]``."""
    eye = np.eye(n)
    return np.hstack([gains.k1 * eye, gains.k2 * eye])


def observer_gain(n: int, gains: GainSet) -> np.ndarray:
    """``F = [f1 I; f2 I]``."""
    eye = np.eye(n)
    return np.vstack([gains.f1 * eye, gains.f2 * eye])


def observer_matrix(n: int, gains: GainSet) -> np.ndarray:
    """``A - F C``, the observer's free dynamics."""
    a, _, c = plant_matrices(n)
    return a - observer_gain(n, gains) @ c


def control_input(chi, gains: GainSet):
    """``u = -K chi``."""
    chi = np.asarray(chi, dtype=float)
    n = chi.shape[-1] // 2
    return -(gains.k1 * chi[..., :n] + gains.k2 * chi[..., n:])


def _root_scale(iota, dbar_in):
    # iota / (2 + dbar_in), shaped to broadcast against (..., dim)
    return (np.asarray(iota, dtype=float) / (2.0 + np.asarray(dbar_in, dtype=float)))[..., None]


def full_state_update(chi, sat_u, zeta_bar, zeta_hat, iota, dbar_in):
    """Next controller state for full-state coupling."""
    chi = np.asarray(chi, dtype=float)
    inner = chi + zeta_bar - zeta_hat - _root_scale(iota, dbar_in) * chi
    return apply_a(inner) + apply_b(sat_u)


def partial_state_update(chi, xhat, sat_u, zeta_bar, zeta_hat1, zeta_hat2,
                         iota, dbar_in, gains: GainSet):
    """Next ``(chi, xhat)`` for the observer-based protocol."""
    chi = np.asarray(chi, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    scale = _root_scale(iota, dbar_in)
    innov = np.asarray(zeta_bar, dtype=float) - output(xhat)
    # (A - F C) xhat + F zeta_bar == A xhat + F (zeta_bar - C xhat)
    xhat_next = (apply_a(xhat)
                 + np.concatenate([gains.f1 * innov, gains.f2 * innov], axis=-1)
                 + apply_b(zeta_hat2 + scale * sat_u))
    chi_next = apply_a(chi - zeta_hat1 - scale * chi + xhat) + apply_b(sat_u)
    return chi_next, xhat_next


@dataclass(frozen=True)
class FullStateController:
    n: int
    iota: int
    dbar_in: float
    chi: np.ndarray

    @classmethod
    def create(cls, n: int, iota: int, dbar_in: float, chi=None) -> "FullStateController":
        if iota not in (0, 1):
            raise ValueError("iota must be 0 or 1")
        if dbar_in < 0:
            raise ValueError("dbar_in must be nonnegative")
        chi = np.zeros(2 * n) if chi is None else np.array(chi, dtype=float)
        if chi.shape != (2 * n,):
            raise ValueError(f"chi must have length {2 * n}")
        return cls(n, iota, float(dbar_in), chi)


@dataclass(frozen=True)
class PartialStateController:
    n: int
    iota: int
    dbar_in: float
    chi: np.ndarray
    xhat: np.ndarray

    @classmethod
    def create(cls, n: int, iota: int, dbar_in: float, chi=None, xhat=None) -> "PartialStateController":
        base = FullStateController.create(n, iota, dbar_in, chi)
        xhat = np.zeros(2 * n) if xhat is None else np.array(xhat, dtype=float)
        if xhat.shape != (2 * n,):
            raise ValueError(f"xhat must have length {2 * n}")
        return cls(n, iota, base.dbar_in, base.chi, xhat)


@dataclass(frozen=True)
class ExchangePacket:
    """What an agent broadcasts to its neighbors each tick."""

    xi1: np.ndarray
    xi2: np.ndarray | None = None

    def __post_init__(self):
        if self.xi2 is not None and np.any(np.abs(self.xi2) > 1):
            raise ValueError("xi2 carries a saturated input and must lie in [-1, 1]")


def broadcast(c: FullStateController | PartialStateController, gains: GainSet) -> ExchangePacket:
    if isinstance(c, PartialStateController):
        return ExchangePacket(c.chi.copy(), saturate(control_input(c.chi, gains)))
    return ExchangePacket(c.chi.copy())


def full_state_step(c: FullStateController, zeta_bar, zeta_hat, gains: GainSet):
    """Advance one tick; returns ``(new_controller, u)`` with ``u`` from the old state."""
    u = control_input(c.chi, gains)
    chi = full_state_update(c.chi, saturate(u), zeta_bar, zeta_hat, c.iota, c.dbar_in)
    return replace(c, chi=chi), u


def partial_state_step(c: PartialStateController, zeta_bar, zeta_hat1, zeta_hat2,
                       u_sat_own, gains: GainSet):
    """Advance one tick of the observer-based controller.

    ``u_sat_own`` is the saturated input this agent applies at the current
    tick (the same value fed to the plant and broadcast to neighbors).
    """
    u = control_input(c.chi, gains)
    chi, xhat = partial_state_update(c.chi, c.xhat, u_sat_own, zeta_bar, zeta_hat1,
                                     zeta_hat2, c.iota, c.dbar_in, gains)
    return replace(c, chi=chi, xhat=xhat), u


# -- network information -----------------------------------------------------

def zeta_bar_all(outputs, y_r, weights, iota, dbar_in, form: str = "expanded"):
    """Relative output measurement of every agent, stacked along axis 0.

    ``form="expanded"`` divides the root term by ``2 + dbar_in`` together with
    the neighbor sum (so the error dynamics are exactly ``Dbar kron A``);
    ``form="literal"`` leaves the root term undivided.
    """
    outputs = np.asarray(outputs, dtype=float)
    dev = outputs - np.asarray(y_r, dtype=float)
    weights = np.asarray(weights, dtype=float)
    iota = np.asarray(iota, dtype=float)[:, None]
    scale = (1.0 / (2.0 + np.asarray(dbar_in, dtype=float)))[:, None]
    neighbor = weights.sum(axis=1)[:, None] * dev - weights @ dev
    if form == "expanded":
        return scale * (neighbor + iota * dev)
    if form == "literal":
        return scale * neighbor + iota * dev
    raise ValueError(f"unknown zeta_bar form {form!r}; expected one of {ZETA_BAR_FORMS}")


def zeta_hat_all(xi, weights, dbar_in):
    """Neighbor-weighted differences of broadcast variables, stacked along axis 0."""
    xi = np.asarray(xi, dtype=float)
    weights = np.asarray(weights, dtype=float)
    scale = (1.0 / (2.0 + np.asarray(dbar_in, dtype=float)))[:, None]
    return scale * (weights.sum(axis=1)[:, None] * xi - weights @ xi)


def compute_zeta_bar(i: int, outputs, y_r, g: Graph, s: RootSet, bounds: DegreeBounds,
                     form: str = "expanded"):
    """Relative output measurement available to agent ``i``."""
    outputs = np.asarray(outputs, dtype=float)
    y_i = outputs[i]
    row = g.weights[i]
    total = (row[:, None] * (y_i - outputs)).sum(axis=0)
    root = (1.0 if i in s.members else 0.0) * (y_i - np.asarray(y_r, dtype=float))
    scale = 1.0 / (2.0 + bounds.dbar_in[i])
    if form == "expanded":
        return scale * (total + root)
    if form == "literal":
        return scale * total + root
    raise ValueError(f"unknown zeta_bar form {form!r}; expected one of {ZETA_BAR_FORMS}")


def compute_zeta_hat(i: int, broadcasts: Sequence, g: Graph, bounds: DegreeBounds):
    """Extra exchanged information for agent ``i``.

    ``broadcasts`` is either a stacked array (one row per agent) or a sequence
    of ``ExchangePacket``. Packets are handled blockwise: full-state packets
    give one array, partial-state packets a ``(zeta_hat1, zeta_hat2)`` pair.
    """
    if len(broadcasts) != g.n_nodes:
        raise ValueError(f"expected {g.n_nodes} broadcasts, got {len(broadcasts)}")
    if isinstance(broadcasts[0], ExchangePacket):
        zh1 = compute_zeta_hat(i, [p.xi1 for p in broadcasts], g, bounds)
        has2 = [p.xi2 is not None for p in broadcasts]
        if not any(has2):
            return zh1
        if not all(has2):
            raise ValueError("broadcasts mix full-state and partial-state packets")
        return zh1, compute_zeta_hat(i, [p.xi2 for p in broadcasts], g, bounds)
    xi = _stack(broadcasts)
    row = g.weights[i]
    return (row[:, None] * (xi[i] - xi)).sum(axis=0) / (2.0 + bounds.dbar_in[i])


def _stack(items):
    try:
        arr = np.array([np.asarray(x, dtype=float) for x in items])
    except ValueError as exc:
        raise ValueError("broadcast shapes differ") from exc
    if arr.dtype == object or arr.ndim < 1:
        raise ValueError("broadcast shapes differ")
    return arr.reshape(len(items), -1)
