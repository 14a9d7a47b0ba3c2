"""Numerical certification of the convergence argument.

``certify`` checks every hypothesis the stability proof relies on and builds
the proof's ingredients (the Lyapunov matrix for the estimation error and
the weight ``h`` of the composite Lyapunov function). ``lyapunov_trace``
then evaluates that composite function along a recorded trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import TOL
from .dynamics import plant_matrices
from .engine import SimConfig, Trajectory
from .graph import in_graph_set, network_matrices
from .linalg import (
    LyapunovError,
    kron,
    lyapunov_residual,
    solve_discrete_lyapunov,
    spectral_norm,
    spectral_radius,
)
from .protocol import gain_region_contains, observer_matrix

H_GRID = tuple(1.0 - 2.0 ** -j for j in range(1, 41))


@dataclass
class CertificationReport:
    mode: str
    graph_in_set: bool
    gains_in_region: bool
    rho_dbar: float
    rho_dbarA: float
    rho_AmFC: float | None
    pd_residual: float | None
    pd_min_eig: float | None
    psi_norm: float | None
    h_found: float | None
    phi_eigs: tuple | None
    reasons: list = field(default_factory=list)
    pd: np.ndarray | None = field(default=None, repr=False)

    @property
    def overall(self) -> bool:
        return not self.reasons

    def to_dict(self) -> dict:
        return {
            "overall": "pass" if self.overall else "fail",
            "reasons": list(self.reasons),
            "mode": self.mode,
            "graph_in_set": self.graph_in_set,
            "gains_in_region": self.gains_in_region,
            "rho_dbar": self.rho_dbar,
            "rho_dbarA": self.rho_dbarA,
            "rho_AmFC": self.rho_AmFC,
            "pd_residual": self.pd_residual,
            "pd_min_eig": self.pd_min_eig,
            "psi_norm": self.psi_norm,
            "h_found": self.h_found,
            "phi_eigs": None if self.phi_eigs is None else list(self.phi_eigs),
        }


def phi_matrix(k1: float, k2: float, h: float, psi_norm: float) -> np.ndarray:
    """2x2 matrix whose negativity makes the composite Lyapunov function decrease."""
    if not 0.0 < h < 1.0:
        raise ValueError(f"h must lie in (0, 1), got {h}")
    off = 1.0 + k1 - k2
    corner = -1.0 + k1 / 2.0
    top = corner + psi_norm ** 2 * (1.0 - h) * (k1 ** 2 + k2 ** 2) / h
    return np.array([[top, off], [off, corner]])


def find_h(k1: float, k2: float, psi_norm: float) -> float | None:
    """Smallest ``h = 1 - 2**-j`` (j = 1..40) giving a negative definite ``phi_matrix``."""
    for h in H_GRID:
        if np.linalg.eigvalsh(phi_matrix(k1, k2, h, psi_norm))[-1] < -TOL.phi_negative:
            return h
    return None


def closed_loop_error_matrix(dbar, n: int) -> np.ndarray:
    """``Dbar kron A``: the map driving the full-state estimation error."""
    a, _, _ = plant_matrices(n)
    return kron(dbar, a)


def certify(cfg: SimConfig) -> CertificationReport:
    """Run every hypothesis check for ``cfg``; failures land in ``reasons``."""
    reasons = []
    g, s, n = cfg.graph, cfg.roots, cfg.n
    k1, k2 = cfg.gains.k1, cfg.gains.k2

    in_set = in_graph_set(g, s)
    if not in_set:
        reasons.append("graph set: some node is not reachable from the root set")
    in_region = gain_region_contains(k1, k2)
    if not in_region:
        reasons.append(f"gain region: (k1, k2) = ({k1}, {k2}) violates the gain conditions")

    dbar = network_matrices(g, s, cfg.bounds).dbar
    rho_dbar = spectral_radius(dbar)
    if not rho_dbar < 1.0:
        reasons.append(f"Dbar not Schur: spectral radius {rho_dbar:.6g}")
    m = closed_loop_error_matrix(dbar, n)
    rho_dbar_a = spectral_radius(m)
    if not rho_dbar_a < 1.0:
        reasons.append(f"Dbar kron A not Schur: spectral radius {rho_dbar_a:.6g}")

    rho_obs = None
    if cfg.mode == "partial-state":
        rho_obs = spectral_radius(observer_matrix(n, cfg.gains))
        if not rho_obs < 1.0:
            reasons.append(f"observer: A - FC not Schur (spectral radius {rho_obs:.6g})")

    pd = residual = pd_min = None
    q = 2.0 * np.eye(m.shape[0])
    try:
        pd = solve_discrete_lyapunov(m, q)
        residual = lyapunov_residual(m, q, pd)
        pd_min = float(np.linalg.eigvalsh(pd)[0])
    except (LyapunovError, np.linalg.LinAlgError) as exc:
        reasons.append(f"P_D: {exc}")

    psi_norm = spectral_norm(m - np.eye(m.shape[0]))
    h = phi_eigs = None
    if in_region:
        h = find_h(k1, k2, psi_norm)
        if h is None:
            reasons.append("h search: no h on the grid makes Phi negative definite")
        else:
            phi_eigs = tuple(float(v) for v in np.linalg.eigvalsh(phi_matrix(k1, k2, h, psi_norm)))

    return CertificationReport(cfg.mode, in_set, in_region, rho_dbar, rho_dbar_a, rho_obs,
                               residual, pd_min, psi_norm, h, phi_eigs, reasons, pd)


@dataclass
class LyapunovTrace:
    times: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v: np.ndarray
    delta_v: np.ndarray
    h: float


def lyapunov_trace(tr: Trajectory, report: CertificationReport, cfg: SimConfig) -> LyapunovTrace:
    """Evaluate ``V = (1 - h) V1 + h V2`` at every recorded tick.

    ``V1`` is built from the saturated input and the velocity error, ``V2``
    from the estimation error ``e = (x - x_r) - chi``. Only full-state runs
    recorded at every tick qualify: with the observer in the loop ``e`` no
    longer evolves by ``Dbar kron A`` alone.
    """
    if not report.overall:
        raise ValueError("certification failed: " + "; ".join(report.reasons))
    if tr.record_every != 1:
        raise ValueError("lyapunov trace needs record_every = 1")
    if cfg.mode != "full-state":
        raise ValueError("lyapunov trace is defined for full-state runs only")
    k1, h, n = cfg.gains.k1, report.h_found, cfg.n

    xt = tr.x - tr.xr[:, None, :]
    vel = xt[..., n:]
    s, u = tr.sat_u, tr.u
    v1 = ((1.0 + k1 / 2.0) * s * s + 2.0 * k1 * s * vel + k1 * vel * vel
          + 2.0 * s * (u - s)).sum(axis=(1, 2))
    e = (xt - tr.chi).reshape(len(tr.times), -1)
    v2 = np.einsum("ti,ij,tj->t", e, report.pd, e)
    v = (1.0 - h) * v1 + h * v2
    return LyapunovTrace(tr.times.copy(), v1, v2, v, np.diff(v), h)
