"""Small dense linear algebra helpers.

Everything here works on plain ``numpy`` arrays; matrices in this package are
at most a few hundred rows, so nothing is tuned for large or sparse problems.
"""

from __future__ import annotations

import numpy as np

from .constants import TOL


class ConvergenceError(np.linalg.LinAlgError):
    """An iterative routine hit its iteration cap."""


class LyapunovError(np.linalg.LinAlgError):
    """The discrete Lyapunov equation has no certified solution."""


def _as_matrix(m, name="m"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _as_square(m, name="m"):
    m = _as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def kron(a, b):
    """Kronecker product of two 2-D arrays."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    pa, qa = a.shape
    pb, qb = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(pa * pb, qa * qb)


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Eigenvalues come from LAPACK's Hessenberg QR iteration (``geev``), which
    raises ``LinAlgError`` instead of returning a wrong answer when it does
    not converge.
    """
    m = _as_square(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def spectral_norm(m, rtol: float = TOL.spectral_norm_rtol,
                  max_iter: int = TOL.power_max_iter) -> float:
    """Largest singular value by power iteration on ``m.T @ m``."""
    m = _as_matrix(m)
    if m.size == 0 or not np.any(m):
        return 0.0
    # unit max-entry scaling keeps the Gram matrix clear of under/overflow
    scale = float(np.abs(m).max())
    m = m / scale
    gram = m.T @ m
    # fixed start vector keeps the result reproducible
    v = np.random.default_rng(0).standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector landed in the null space
            v = np.ones_like(v) / np.sqrt(v.size)
            continue
        v = w / nw
        # per-step change understates the remaining error, hence the margin
        if abs(lam_new - lam) <= rtol * 1e-3 * abs(lam_new):
            return scale * float(np.sqrt(max(lam_new, 0.0)))
        lam = lam_new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def lyapunov_series(m, q, term_tol: float = TOL.lyapunov_series_term,
                    max_terms: int = TOL.lyapunov_series_max_terms):
    """Sum ``sum_k (m.T)^k q m^k`` term by term until a term is negligible."""
    m = _as_square(m)
    q = _as_square(q, "q")
    p = q.copy()
    term = q.copy()
    for _ in range(max_terms):
        term = m.T @ term @ m
        p += term
        if np.linalg.norm(term) < term_tol:
            return 0.5 * (p + p.T)
    raise ConvergenceError("Lyapunov series did not converge")


def _lyapunov_direct(m, q):
    k = m.shape[0]
    lhs = np.eye(k * k) - kron(m.T, m.T)
    return np.linalg.solve(lhs, q.reshape(-1)).reshape(k, k)


def _lyapunov_doubling(m, q, term_tol):
    # P_{j+1} = P_j + M_j^T P_j M_j with M_{j+1} = M_j^2 sums 2^{j+1} series terms
    p = q.copy()
    mk = m.copy()
    for _ in range(64):
        inc = mk.T @ p @ mk
        p = p + inc
        if np.linalg.norm(inc) < term_tol * max(1.0, np.linalg.norm(p)):
            return p
        mk = mk @ mk
    raise ConvergenceError("Lyapunov doubling did not converge")


def solve_discrete_lyapunov(m, q, residual_tol: float = TOL.lyapunov_residual):
    """Solve ``m.T P m - P = -q`` for symmetric positive definite ``P``.

    Small problems (dimension up to ``TOL.lyapunov_direct_max_dim``) are
    solved through the vectorized linear system; larger ones by summing the
    series ``sum (m.T)^k q m^k`` with repeated squaring. Either way the
    residual and definiteness are checked before returning; the residual
    bound is ``residual_tol * max(1, ||P||_F)`` so that badly conditioned
    but correctly solved problems with a large ``P`` are not rejected.

    Raises
    ------
    LyapunovError
        If ``m`` is not Schur stable, or the result misses the residual
        tolerance or is not positive definite.
    """
    m = _as_square(m)
    q = _as_square(q, "q")
    if m.shape != q.shape:
        raise ValueError(f"shape mismatch: m {m.shape}, q {q.shape}")
    rho = spectral_radius(m)
    if rho >= 1.0:
        raise LyapunovError(f"m is not Schur stable (spectral radius {rho:.6g})")
    if m.shape[0] <= TOL.lyapunov_direct_max_dim:
        p = _lyapunov_direct(m, q)
    else:
        p = _lyapunov_doubling(m, q, TOL.lyapunov_series_term)
    p = 0.5 * (p + p.T)
    res = lyapunov_residual(m, q, p)
    bound = residual_tol * max(1.0, float(np.linalg.norm(p)))
    if not res < bound:
        raise LyapunovError(f"residual {res:.3g} exceeds {bound:.3g}")
    if np.linalg.eigvalsh(p)[0] <= 0.0:
        raise LyapunovError("solution is not positive definite")
    return p


def lyapunov_residual(m, q, p) -> float:
    """Frobenius norm of ``m.T p m - p + q``."""
    m = np.asarray(m, dtype=float)
    return float(np.linalg.norm(m.T @ p @ m - p + q))
