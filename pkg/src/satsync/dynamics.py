"""Saturated discrete-time double-integrator plant and its exosystem.

States are arrays whose last axis has length ``2n``: the first ``n`` entries
are the position block, the last ``n`` the velocity block. Leading axes are
broadcast, so the same functions advance one agent or a stacked network.
"""

from __future__ import annotations

import numpy as np


def saturate(v):
    """Componentwise ``sgn(w) * min(1, |w|)``."""
    return np.clip(np.asarray(v, dtype=float), -1.0, 1.0)


def plant_matrices(n: int):
    """``(A, B, C)`` for block size ``n``."""
    if n < 1:
        raise ValueError("block size n must be >= 1")
    eye, zero = np.eye(n), np.zeros((n, n))
    a = np.block([[eye, eye], [zero, eye]])
    b = np.vstack([zero, eye])
    c = np.hstack([eye, zero])
    return a, b, c


def _split(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % 2:
        raise ValueError(f"state length must be even (2n), got {x.shape[-1]}")
    n = x.shape[-1] // 2
    return x[..., :n], x[..., n:]


def apply_a(x):
    """Multiply by ``A = [[I, I], [0, I]]`` without forming it."""
    pos, vel = _split(x)
    return np.concatenate([pos + vel, vel], axis=-1)


def apply_b(w):
    """Multiply by ``B = [0; I]``."""
    w = np.asarray(w, dtype=float)
    return np.concatenate([np.zeros_like(w), w], axis=-1)


def output(x):
    """Position block (``C = [I, 0]``)."""
    return _split(x)[0]


def agent_step(x, u):
    """One step of ``x+ = A x + B sat(u)``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if 2 * u.shape[-1] != x.shape[-1]:
        raise ValueError(f"input has {u.shape[-1]} components, state needs {x.shape[-1] // 2}")
    return apply_a(x) + apply_b(saturate(u))


def exo_step(xr):
    return apply_a(xr)
