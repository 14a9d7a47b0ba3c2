"""Numerical tolerances used across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    spectral_radius: float = 1e-8
    spectral_norm_rtol: float = 1e-10
    lyapunov_residual: float = 1e-8
    lyapunov_series_term: float = 1e-14
    symmetry: float = 1e-12
    phi_negative: float = 1e-12
    delta_v: float = 1e-9
    eig_max_iter: int = 10000
    power_max_iter: int = 200000
    lyapunov_direct_max_dim: int = 64
    lyapunov_series_max_terms: int = 1_000_000


TOL = Tolerances()
