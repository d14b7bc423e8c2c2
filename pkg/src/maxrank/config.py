"""Shared numeric tolerances."""

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericConfig:
    ambient_tol: float = 1e-10
    rank_tol: float = 1e-8
    spd_tol: float = 1e-9
    fiber_tol: float = 1e-8
    vertical_tol: float = 1e-9
    drift_warn: float = 1e-6
    drift_max: float = 1e-4
    s2_tol: float = 1e-8
    beta_long_tol: float = 1e-9


TOL = NumericConfig()
