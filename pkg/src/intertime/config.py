"""Numerical tolerances shared by every module.

The asymptotic statements being tested carry no explicit slack, so every
floating-point comparison in the package goes through one of these values.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    row_sum: float = 1e-12
    lazy_diag: float = 1e-12
    stationary_residual: float = 1e-10
    detailed_balance: float = 1e-10
    dist_sum: float = 1e-10
    clamp: float = 1e-15
    power_iter_l1: float = 1e-12
    power_iter_max: int = 1_000_000
    transitive_horizon: int = 20
    transitive_atol: float = 1e-10
    zero_weight: float = 1e-300
    unit_eigenvalue: float = 1e-9
    hitting_residual: float = 1e-8
    dual_formula_rel: float = 1e-8
    mixing_eps: float = 0.25
    criterion_atol: float = 1e-12
    large_set_mass: float = 0.125
    mass_atol: float = 1e-12
    dense_max_n: int = 4096


TOL = Tolerances()
