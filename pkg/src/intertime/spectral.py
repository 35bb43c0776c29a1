"""Spectra of reversible chains and the Green-sum quantities built from them.

For a transitive reversible lazy chain with eigenvalues ``1 = l_1 > l_2 >= ...``::

    Q   = sum_{k>=2} (1 - l_k)^-2
    Q_t = sum_z g_t(x, z)^2,      g_t(x, z) = sum_{j<=t} p_j(x, z)
        = (t+1)^2 / n + (1/n) sum_{k>=2} (1 - l_k^(t+1))^2 / (1 - l_k)^2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from intertime import _search
from intertime.chain import ChainMatrix, delta
from intertime.config import TOL
from intertime.errors import (
    BudgetError,
    DivergenceError,
    StructuralError,
    UnsupportedOperationError,
    ValidationError,
)

SOURCES = ("dense-eigensolve", "closed-form-circulant", "closed-form-product")


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted in decreasing order, largest first."""

    eigenvalues: np.ndarray
    source: str = "dense-eigensolve"

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1]) if self.n > 1 else 0.0


@dataclass(frozen=True)
class GreenTable:
    x: int
    t: int
    g: np.ndarray


def _closed_form(family: dict) -> tuple[np.ndarray, str] | None:
    fam, p = family["family"], family["params"]
    if fam == "cycle":
        n = int(p["n"])
        k = np.arange(n)
        return (1 + np.cos(2 * np.pi * k / n)) / 2, "closed-form-circulant"
    if fam == "complete":
        n = int(p["n"])
        lam = np.full(n, (n - 2) / (2 * (n - 1))) if n > 1 else np.empty(0)
        lam[:1] = 1.0
        return (lam if n > 1 else np.ones(1)), "closed-form-circulant"
    if fam == "hypercube":
        d = int(p["d"])
        k = np.arange(d + 1)
        mult = comb(d, k, exact=False).round().astype(np.int64)
        return np.repeat(1 - k / d, mult), "closed-form-product"
    if fam == "torus":
        d, side = int(p["d"]), int(p["l"])
        c = np.cos(2 * np.pi * np.arange(side) / side)
        total = np.zeros(1)
        for _ in range(d):
            total = (total[:, None] + c[None, :]).ravel()
        return 0.5 + total / (2 * d), "closed-form-product"
    return None


def spectrum(P: ChainMatrix, closed_form: bool = False) -> Spectrum:
    """Eigenvalues of a reversible chain.

    The dense route diagonalises ``D^{1/2} P D^{-1/2}`` (``D = diag(pi)``),
    which is symmetric for reversible chains. With ``closed_form=True`` the
    explicit formulas for generated cycles, tori, complete graphs and
    hypercubes are used instead when the chain came from
    :func:`intertime.families.generate`.

    Raises
    ------
    UnsupportedOperationError
        Chain is not reversible.
    BudgetError
        Dense route requested for ``n > TOL.dense_max_n``.
    """
    if not P.reversible:
        raise UnsupportedOperationError("spectrum requires a reversible chain")
    if closed_form and "family" in P.meta:
        cf = _closed_form(P.meta["family"])
        if cf is not None:
            lam, source = cf
            return Spectrum(np.sort(lam)[::-1].copy(), source)
    if P.n > TOL.dense_max_n:
        raise BudgetError(f"dense eigensolve limited to n <= {TOL.dense_max_n}, got {P.n}")
    s = np.sqrt(P.pi)
    S = P.dense() * s[:, None] / s[None, :]
    S = 0.5 * (S + S.T)
    lam = np.linalg.eigvalsh(S)[::-1].copy()
    if abs(lam[0] - 1.0) > TOL.unit_eigenvalue:
        raise StructuralError(f"top eigenvalue {lam[0]!r} is not 1")
    lam[0] = 1.0
    return Spectrum(lam, "dense-eigensolve")


def _gaps(spec: Spectrum) -> np.ndarray:
    rest = spec.eigenvalues[1:]
    if rest.size and rest[0] >= 1.0 - TOL.unit_eigenvalue:
        raise StructuralError("repeated unit eigenvalue: chain is reducible")
    if rest.size and rest[-1] <= -1.0 + TOL.unit_eigenvalue:
        raise StructuralError("eigenvalue -1: chain is periodic")
    return 1.0 - rest


def compute_Q(spec: Spectrum) -> tuple[float, float]:
    """Return ``(Q, t_rel)`` with ``Q = sum_{k>=2} (1-l_k)^-2``, ``t_rel = 1/(1-l_2)``.

    A one-state chain gives ``(0.0, 0.0)``.
    """
    gaps = _gaps(spec)
    if gaps.size == 0:
        return 0.0, 0.0
    return float(np.sum(gaps ** -2.0)), float(1.0 / gaps[0])


def green_table(P: ChainMatrix, x: int, t: int) -> GreenTable:
    """``g[z] = sum_{j=0}^{t} p_j(x, z)``."""
    if t < 0:
        raise ValidationError(f"horizon must be nonnegative, got {t}")
    mu = delta(P.n, x)
    g = mu.copy()
    PT = P.PT
    for _ in range(t):
        mu = PT @ mu
        g += mu
    return GreenTable(int(x), int(t), g)


def qt_curve(P: ChainMatrix, x: int, tmax: int) -> np.ndarray:
    """``Q_t`` for ``t = 0..tmax`` from one pass of Green-sum accumulation."""
    mu = delta(P.n, x)
    g = mu.copy()
    out = np.empty(tmax + 1)
    out[0] = 1.0
    PT = P.PT
    for t in range(1, tmax + 1):
        mu = PT @ mu
        g += mu
        out[t] = g @ g
    return out


def return_sum_Qt(P: ChainMatrix, x: int, t: int) -> float:
    """``sum_{i,j<=t} p_{i+j}(x, x)``; equals ``Q_t`` for transitive reversible chains."""
    mu = delta(P.n, x)
    ret = np.empty(2 * t + 1)
    ret[0] = 1.0
    PT = P.PT
    for s in range(1, 2 * t + 1):
        mu = PT @ mu
        ret[s] = mu[x]
    s = np.arange(2 * t + 1)
    weights = np.minimum(s, 2 * t - s) + 1
    return float(weights @ ret)


def compute_Qt(P: ChainMatrix, x: int, t: int, check: bool = True) -> float:
    """``Q_t = sum_z g_t(x, z)^2``.

    For chains flagged transitive (and ``check`` left on) the return-sum form
    is evaluated as well; a relative disagreement above
    ``TOL.dual_formula_rel`` raises :class:`StructuralError`, which usually
    means the transitive flag is wrong.
    """
    g = green_table(P, x, t).g
    qt = float(g @ g)
    if check and P.transitive and P.reversible:
        alt = return_sum_Qt(P, x, t)
        if abs(alt - qt) > TOL.dual_formula_rel * qt:
            raise StructuralError(
                f"Q_t={qt!r} vs return-sum {alt!r}: chain is likely not transitive")
    return qt


def spectral_Qt(spec: Spectrum, t: int) -> float:
    """Closed spectral expression for ``Q_t`` of a transitive chain."""
    lam = spec.eigenvalues[1:]
    n = spec.n
    gaps = _gaps(spec)
    # (1 - l^(t+1)) / (1 - l) = 1 + l + ... + l^t; expm1 avoids cancellation near l = 1
    geo = np.empty_like(lam)
    pos = lam > 0
    geo[pos] = -np.expm1((t + 1) * np.log(lam[pos])) / gaps[pos]
    geo[~pos] = (1.0 - lam[~pos] ** (t + 1)) / gaps[~pos]
    return float((t + 1) ** 2 / n + np.sum(geo ** 2) / n)


def return_probability(P: ChainMatrix, x: int, tmax: int) -> np.ndarray:
    """``p_t(x, x)`` for ``t = 0..tmax``."""
    mu = delta(P.n, x)
    out = np.empty(tmax + 1)
    out[0] = 1.0
    PT = P.PT
    for t in range(1, tmax + 1):
        mu = PT @ mu
        out[t] = mu[x]
    return out


def _unif_single_state(P: ChainMatrix, x: int = 0) -> int:
    n = P.n
    thresh = 1.25 / n
    cap = _search.step_cap(n)
    mu = delta(n, x)
    PT = P.PT
    for t in range(cap + 1):
        if mu[x] <= thresh + TOL.criterion_atol / n:
            return t
        mu = PT @ mu
    raise DivergenceError(f"uniform mixing criterion not met within {cap} steps")


def uniform_mixing_time(P: ChainMatrix, eps: float | None = None) -> int:
    """Smallest ``t`` with ``max_{x,y} |p_t(x,y)/pi(y) - 1| <= eps`` (default 1/4).

    Transitive chains use ``min{t : p_t(x,x) <= (1+eps)/n}``; for ``n <= 64``
    this is cross-checked against the general definition.
    """
    eps = TOL.mixing_eps if eps is None else eps
    if not P.lazy:
        raise ValidationError("uniform mixing time is defined here for lazy chains only")
    if P.n == 1:
        return 0
    if P.transitive and P.reversible and eps == TOL.mixing_eps:
        t = _unif_single_state(P)
        if P.n <= 64:
            full = _search.first_time_monotone(P, _search.ratio_distance, eps)
            if full != t:
                raise StructuralError(
                    f"return-probability criterion gives {t}, definition gives {full}")
        return t
    return _search.first_time_monotone(P, _search.ratio_distance, eps)


def return_probability_curve_spectral(spec: Spectrum, tmax: int) -> np.ndarray:
    """``p_t(x,x) = (1/n) sum_k l_k^t`` for transitive chains."""
    t = np.arange(tmax + 1)[:, None]
    return (spec.eigenvalues[None, :] ** t).sum(axis=1) / spec.n


__all__ = [
    "GreenTable",
    "Spectrum",
    "compute_Q",
    "compute_Qt",
    "green_table",
    "qt_curve",
    "return_probability",
    "return_sum_Qt",
    "spectral_Qt",
    "spectrum",
    "uniform_mixing_time",
]
