"""Exact (non-sampled) mixing, hitting and intersection quantities.

The intersection routines work on the product chain of ``(X_t, Y_t, R_X, R_Y)``
where ``R_X = {X_0..X_t}`` and ``R_Y = {Y_0..Y_t}`` are stored as bitmasks;
the state is absorbed as soon as the ranges meet. This is exponential in
``n`` and therefore capped at tiny chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from intertime import _search
from intertime.chain import ChainMatrix
from intertime.config import TOL
from intertime.errors import BudgetError, StructuralError, ValidationError

T_H_MAX_N = 18
PRODUCT_MAX_N = 5
PRODUCT_MAX_T = 64


@dataclass(frozen=True)
class HittingTable:
    """``h[x, y] = E_x[tau_y]``; ``t_hit`` is the largest entry."""

    h: np.ndarray
    t_hit: float
    residual: float


def tv_mixing_time(P: ChainMatrix, eps: float | None = None) -> int:
    """Smallest ``t`` with ``max_x ||p_t(x, .) - pi||_TV <= eps`` (default 1/4)."""
    eps = TOL.mixing_eps if eps is None else eps
    if P.n == 1:
        return 0
    if P.transitive:
        return _search.scan_rows(P, [0], _search.tv_distance, eps)
    return _search.first_time_monotone(P, _search.tv_distance, eps)


def cesaro_mixing_time(P: ChainMatrix, eps: float | None = None) -> int:
    """Smallest ``t >= 1`` with ``max_x ||(1/t) sum_{s<t} p_s(x, .) - pi||_TV <= eps``."""
    eps = TOL.mixing_eps if eps is None else eps
    n = P.n
    if n > TOL.dense_max_n:
        raise BudgetError(f"Cesaro scan limited to n <= {TOL.dense_max_n}")
    rows = np.array([0]) if P.transitive else np.arange(n)
    cap = _search.step_cap(n)
    M = np.zeros((n, rows.size))
    M[rows, np.arange(rows.size)] = 1.0
    S = np.zeros_like(M)
    # dense operator is faster than CSR for the dense-ish chains we scan
    op = P.dense().T if (n <= 512 and rows.size > 1) else P.PT
    thresh = eps + TOL.criterion_atol
    for t in range(1, cap + 1):
        S += M
        if 0.5 * np.abs(S / t - P.pi[:, None]).sum(axis=0).max() <= thresh:
            return t
        M = op @ M
    raise _search.DivergenceError(f"Cesaro criterion not met within {cap} steps")


def _restricted_solve(A, b):
    if sp.issparse(A):
        if A.nnz > 0.25 * A.shape[0] ** 2:
            return scipy.linalg.solve(A.toarray(), b)
        return spla.spsolve(A.tocsc(), b)
    return scipy.linalg.solve(A, b)


def hitting_times_to(P: ChainMatrix, target) -> np.ndarray:
    """``E_x[tau_A]`` for every ``x``, where ``A`` is a state or a collection of states."""
    n = P.n
    A = np.zeros(n, dtype=bool)
    A[np.atleast_1d(np.asarray(target, dtype=np.int64))] = True
    rest = np.flatnonzero(~A)
    h = np.zeros(n)
    if rest.size == 0:
        return h
    sub = P.P[rest][:, rest]
    M = sp.identity(rest.size, format="csr") - sub
    try:
        with np.errstate(all="raise"):
            h[rest] = _restricted_solve(M, np.ones(rest.size))
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        raise StructuralError(f"singular hitting system: chain is reducible ({exc})") from exc
    if not np.all(np.isfinite(h)):
        raise StructuralError("singular hitting system: chain is reducible")
    return h


def hitting_times(P: ChainMatrix) -> HittingTable:
    """Full table ``E_x[tau_y]`` via the fundamental matrix ``(I - P + 1 pi)^-1``.

    ``E_x tau_y = (Z[y,y] - Z[x,y]) / pi(y)``. The first-step equations are
    checked afterwards; residuals are reported relative to ``max(1, t_hit)``.
    """
    n = P.n
    if n > TOL.dense_max_n:
        raise BudgetError(f"dense hitting table limited to n <= {TOL.dense_max_n}")
    if n == 1:
        return HittingTable(np.zeros((1, 1)), 0.0, 0.0)
    D = P.dense()
    try:
        Z = np.linalg.inv(np.eye(n) - D + P.pi[None, :])
    except np.linalg.LinAlgError as exc:
        raise StructuralError(f"fundamental matrix is singular: {exc}") from exc
    h = (np.diag(Z)[None, :] - Z) / P.pi[None, :]
    np.fill_diagonal(h, 0.0)
    t_hit = float(h.max())
    res = first_step_residual(D, h)
    if res > TOL.hitting_residual * max(1.0, t_hit):
        raise StructuralError(f"hitting table residual {res:.3g} too large")
    return HittingTable(h, t_hit, res)


def first_step_residual(D: np.ndarray, h: np.ndarray) -> float:
    """``max_{x != y} |h[x,y] - 1 - sum_z p(x,z) h[z,y]|``."""
    R = h - 1.0 - D @ h
    np.fill_diagonal(R, 0.0)
    return float(np.abs(R).max())


def t_hit(P: ChainMatrix) -> float:
    """``max_{x,y} E_x[tau_y]``; a single target suffices for transitive chains."""
    if P.n == 1:
        return 0.0
    if P.transitive:
        return float(hitting_times_to(P, 0).max())
    return hitting_times(P).t_hit


def _minimal_large_sets(pi: np.ndarray) -> np.ndarray:
    """Bitmasks of sets with ``pi(A) >= 1/8`` none of whose proper subsets qualify."""
    n = pi.size
    masks = np.arange(1 << n, dtype=np.int64)
    mass = np.zeros(masks.size)
    minpi = np.full(masks.size, np.inf)
    for i in range(n):
        has = (masks >> i) & 1 == 1
        mass[has] += pi[i]
        minpi[has] = np.minimum(minpi[has], pi[i])
    lo = TOL.large_set_mass - TOL.mass_atol
    # hitting times only shrink when A grows, so minimal sets carry the maximum
    keep = (mass >= lo) & (mass - minpi < lo)
    return masks[keep]


def t_H_bruteforce(P: ChainMatrix, max_n: int = T_H_MAX_N) -> tuple[float, tuple[int, ...]]:
    """``max_{x, A : pi(A) >= 1/8} E_x[tau_A]`` by subset enumeration.

    Returns the value and one maximising set. Only inclusion-minimal sets
    are solved for, since enlarging ``A`` cannot increase ``E_x[tau_A]``.

    Raises
    ------
    BudgetError
        ``n > max_n``; use :func:`t_H_large_sets_heuristic` instead.
    """
    n = P.n
    if n > max_n:
        raise BudgetError(f"t_H brute force needs n <= {max_n} (got {n}); "
                          "use t_H_large_sets_heuristic for a lower bound")
    if n == 1:
        return 0.0, (0,)
    D = P.dense()
    best, arg = -1.0, ()
    for mask in _minimal_large_sets(np.asarray(P.pi)):
        inA = np.array([(int(mask) >> i) & 1 for i in range(n)], dtype=bool)
        rest = np.flatnonzero(~inA)
        if rest.size == 0:
            val = 0.0
        else:
            h = scipy.linalg.solve(np.eye(rest.size) - D[np.ix_(rest, rest)], np.ones(rest.size))
            val = float(h.max())
        if val > best:
            best, arg = val, tuple(np.flatnonzero(inA).tolist())
    return best, arg


def t_H_large_sets_heuristic(P: ChainMatrix, candidates) -> tuple[float, int]:
    """Lower bound on ``t_H`` from a supplied family of large sets.

    Returns ``(max over candidates of max_x E_x[tau_A], index of best candidate)``.

    Raises
    ------
    ValidationError
        A candidate has stationary mass below 1/8.
    """
    candidates = [np.atleast_1d(np.asarray(c, dtype=np.int64)) for c in candidates]
    if not candidates:
        raise ValidationError("need at least one candidate set")
    lo = TOL.large_set_mass - TOL.mass_atol
    for i, c in enumerate(candidates):
        mass = float(P.pi[np.unique(c)].sum())
        if mass < lo:
            raise ValidationError(f"candidate {i} has pi(A) = {mass:.4g} < 1/8")
    vals = [float(hitting_times_to(P, c).max()) for c in candidates]
    i = int(np.argmax(vals))
    return vals[i], i


# ---------------------------------------------------------------------------
# product-range chain


@dataclass
class _ProductSystem:
    states: list          # (x, y, mx, my)
    index: dict
    T: sp.csr_matrix      # transient -> transient
    absorb: np.ndarray    # transient -> absorbed, one-step probability


def _product_system(P: ChainMatrix, starts, max_states: int) -> _ProductSystem:
    rows = P.rows()
    index: dict = {}
    states: list = []
    src, dst, val = [], [], []
    absorb: list[float] = []

    def add(s):
        if s not in index:
            if len(states) >= max_states:
                raise BudgetError(f"product-range state space exceeds {max_states} states")
            index[s] = len(states)
            states.append(s)
            absorb.append(0.0)
        return index[s]

    for s in starts:
        add(s)
    i = 0
    while i < len(states):
        x, y, mx, my = states[i]
        for x2, px in rows[x]:
            nmx = mx | (1 << x2)
            for y2, py in rows[y]:
                nmy = my | (1 << y2)
                p = px * py
                if nmx & nmy:
                    absorb[i] += p
                else:
                    j = add((x2, y2, nmx, nmy))
                    src.append(i)
                    dst.append(j)
                    val.append(p)
        i += 1
    m = len(states)
    T = sp.coo_matrix((val, (src, dst)), shape=(m, m)).tocsr()
    return _ProductSystem(states, index, T, np.asarray(absorb))


def _check_product_budget(P: ChainMatrix, max_n: int) -> None:
    if P.n > max_n:
        raise BudgetError(f"exact intersection routines need n <= {max_n}, got {P.n}")


def exact_intersection_expectation(P: ChainMatrix, x0: int, y0: int,
                                   max_n: int = PRODUCT_MAX_N,
                                   max_states: int = 30_000_000) -> float:
    """``E_{x0,y0}[tau_I]`` from the absorbing product-range chain.

    The two chains are exchangeable, so the pair is put in sorted order first;
    this makes the result exactly symmetric in ``(x0, y0)``.
    """
    _check_product_budget(P, max_n)
    x0, y0 = sorted((int(x0), int(y0)))
    if x0 == y0:
        return 0.0
    sysm = _product_system(P, [(x0, y0, 1 << x0, 1 << y0)], max_states)
    m = len(sysm.states)
    A = (sp.identity(m, format="csc") - sysm.T.tocsc())
    h = spla.spsolve(A, np.ones(m)) if m > 1 else np.array([1.0 / (1.0 - sysm.T[0, 0])])
    return float(np.atleast_1d(h)[0])


def exact_intersection_curve(P: ChainMatrix, mu_x, mu_y, tmax: int,
                             max_n: int = PRODUCT_MAX_N, max_t: int = PRODUCT_MAX_T,
                             max_states: int = 30_000_000) -> np.ndarray:
    """``P(tau_I <= t) = P(I_t > 0)`` for ``t = 0..tmax`` under ``mu_x x mu_y`` starts."""
    _check_product_budget(P, max_n)
    if tmax > max_t:
        raise BudgetError(f"exact intersection probability limited to t <= {max_t}")
    n = P.n
    mu_x = np.asarray(mu_x, dtype=np.float64)
    mu_y = np.asarray(mu_y, dtype=np.float64)
    absorbed0 = float(np.dot(mu_x, mu_y))
    starts, mass = [], []
    for x in range(n):
        for y in range(n):
            if x != y and mu_x[x] * mu_y[y] > 0:
                starts.append((x, y, 1 << x, 1 << y))
                mass.append(mu_x[x] * mu_y[y])
    out = np.empty(tmax + 1)
    out[0] = absorbed0
    if not starts:
        out[:] = absorbed0
        return out
    sysm = _product_system(P, starts, max_states)
    m = np.zeros(len(sysm.states))
    m[: len(mass)] = mass
    TT = sysm.T.T.tocsr()
    absorbed = absorbed0
    for t in range(1, tmax + 1):
        absorbed += float(sysm.absorb @ m)
        m = TT @ m
        out[t] = absorbed
    return np.minimum(out, 1.0)


def exact_intersection_probability(P: ChainMatrix, mu_x, mu_y, t: int, **kw) -> float:
    """``P(I_t > 0)``; point starts may be given as integers."""
    n = P.n
    if np.ndim(mu_x) == 0:
        mu_x = np.eye(n)[int(mu_x)]
    if np.ndim(mu_y) == 0:
        mu_y = np.eye(n)[int(mu_y)]
    return float(exact_intersection_curve(P, mu_x, mu_y, t, **kw)[t])


def exact_tI(P: ChainMatrix, max_n: int = PRODUCT_MAX_N) -> tuple[float, tuple[int, int]]:
    """``max_{x,y} E_{x,y}[tau_I]`` with the maximising pair."""
    best, arg = 0.0, (0, 0)
    for x in range(P.n):
        for y in range(x + 1, P.n):
            v = exact_intersection_expectation(P, x, y, max_n=max_n)
            if v > best:
                best, arg = v, (x, y)
    return best, arg
