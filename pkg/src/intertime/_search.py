"""First-passage searches over the distributions ``p_t(x, .)``.

Two strategies:

* ``scan_rows`` evolves a few start rows one step at a time. Used for
  transitive chains (one row stands for all) and for criteria that are not
  monotone in ``t``.
* ``first_time_monotone`` squares the dense matrix and bisects on the binary
  expansion of ``t``; valid when the distance is nonincreasing in ``t``,
  which holds for the total-variation and uniform (ratio) distances.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from intertime.chain import ChainMatrix
from intertime.config import TOL
from intertime.errors import BudgetError, DivergenceError

Distance = Callable[[np.ndarray, np.ndarray, np.ndarray], float]


def step_cap(n: int) -> int:
    return 10 * n ** 3


def tv_distance(M: np.ndarray, pi: np.ndarray, rows: np.ndarray) -> float:
    return float(0.5 * np.abs(M - pi).sum(axis=1).max())


def ratio_distance(M: np.ndarray, pi: np.ndarray, rows: np.ndarray) -> float:
    return float(np.abs(M / pi - 1.0).max())


def scan_rows(chain: ChainMatrix, rows, distance: Distance, eps: float,
              cap: int | None = None) -> int:
    """Smallest ``t >= 0`` with ``distance(P^t[rows]) <= eps`` by direct stepping."""
    rows = np.asarray(rows, dtype=np.int64)
    cap = step_cap(chain.n) if cap is None else cap
    M = np.zeros((chain.n, rows.size))
    M[rows, np.arange(rows.size)] = 1.0
    PT = chain.PT
    pi = chain.pi
    thresh = eps + TOL.criterion_atol
    for t in range(cap + 1):
        if distance(M.T, pi, rows) <= thresh:
            return t
        M = PT @ M
    raise DivergenceError(f"criterion not met within {cap} steps")


def first_time_monotone(chain: ChainMatrix, distance: Distance, eps: float,
                        cap: int | None = None) -> int:
    """Smallest ``t`` with ``distance(P^t) <= eps`` for a nonincreasing distance."""
    n = chain.n
    if n > TOL.dense_max_n:
        raise BudgetError(f"dense powering limited to n <= {TOL.dense_max_n}, got {n}")
    cap = step_cap(n) if cap is None else cap
    pi = chain.pi
    rows = np.arange(n)
    thresh = eps + TOL.criterion_atol
    cur = np.eye(n)
    if distance(cur, pi, rows) <= thresh:
        return 0
    powers = [chain.dense()]
    while distance(powers[-1], pi, rows) > thresh:
        if 2 ** (len(powers) - 1) > cap:
            raise DivergenceError(f"criterion not met within {cap} steps")
        powers.append(powers[-1] @ powers[-1])
    # invariant: distance(cur) > eps at t, and P^(t + 2^k) satisfies it
    t = 0
    for k in range(len(powers) - 2, -1, -1):
        cand = cur @ powers[k]
        if distance(cand, pi, rows) > thresh:
            cur = cand
            t += 2 ** k
    if t + 1 > cap:
        raise DivergenceError(f"criterion not met within {cap} steps")
    return t + 1
