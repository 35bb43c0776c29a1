"""Numba kernels for path sampling.

Randomness is counter based: replicate ``r`` under key ``k`` owns the
SplitMix64 sequence that starts at ``mix(k + mix(r + 1))``. Nothing is shared
between replicates, so results do not depend on how ``prange`` schedules
them across threads.
"""

from __future__ import annotations

import warnings

import numba
import numpy as np
from numba import prange

# numba falls back to another threading layer when TBB is too old; the notice is noise
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_MASK = (1 << 64) - 1


def mix64_py(z: int) -> int:
    """Pure-Python SplitMix64 finaliser (same function as the kernel's)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_key(seed: int, *parts: int) -> int:
    """Fold a seed and integer tags into a 64-bit stream key."""
    k = mix64_py(int(seed) & _MASK)
    for p in parts:
        k = mix64_py((k + mix64_py((int(p) + 0x632BE59BD9B4E019) & _MASK)) & _MASK)
    return k


@numba.njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(inline="always")
def _stream(key, rep):
    return _mix(key + _mix(np.uint64(rep) + np.uint64(1)))


@numba.njit(inline="always")
def _uniform(state):
    state = state + GOLDEN
    return state, np.float64(_mix(state) >> _S11) * _INV53


@numba.njit(cache=True)
def build_alias(indptr, data):
    """Vose alias tables, one per CSR row; ``aj`` holds row-local offsets."""
    nnz = data.shape[0]
    aq = np.ones(nnz)
    aj = np.zeros(nnz, dtype=np.int32)
    nrows = indptr.shape[0] - 1
    for r in range(nrows):
        lo = indptr[r]
        k = indptr[r + 1] - lo
        if k == 0:
            continue
        total = 0.0
        for i in range(k):
            total += data[lo + i]
        scaled = np.empty(k)
        small = np.empty(k, dtype=np.int64)
        large = np.empty(k, dtype=np.int64)
        ns = 0
        nl = 0
        for i in range(k):
            scaled[i] = data[lo + i] * k / total
            aj[lo + i] = i
            if scaled[i] < 1.0:
                small[ns] = i
                ns += 1
            else:
                large[nl] = i
                nl += 1
        while ns > 0 and nl > 0:
            ns -= 1
            s = small[ns]
            g = large[nl - 1]
            aq[lo + s] = scaled[s]
            aj[lo + s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            if scaled[g] < 1.0:
                nl -= 1
                small[ns] = g
                ns += 1
        for i in range(nl):
            aq[lo + large[i]] = 1.0
        for i in range(ns):
            aq[lo + small[i]] = 1.0
    return aq, aj


@numba.njit(inline="always")
def _draw(row, indptr, indices, aq, aj, state):
    lo = indptr[row]
    k = indptr[row + 1] - lo
    state, u = _uniform(state)
    u = u * k
    i = np.int64(u)
    if i >= k:
        i = k - 1
    if u - i < aq[lo + i]:
        j = i
    else:
        j = aj[lo + i]
    return indices[lo + j], state


@numba.njit(parallel=True, cache=True)
def tau_kernel(indptr, indices, aq, aj, pi_ptr, pi_idx, pi_q, pi_j,
               xs, ys, nrep, cap, key, out, trunc):
    """First intersection time of the visited ranges, per (pair, replicate).

    ``xs[p] < 0`` (or ``ys[p] < 0``) means "start from the stationary law".
    """
    npairs = xs.shape[0]
    n = indptr.shape[0] - 1
    total = npairs * nrep
    for flat in prange(total):
        p = flat // nrep
        r = flat - p * nrep
        state = _stream(key[p], r)
        x = xs[p]
        y = ys[p]
        if x < 0:
            x, state = _draw(0, pi_ptr, pi_idx, pi_q, pi_j, state)
        if y < 0:
            y, state = _draw(0, pi_ptr, pi_idx, pi_q, pi_j, state)
        if x == y:
            out[p, r] = 0
            trunc[p, r] = False
            continue
        vx = np.zeros(n, dtype=np.uint8)
        vy = np.zeros(n, dtype=np.uint8)
        vx[x] = 1
        vy[y] = 1
        t = 0
        hit = False
        while t < cap:
            t += 1
            x, state = _draw(x, indptr, indices, aq, aj, state)
            y, state = _draw(y, indptr, indices, aq, aj, state)
            vx[x] = 1
            vy[y] = 1
            if vy[x] == 1 or vx[y] == 1:
                hit = True
                break
        out[p, r] = t
        trunc[p, r] = not hit


@numba.njit(parallel=True, cache=True)
def intersections_kernel(indptr, indices, aq, aj, x0, y0, t, nrep, key, out):
    """``I_t = sum_{i,j<=t} 1(X_i = Y_j)`` per replicate."""
    n = indptr.shape[0] - 1
    for r in prange(nrep):
        state = _stream(key, r)
        cy = np.zeros(n, dtype=np.int64)
        y = y0
        cy[y] += 1
        for _ in range(t):
            y, state = _draw(y, indptr, indices, aq, aj, state)
            cy[y] += 1
        x = x0
        acc = cy[x]
        for _ in range(t):
            x, state = _draw(x, indptr, indices, aq, aj, state)
            acc += cy[x]
        out[r] = acc


@numba.njit(parallel=True, cache=True)
def green_path_kernel(indptr, indices, aq, aj, x0, t, g, nrep, key, out):
    """``S_t = sum_{j<=t} g[X_j]`` along one path from ``x0``, per replicate."""
    for r in prange(nrep):
        state = _stream(key, r)
        x = x0
        acc = g[x]
        for _ in range(t):
            x, state = _draw(x, indptr, indices, aq, aj, state)
            acc += g[x]
        out[r] = acc


@numba.njit(cache=True)
def sample_path(indptr, indices, aq, aj, x0, t, key, rep):
    """One trajectory ``X_0..X_t`` (used by tests and diagnostics)."""
    state = _stream(key, rep)
    path = np.empty(t + 1, dtype=np.int64)
    path[0] = x0
    x = x0
    for i in range(t):
        x, state = _draw(x, indptr, indices, aq, aj, state)
        path[i + 1] = x
    return path
