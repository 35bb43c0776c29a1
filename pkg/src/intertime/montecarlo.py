"""Monte Carlo estimation of intersection times and intersection counts.

All estimators are reproducible: every replicate draws from its own
counter-based stream keyed by ``(seed, purpose, start pair, replicate)``, so
results are identical for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np
from scipy.sparse.csgraph import shortest_path

from intertime import _kernels as K
from intertime.chain import ChainMatrix
from intertime.errors import ValidationError

DEFAULT_SEED = 0xC0FFEE
EXHAUSTIVE_MAX_N = 64
CANDIDATE_K = 32
STAR_EXHAUSTIVE_MAX_N = 1024

# stream purpose tags
_TAU, _SCREEN, _FINAL, _STAR, _PIPI, _COUNT, _GREEN, _CAND = range(1, 9)


@dataclass(frozen=True)
class EstimateWithCI:
    """Sample mean with its standard error (sample sd / sqrt(samples))."""

    mean: float
    std_error: float
    samples: int
    seed: int
    truncation_cap: int
    truncated_fraction: float

    @property
    def lower_bound(self) -> bool:
        """True when some replicates hit the cap, so ``mean`` underestimates."""
        return self.truncated_fraction > 0

    @property
    def upper(self) -> float:
        return self.mean + 3 * self.std_error

    @property
    def lower(self) -> float:
        return self.mean - 3 * self.std_error

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lower_bound"] = self.lower_bound
        return d


@dataclass(frozen=True)
class MaxEstimate:
    """Maximum over start configurations of an estimated expectation."""

    estimate: EstimateWithCI
    argmax: tuple
    mode: str            # "exhaustive", "transitive" or "lower-bound"
    candidates: int

    def to_dict(self) -> dict:
        return {**self.estimate.to_dict(), "argmax": list(self.argmax), "mode": self.mode,
                "candidates": self.candidates}


def set_threads(k: int | None) -> int:
    """Set the numba worker count (clamped to what numba was started with)."""
    limit = numba.config.NUMBA_NUM_THREADS
    k = limit if k is None else max(1, min(int(k), limit))
    numba.set_num_threads(k)
    return k


class _Sampler:
    """Alias tables for a chain's rows and for its stationary law."""

    def __init__(self, chain: ChainMatrix):
        P = chain.P
        self.n = chain.n
        self.indptr = np.ascontiguousarray(P.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(P.indices, dtype=np.int64)
        self.aq, self.aj = K.build_alias(self.indptr, np.ascontiguousarray(P.data))
        self.pi_ptr = np.array([0, chain.n], dtype=np.int64)
        self.pi_idx = np.arange(chain.n, dtype=np.int64)
        self.pi_q, self.pi_j = K.build_alias(self.pi_ptr, np.ascontiguousarray(chain.pi))


_SAMPLERS: dict[int, tuple[ChainMatrix, _Sampler]] = {}


def _sampler(chain: ChainMatrix) -> _Sampler:
    hit = _SAMPLERS.get(id(chain))
    if hit is not None and hit[0] is chain:
        return hit[1]
    if len(_SAMPLERS) > 8:
        _SAMPLERS.clear()
    s = _Sampler(chain)
    _SAMPLERS[id(chain)] = (chain, s)
    return s


def default_cap(chain: ChainMatrix) -> int:
    """``100 * (n + t_rel)``, with ``t_rel`` from the spectrum when affordable."""
    from intertime.spectral import spectrum

    n = chain.n
    try:
        lam = spectrum(chain, closed_form=True) if (chain.reversible and (
            n <= 1024 or "family" in chain.meta)) else None
    except Exception:
        lam = None
    trel = 1.0 / max(1e-300, 1.0 - lam.lambda2) if lam is not None and n > 1 else float(n * n)
    return int(100 * (n + math.ceil(trel)))


def _law(v, n: int) -> int:
    if isinstance(v, str):
        if v != "pi":
            raise ValidationError(f"start law must be a state or 'pi', got {v!r}")
        return -1
    v = int(v)
    if not 0 <= v < n:
        raise ValidationError(f"start state {v} out of range")
    return v


def sample_tau_I(chain: ChainMatrix, x0, y0, samples: int, cap: int | None = None,
                 seed: int = DEFAULT_SEED, stream: tuple = ()) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``samples`` copies of ``tau_I`` (capped at ``cap``).

    ``x0``/``y0`` are states or ``"pi"``. Returns ``(times, truncated)``.
    """
    cap = default_cap(chain) if cap is None else int(cap)
    if cap < 1:
        raise ValidationError("cap must be >= 1")
    xs = np.array([_law(x0, chain.n)], dtype=np.int64)
    ys = np.array([_law(y0, chain.n)], dtype=np.int64)
    keys = np.array([K.derive_key(seed, _TAU, *stream, int(xs[0]), int(ys[0]))], dtype=np.uint64)
    times, trunc = _run_tau(chain, xs, ys, samples, cap, keys)
    return times[0], trunc[0]


def _run_tau(chain, xs, ys, nrep, cap, keys):
    s = _sampler(chain)
    out = np.zeros((xs.size, nrep), dtype=np.int64)
    trunc = np.zeros((xs.size, nrep), dtype=np.bool_)
    if nrep > 0 and xs.size > 0:
        K.tau_kernel(s.indptr, s.indices, s.aq, s.aj, s.pi_ptr, s.pi_idx, s.pi_q, s.pi_j,
                     xs, ys, int(nrep), int(cap), keys, out, trunc)
    return out, trunc


def summarize(values, seed: int, cap: int = 0, truncated=None) -> EstimateWithCI:
    v = np.asarray(values, dtype=np.float64)
    m = v.size
    mean = float(v.mean()) if m else 0.0
    se = float(v.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    tf = float(np.mean(truncated)) if truncated is not None and m else 0.0
    return EstimateWithCI(mean, se, int(m), int(seed), int(cap), tf)


def estimate_tau_I(chain: ChainMatrix, x0, y0, samples: int, cap: int | None = None,
                   seed: int = DEFAULT_SEED) -> EstimateWithCI:
    """Mean of ``tau_I`` for fixed starts (states or ``"pi"``)."""
    cap = default_cap(chain) if cap is None else int(cap)
    t, tr = sample_tau_I(chain, x0, y0, samples, cap, seed)
    return summarize(t, seed, cap, tr)


def _adjacency(chain: ChainMatrix):
    A = chain.P.copy()
    A.setdiag(0)
    A.eliminate_zeros()
    return A


def _farthest_and_random(dist: np.ndarray, pool: np.ndarray, k: int, rng) -> np.ndarray:
    order = pool[np.lexsort((pool, -dist[pool]))[:k]]
    extra = rng.choice(pool, size=min(k, pool.size), replace=False)
    return np.unique(np.concatenate([order, extra]))


def candidate_pairs(chain: ChainMatrix, seed: int = DEFAULT_SEED,
                    k: int = CANDIDATE_K) -> tuple[np.ndarray, np.ndarray, str]:
    """Start pairs to search for the worst case, with the search mode.

    * transitive with ``n - 1 <= 2k``: ``(0, y)`` for all ``y``, since every
      pair is the image of one of these.
    * ``n <= 64``: every unordered pair (the two chains are exchangeable).
    * otherwise ``k`` pairs that are far apart in graph distance plus ``k``
      random pairs. For transitive chains the first state is fixed at 0.
      Maxima over these candidates are lower bounds.
    """
    n = chain.n
    if chain.transitive and n - 1 <= 2 * k:
        y = np.arange(1, n, dtype=np.int64)
        return np.zeros_like(y), y, "transitive"
    if n <= EXHAUSTIVE_MAX_N:
        x, y = np.triu_indices(n, 1)
        return x.astype(np.int64), y.astype(np.int64), "exhaustive"
    rng = np.random.default_rng(K.derive_key(seed, _CAND) % (2 ** 63))
    if chain.transitive:
        y = np.arange(1, n, dtype=np.int64)
        d0 = shortest_path(_adjacency(chain), directed=False, unweighted=True, indices=0)
        y = _farthest_and_random(d0, y, k, rng).astype(np.int64)
        return np.zeros_like(y), y, "lower-bound"
    A = _adjacency(chain)
    if n <= 1024:
        D = shortest_path(A, directed=False, unweighted=True)
        x, y = np.triu_indices(n, 1)
        flat = _farthest_and_random(D[x, y], np.arange(x.size), k, rng)
        return x[flat].astype(np.int64), y[flat].astype(np.int64), "lower-bound"
    # double sweep: a far-out state, then the states farthest from it
    d0 = shortest_path(A, directed=False, unweighted=True, indices=0)
    a = int(np.argmax(d0))
    da = shortest_path(A, directed=False, unweighted=True, indices=a)
    pool = np.delete(np.arange(n), a)
    y = _farthest_and_random(da, pool, k, rng)
    rx = rng.integers(0, n, size=k)
    ry = rng.integers(0, n, size=k)
    keep = rx != ry
    xs = np.concatenate([np.full(y.size, a), np.minimum(rx, ry)[keep]])
    ys = np.concatenate([y, np.maximum(rx, ry)[keep]])
    pairs = np.unique(np.stack([np.minimum(xs, ys), np.maximum(xs, ys)], 1), axis=0)
    return pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64), "lower-bound"


def _screen_then_confirm(chain, xs, ys, samples, cap, seed, tag, screen, top):
    """Screen all candidates cheaply, re-estimate the leaders on fresh streams."""
    if xs.size == 0:
        return EstimateWithCI(0.0, 0.0, int(samples), int(seed), int(cap), 0.0), (0, 0)
    if xs.size > top:
        keys = np.array([K.derive_key(seed, _SCREEN, tag, int(a), int(b))
                         for a, b in zip(xs, ys)], dtype=np.uint64)
        t, _ = _run_tau(chain, xs, ys, screen, cap, keys)
        means = t.mean(axis=1)
        lead = np.argsort(-means, kind="stable")[:top]
        xs, ys = xs[lead], ys[lead]
    keys = np.array([K.derive_key(seed, _FINAL, tag, int(a), int(b))
                     for a, b in zip(xs, ys)], dtype=np.uint64)
    t, tr = _run_tau(chain, xs, ys, samples, cap, keys)
    means = t.mean(axis=1)
    best = int(np.argmax(means))
    est = summarize(t[best], seed, cap, tr[best])
    return est, (int(xs[best]), int(ys[best]))


def _screen_size(samples: int, screen: int | None) -> int:
    return max(32, samples // 50) if screen is None else int(screen)


def estimate_tI(chain: ChainMatrix, samples: int, cap: int | None = None,
                seed: int = DEFAULT_SEED, screen: int | None = None,
                top: int = 4) -> MaxEstimate:
    """Estimate ``t_I = max_{x,y} E_{x,y}[tau_I]``.

    Candidates from :func:`candidate_pairs` are screened with ``screen``
    replicates each (default ``max(32, samples // 50)``); the ``top`` leaders
    are then re-run with ``samples`` replicates on independent streams and the
    largest mean is reported. Re-running removes the selection bias of the
    screening maximum.
    """
    cap = default_cap(chain) if cap is None else int(cap)
    if chain.n == 1:
        return MaxEstimate(EstimateWithCI(0.0, 0.0, int(samples), int(seed), cap, 0.0),
                           (0, 0), "exhaustive", 1)
    xs, ys, mode = candidate_pairs(chain, seed)
    est, pair = _screen_then_confirm(chain, xs, ys, samples, cap, seed, 0,
                                     _screen_size(samples, screen), top)
    return MaxEstimate(est, pair, mode, int(xs.size))


def estimate_tI_star(chain: ChainMatrix, samples: int, cap: int | None = None,
                     seed: int = DEFAULT_SEED, screen: int | None = None,
                     top: int = 4) -> MaxEstimate:
    """Estimate ``t_I* = max_x E_{x,pi}[tau_I]`` (second chain started from ``pi``)."""
    cap = default_cap(chain) if cap is None else int(cap)
    n = chain.n
    if n == 1:
        return MaxEstimate(EstimateWithCI(0.0, 0.0, int(samples), int(seed), cap, 0.0),
                           (0, "pi"), "exhaustive", 1)
    if chain.transitive:
        xs, mode = np.zeros(1, dtype=np.int64), "transitive"
    elif n <= STAR_EXHAUSTIVE_MAX_N:
        xs, mode = np.arange(n, dtype=np.int64), "exhaustive"
    else:
        px, py, _ = candidate_pairs(chain, seed)
        xs, mode = np.unique(np.concatenate([px, py])), "lower-bound"
    ys = np.full(xs.size, -1, dtype=np.int64)
    est, pair = _screen_then_confirm(chain, xs, ys, samples, cap, seed, _STAR,
                                     _screen_size(samples, screen), top)
    return MaxEstimate(est, (pair[0], "pi"), mode, int(xs.size))


def estimate_pi_pi_expectation(chain: ChainMatrix, samples: int, cap: int | None = None,
                               seed: int = DEFAULT_SEED) -> EstimateWithCI:
    """``E_{pi,pi}[tau_I]``: both starts drawn independently from ``pi``."""
    cap = default_cap(chain) if cap is None else int(cap)
    keys = np.array([K.derive_key(seed, _PIPI)], dtype=np.uint64)
    t, tr = _run_tau(chain, np.array([-1]), np.array([-1]), samples, cap, keys)
    return summarize(t[0], seed, cap, tr[0])


def count_intersections(chain: ChainMatrix, x0: int, y0: int, t: int, samples: int,
                        seed: int = DEFAULT_SEED) -> np.ndarray:
    """Samples of ``I_t = sum_{i,j<=t} 1(X_i = Y_j)``.

    Computed as ``sum_i c_Y(X_i)`` where ``c_Y`` tallies the visits of ``Y``.
    """
    if t < 0:
        raise ValidationError("horizon must be nonnegative")
    s = _sampler(chain)
    out = np.zeros(samples, dtype=np.int64)
    key = np.uint64(K.derive_key(seed, _COUNT, int(x0), int(y0), int(t)))
    K.intersections_kernel(s.indptr, s.indices, s.aq, s.aj, _law(x0, chain.n),
                           _law(y0, chain.n), int(t), int(samples), key, out)
    return out


@dataclass(frozen=True)
class MomentCheck:
    """Empirical first and second moments of ``I_t`` next to ``Q_t``."""

    t: int
    Qt: float
    mean: EstimateWithCI
    second: EstimateWithCI

    @property
    def rel_error(self) -> float:
        return abs(self.mean.mean - self.Qt) / self.Qt

    @property
    def rel_se(self) -> float:
        return self.mean.std_error / self.Qt

    @property
    def first_ok(self) -> bool:
        return self.rel_error <= max(0.02, 3 * self.rel_se)

    @property
    def second_ok(self) -> bool:
        rse = self.second.std_error / self.second.mean if self.second.mean else 0.0
        return self.second.mean <= 4 * self.Qt ** 2 * (1 + 3 * rse)


def intersection_moments(chain: ChainMatrix, x: int, t: int, samples: int,
                         seed: int = DEFAULT_SEED) -> MomentCheck:
    """Compare mean ``I_t`` with ``Q_t`` and mean ``I_t^2`` with ``4 Q_t^2`` from ``(x, x)``."""
    from intertime.spectral import compute_Qt

    I = count_intersections(chain, x, x, t, samples, seed).astype(np.float64)
    qt = compute_Qt(chain, x, t, check=False)
    return MomentCheck(int(t), qt, summarize(I, seed), summarize(I * I, seed))


@dataclass(frozen=True)
class GreenPathCheck:
    t: int
    Qt: float
    frequency: float
    std_error: float
    samples: int

    @property
    def ok(self) -> bool:
        return self.frequency >= 1 / 16 - 3 * self.std_error


def s_t_diagnostic(chain: ChainMatrix, x: int, t: int, samples: int,
                   seed: int = DEFAULT_SEED) -> GreenPathCheck:
    """Empirical ``P_x(S_t >= Q_t / 2)`` with ``S_t = sum_{j<=t} g_t(x, X_j)``."""
    from intertime.spectral import green_table

    g = green_table(chain, x, t).g
    qt = float(g @ g)
    s = _sampler(chain)
    out = np.zeros(samples)
    key = np.uint64(K.derive_key(seed, _GREEN, int(x), int(t)))
    K.green_path_kernel(s.indptr, s.indices, s.aq, s.aj, int(x), int(t), g, int(samples),
                        key, out)
    # S_t and Q_t come from the same float sums; allow round-off at equality
    hits = out >= qt / 2 - 1e-9 * qt
    f = float(hits.mean())
    se = math.sqrt(f * (1 - f) / samples) if samples else 0.0
    return GreenPathCheck(int(t), qt, f, se, int(samples))


__all__ = [
    "DEFAULT_SEED",
    "EstimateWithCI",
    "MaxEstimate",
    "candidate_pairs",
    "count_intersections",
    "default_cap",
    "estimate_pi_pi_expectation",
    "estimate_tI",
    "estimate_tI_star",
    "estimate_tau_I",
    "intersection_moments",
    "s_t_diagnostic",
    "sample_tau_I",
    "set_threads",
    "summarize",
]
