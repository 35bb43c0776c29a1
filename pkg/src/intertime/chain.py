"""Finite Markov chains on ``{0, ..., n-1}``.

A :class:`ChainMatrix` is an immutable row-stochastic sparse operator bundled
with its stationary distribution and a few structural flags. Distributions are
plain 1-d float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numba
import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from intertime.config import TOL
from intertime.errors import StructuralError, ValidationError


@dataclass(frozen=True, eq=False)
class ChainMatrix:
    """Row-stochastic transition operator with stationary distribution.

    Build instances with :meth:`from_entries` or :meth:`from_dense`; the
    constructor assumes its arguments are already canonical.

    Attributes
    ----------
    P : scipy.sparse.csr_matrix
        Transition matrix, rows sorted by target, duplicates merged.
    pi : ndarray
        Stationary distribution.
    lazy, reversible : bool
        Verified properties (diagonal >= 1/2, detailed balance).
    transitive : bool
        Claimed by the caller; only ever checked by
        :func:`check_transitive_heuristic`.
    regular : bool
        ``P`` is symmetric (simple random walk on a regular graph, lazy or not).
    label : str
        Free-form instance name used in reports.
    """

    P: sp.csr_matrix
    pi: np.ndarray
    lazy: bool
    reversible: bool
    transitive: bool = False
    regular: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def nnz(self) -> int:
        return self.P.nnz

    @classmethod
    def from_entries(
        cls,
        n: int,
        src: Iterable[int],
        dst: Iterable[int],
        prob: Iterable[float],
        *,
        transitive: bool = False,
        regular: bool | None = None,
        label: str = "",
        meta: dict | None = None,
        pi=None,
    ) -> "ChainMatrix":
        """Validate ``(src, dst, prob)`` triples and build a chain.

        Duplicate ``(src, dst)`` pairs are summed. Entries below
        ``TOL.zero_weight`` are dropped before the irreducibility scan.
        ``regular=None`` means "detect": the flag is set iff ``P`` is symmetric.
        A known ``pi`` may be supplied; it is still checked against ``P``.
        """
        if int(n) < 1:
            raise ValidationError(f"state count must be positive, got {n}")
        n = int(n)
        src = np.asarray(list(src) if not isinstance(src, np.ndarray) else src, dtype=np.int64)
        dst = np.asarray(list(dst) if not isinstance(dst, np.ndarray) else dst, dtype=np.int64)
        prob = np.asarray(list(prob) if not isinstance(prob, np.ndarray) else prob, dtype=np.float64)
        if not (src.shape == dst.shape == prob.shape):
            raise ValidationError("src, dst and prob must have equal length")
        if src.size and (src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n):
            raise ValidationError(f"state index out of range [0, {n})")
        if np.any(~np.isfinite(prob)) or np.any(prob < 0) or np.any(prob > 1):
            bad = int(np.flatnonzero(~np.isfinite(prob) | (prob < 0) | (prob > 1))[0])
            raise ValidationError(f"probability {prob[bad]!r} on row {src[bad]} outside [0, 1]")
        P = sp.coo_matrix((prob, (src, dst)), shape=(n, n)).tocsr()
        P.sum_duplicates()
        P.sort_indices()
        P.data[P.data < TOL.zero_weight] = 0.0
        P.eliminate_zeros()
        if np.any(P.data > 1 + TOL.row_sum):
            raise ValidationError("merged duplicate entries exceed probability 1")
        return cls._from_csr(P, transitive=transitive, regular=regular, label=label, meta=meta,
                             pi=pi)

    @classmethod
    def from_dense(cls, M, **kwargs) -> "ChainMatrix":
        M = np.asarray(M, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {M.shape}")
        src, dst = np.nonzero(M)
        return cls.from_entries(M.shape[0], src, dst, M[src, dst], **kwargs)

    @classmethod
    def _from_csr(cls, P, *, transitive=False, regular=None, label="", meta=None, pi=None):
        _validate_rows(P)
        n = P.shape[0]
        diag = P.diagonal()
        lazy = bool(np.all(diag >= 0.5 - TOL.lazy_diag))
        if regular is None:
            regular = _is_symmetric(P)
        P.data.flags.writeable = False
        if pi is None:
            pi = _stationary(P, regular=regular)
        elif not is_irreducible(P):
            raise StructuralError("chain is reducible: some state cannot reach another")
        pi = np.asarray(pi, dtype=np.float64)
        resid = float(np.abs(P.T @ pi - pi).sum())
        if resid > TOL.stationary_residual:
            raise StructuralError(f"stationary residual {resid:.3g} exceeds tolerance")
        pi.flags.writeable = False
        chain = cls(P=P, pi=pi, lazy=lazy, reversible=False, transitive=bool(transitive),
                    regular=bool(regular), label=label, meta=dict(meta or {}))
        ok, _ = check_reversible(chain)
        object.__setattr__(chain, "reversible", ok)
        return chain

    @cached_property
    def PT(self) -> sp.csr_matrix:
        """Transpose in CSR form, so ``mu @ P`` is ``PT @ mu``."""
        return self.P.T.tocsr()

    def dense(self) -> np.ndarray:
        return self.P.toarray()

    def rows(self) -> list[list[tuple[int, float]]]:
        """Adjacency-list view: per state, ``(target, probability)`` sorted by target."""
        P = self.P
        return [
            list(zip(P.indices[P.indptr[i]:P.indptr[i + 1]].tolist(),
                     P.data[P.indptr[i]:P.indptr[i + 1]].tolist()))
            for i in range(self.n)
        ]

    def with_flags(self, **kwargs) -> "ChainMatrix":
        return replace(self, **kwargs)

    def __repr__(self) -> str:
        flags = [k for k in ("lazy", "reversible", "transitive", "regular") if getattr(self, k)]
        name = f"{self.label!r}, " if self.label else ""
        return f"ChainMatrix({name}n={self.n}, nnz={self.nnz}, flags={flags})"


def _validate_rows(P: sp.csr_matrix) -> None:
    sums = np.asarray(P.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > TOL.row_sum)
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"row {i} sums to {sums[i]!r}, not 1")


def _is_symmetric(P: sp.csr_matrix) -> bool:
    D = abs(P - P.T)
    return D.nnz == 0 or float(D.max()) <= TOL.detailed_balance


def is_irreducible(P: sp.csr_matrix) -> bool:
    ncomp, _ = connected_components(P, directed=True, connection="strong")
    return ncomp == 1


@numba.njit(cache=True)
def _lazy_power_iteration(indptr, indices, data, mu, tol, max_iter):
    n = mu.shape[0]
    nxt = np.empty(n)
    for it in range(max_iter):
        nxt[:] = 0.5 * mu
        for i in range(n):
            half = 0.5 * mu[i]
            for k in range(indptr[i], indptr[i + 1]):
                nxt[indices[k]] += half * data[k]
        diff = 0.0
        for i in range(n):
            diff += abs(nxt[i] - mu[i])
        mu[:] = nxt
        if diff <= tol:
            return mu, it + 1
    return mu, -1


def _stationary(P: sp.csr_matrix, regular: bool) -> np.ndarray:
    n = P.shape[0]
    if not is_irreducible(P):
        raise StructuralError("chain is reducible: some state cannot reach another")
    if regular:
        return np.full(n, 1.0 / n)
    mu = np.full(n, 1.0 / n)
    mu, iters = _lazy_power_iteration(P.indptr, P.indices, np.asarray(P.data), mu,
                                      TOL.power_iter_l1, TOL.power_iter_max)
    if iters < 0:
        mu = _stationary_dense(P)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def _stationary_dense(P: sp.csr_matrix) -> np.ndarray:
    n = P.shape[0]
    A = P.toarray().T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return scipy.linalg.solve(A, b)


def stationary(P: ChainMatrix) -> np.ndarray:
    """Stationary distribution, recomputed from scratch.

    Regular chains get the exact uniform vector. Otherwise lazy power
    iteration (l1 step size below ``TOL.power_iter_l1``), with a dense solve
    if it does not converge within ``TOL.power_iter_max`` sweeps.

    Raises
    ------
    StructuralError
        If the chain is reducible.
    """
    return _stationary(P.P, P.regular)


def make_lazy(P: ChainMatrix) -> ChainMatrix:
    """Return ``(P + I) / 2``; ``pi`` and the structural flags carry over."""
    _validate_rows(P.P)
    L = ((P.P + sp.identity(P.n, format="csr")) * 0.5).tocsr()
    L.sum_duplicates()
    L.sort_indices()
    label = P.label if P.label.startswith("lazy") or not P.label else f"lazy-{P.label}"
    return ChainMatrix._from_csr(L, transitive=P.transitive, regular=P.regular,
                                 label=label, meta=P.meta, pi=np.array(P.pi))


def validate_dist(mu, n: int) -> np.ndarray:
    """Check a probability vector and clamp tiny negative round-off to zero."""
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (n,):
        raise ValidationError(f"distribution has shape {mu.shape}, expected ({n},)")
    if np.any(mu < -TOL.clamp) or abs(mu.sum() - 1.0) > TOL.dist_sum:
        raise ValidationError("not a probability vector")
    return np.where(mu < 0, 0.0, mu)


def delta(n: int, x: int) -> np.ndarray:
    mu = np.zeros(n)
    mu[x] = 1.0
    return mu


def evolve(P: ChainMatrix, mu, t: int) -> np.ndarray:
    """Compute ``mu P^t`` by ``t`` sparse vector-operator products."""
    if t < 0:
        raise ValidationError(f"step count must be nonnegative, got {t}")
    mu = validate_dist(mu, P.n).copy()
    PT = P.PT
    for _ in range(int(t)):
        mu = PT @ mu
    mu[mu < 0] = 0.0
    return mu


def check_reversible(P: ChainMatrix) -> tuple[bool, float]:
    """Detailed balance test.

    Returns ``(ok, violation)`` where ``violation`` is
    ``max |pi(x) p(x,y) - pi(y) p(y,x)|``.
    """
    F = sp.diags(P.pi) @ P.P
    D = abs(F - F.T)
    viol = float(D.max()) if D.nnz else 0.0
    return viol <= TOL.detailed_balance, viol


def return_probabilities(P: ChainMatrix, horizon: int) -> np.ndarray:
    """``R[t, x] = p_t(x, x)`` for ``t = 0..horizon`` via dense powering."""
    M = np.eye(P.n)
    out = np.empty((horizon + 1, P.n))
    out[0] = 1.0
    for t in range(1, horizon + 1):
        M = (P.P.T @ M.T).T
        out[t] = np.diagonal(M)
    return out


def check_transitive_heuristic(P: ChainMatrix, horizon: int | None = None) -> bool:
    """Necessary condition for vertex transitivity.

    True iff every row has the same sorted multiset of entries and every
    state has the same return probabilities ``p_t(x, x)`` for
    ``t <= horizon`` (default 20). Passing this is *not* a proof of
    transitivity. Cost is ``O(horizon * n * nnz)``.
    """
    horizon = TOL.transitive_horizon if horizon is None else horizon
    atol = TOL.transitive_atol
    P_ = P.P
    lengths = np.diff(P_.indptr)
    if np.any(lengths != lengths[0]):
        return False
    rows = np.sort(P_.data.reshape(P.n, lengths[0]), axis=1)
    if np.any(np.abs(rows - rows[0]) > atol):
        return False
    R = return_probabilities(P, horizon)
    return bool(np.all(np.abs(R - R[:, :1]) <= atol))


def read_chain(path, **kwargs) -> ChainMatrix:
    """Parse the text chain format (``n <count>`` then ``src dst prob`` lines)."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_chain(text, label=kwargs.pop("label", Path(path).stem), **kwargs)


def parse_chain(text: str, **kwargs) -> ChainMatrix:
    n = None
    src, dst, prob = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if n is None:
                if len(parts) != 2 or parts[0] != "n":
                    raise ValueError("expected 'n <count>' header")
                n = int(parts[1])
                continue
            if len(parts) != 3:
                raise ValueError("expected '<src> <dst> <prob>'")
            src.append(int(parts[0]))
            dst.append(int(parts[1]))
            prob.append(float(parts[2]))
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    if n is None:
        raise ValidationError("missing 'n <count>' header")
    return ChainMatrix.from_entries(n, src, dst, prob, **kwargs)


def format_chain(P: ChainMatrix) -> str:
    lines = [f"n {P.n}"]
    if P.label:
        lines.insert(0, f"# {P.label}")
    M = P.P
    for i in range(P.n):
        for k in range(M.indptr[i], M.indptr[i + 1]):
            lines.append(f"{i} {M.indices[k]} {M.data[k]:.17g}")
    return "\n".join(lines) + "\n"


def write_chain(P: ChainMatrix, path) -> None:
    Path(path).write_text(format_chain(P), encoding="utf-8")
