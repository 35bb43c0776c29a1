"""Lazy random walks on the graph families used throughout the package.

Every generator returns the lazy walk: stay put with probability 1/2,
otherwise move along an edge chosen with probability proportional to its
weight (uniformly for unweighted graphs).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from intertime.chain import ChainMatrix
from intertime.errors import StructuralError, ValidationError

FAMILIES = (
    "cycle", "path", "complete", "hypercube", "torus",
    "balanced_tree", "random_tree", "weighted_tree", "two_cliques",
)
TRANSITIVE_FAMILIES = frozenset({"cycle", "complete", "hypercube", "torus"})
_PARAMS = {
    "cycle": {"n"}, "path": {"n"}, "complete": {"n"}, "hypercube": {"d"},
    "torus": {"d", "l"}, "balanced_tree": {"r", "h"}, "random_tree": {"n"},
    "weighted_tree": {"n"}, "two_cliques": {"m", "s"},
}
TREE_FAMILIES = frozenset({"path", "balanced_tree", "random_tree", "weighted_tree"})

@dataclass(frozen=True)
class FamilySpec:
    """Family name, integer parameters and RNG seed (random families only)."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def id(self) -> str:
        args = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        sid = f";seed={self.seed}" if self.family in ("random_tree", "weighted_tree") else ""
        return f"{self.family}({args}{sid})"

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "FamilySpec":
        return cls(d["family"], dict(d.get("params", {})), int(d.get("seed", 0)))


def spec(family: str, seed: int = 0, **params) -> FamilySpec:
    """Shorthand: ``spec("torus", d=2, l=16)``."""
    return FamilySpec(family, params, seed)


def _int_param(p: dict, key: str, lo: int, family: str) -> int:
    if key not in p:
        raise ValidationError(f"{family}: missing parameter '{key}'")
    v = p[key]
    if isinstance(v, bool) or int(v) != v:
        raise ValidationError(f"{family}: parameter '{key}' must be an integer, got {v!r}")
    if int(v) < lo:
        raise ValidationError(f"{family}: parameter '{key}' must be >= {lo}, got {v}")
    return int(v)


def _lazy_walk(n, src, dst, w, *, label, transitive=False, meta=None) -> ChainMatrix:
    """Lazy walk from directed arcs ``src -> dst`` with symmetric weights ``w``."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    W = np.bincount(src, weights=w, minlength=n)
    if np.any(W <= 0):
        raise StructuralError(f"{label}: isolated vertex")
    loops = np.arange(n)
    return ChainMatrix.from_entries(
        n,
        np.concatenate([loops, src]),
        np.concatenate([loops, dst]),
        np.concatenate([np.full(n, 0.5), w / (2.0 * W[src])]),
        transitive=transitive,
        regular=bool(np.all(W == W[0])),
        label=label,
        meta=meta,
        pi=W / W.sum(),
    )


def _undirected(u, v, w=None):
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.ones(u.size) if w is None else np.asarray(w, dtype=np.float64)
    return np.concatenate([u, v]), np.concatenate([v, u]), np.concatenate([w, w])


def _tree_chain(n, u, v, w, label) -> ChainMatrix:
    edges = [(int(a), int(b), float(c)) for a, b, c in zip(u, v, w)]
    s, d, ww = _undirected(u, v, w)
    chain = _lazy_walk(n, s, d, ww, label=label, meta={"edges": edges, "tree": True})
    return chain


def _prufer_tree(n: int, rng: np.random.Generator):
    if n == 2:
        return np.array([0]), np.array([1])
    seq = rng.integers(0, n, size=n - 2).tolist()
    T = nx.from_prufer_sequence(seq)
    e = np.array(sorted(tuple(sorted(x)) for x in T.edges()), dtype=np.int64)
    return e[:, 0], e[:, 1]


def generate(fs: FamilySpec) -> ChainMatrix:
    """Build the lazy walk for a family spec.

    Raises
    ------
    ValidationError
        Unknown family or out-of-range parameters.
    """
    fam, p = fs.family, dict(fs.params)
    if fam not in FAMILIES:
        raise ValidationError(f"unknown family {fam!r}; expected one of {', '.join(FAMILIES)}")
    unknown = set(p) - _PARAMS[fam]
    if unknown:
        raise ValidationError(f"{fam}: unknown parameter(s) {', '.join(sorted(unknown))}")
    chain = _generate(fam, p, fs)
    chain.meta["family"] = fs.to_dict()
    return chain


def _generate(fam: str, p: dict, fs: FamilySpec) -> ChainMatrix:
    label = fs.id

    if fam == "cycle":
        n = _int_param(p, "n", 2, fam)
        x = np.arange(n)
        s, d, w = _undirected(x, (x + 1) % n)
        return _lazy_walk(n, s, d, w, label=label, transitive=True)

    if fam == "path":
        n = _int_param(p, "n", 2, fam)
        x = np.arange(n - 1)
        return _tree_chain(n, x, x + 1, np.ones(n - 1), label)

    if fam == "complete":
        n = _int_param(p, "n", 1, fam)
        if n == 1:
            return ChainMatrix.from_entries(1, [0], [0], [1.0], transitive=True, regular=True,
                                            label=label)
        s = np.repeat(np.arange(n), n - 1)
        d = np.arange(n * (n - 1)) % (n - 1)
        d = d + (d >= s)
        return _lazy_walk(n, s, d, np.ones(s.size), label=label, transitive=True)

    if fam == "hypercube":
        dim = _int_param(p, "d", 1, fam)
        n = 1 << dim
        x = np.repeat(np.arange(n), dim)
        bits = np.tile(1 << np.arange(dim), n)
        return _lazy_walk(n, x, x ^ bits, np.ones(x.size), label=label, transitive=True)

    if fam == "torus":
        dim = _int_param(p, "d", 1, fam)
        side = _int_param(p, "l", 2, fam)
        n = side ** dim
        if n > 10_000_000:
            raise ValidationError(f"torus: {n} states is beyond the supported size")
        coords = np.array(np.unravel_index(np.arange(n), (side,) * dim)).T
        src, dst = [], []
        for axis in range(dim):
            for step in (1, -1):
                c = coords.copy()
                c[:, axis] = (c[:, axis] + step) % side
                src.append(np.arange(n))
                dst.append(np.ravel_multi_index(c.T, (side,) * dim))
        s = np.concatenate(src)
        return _lazy_walk(n, s, np.concatenate(dst), np.ones(s.size), label=label,
                          transitive=True)

    if fam == "balanced_tree":
        r = _int_param(p, "r", 1, fam)
        h = _int_param(p, "h", 1, fam)
        T = nx.balanced_tree(r, h)
        e = np.array(sorted(T.edges()), dtype=np.int64)
        return _tree_chain(T.number_of_nodes(), e[:, 0], e[:, 1], np.ones(len(e)), label)

    if fam in ("random_tree", "weighted_tree"):
        n = _int_param(p, "n", 2, fam)
        rng = np.random.default_rng(fs.seed)
        u, v = _prufer_tree(n, rng)
        if fam == "random_tree":
            w = np.ones(u.size)
        else:
            w = np.exp(rng.uniform(0.0, math.log(100.0), size=u.size))
        return _tree_chain(n, u, v, w, label)

    # two_cliques
    m = _int_param(p, "m", 2, fam)
    s_default = max(2, round(math.sqrt(m)))
    small = _int_param({"s": p.get("s", s_default)}, "s", 2, fam)
    n = small + m
    pairs = [(a, b) for a, b in itertools.combinations(range(small), 2)]
    pairs += [(small + a, small + b) for a, b in itertools.combinations(range(m), 2)]
    pairs.append((0, small))
    e = np.array(pairs, dtype=np.int64)
    s, d, w = _undirected(e[:, 0], e[:, 1])
    return _lazy_walk(n, s, d, w, label=label, meta={"small": small, "large": m})


def tree_edges(chain: ChainMatrix) -> list[tuple[int, int, float]]:
    edges = chain.meta.get("edges")
    if edges is None:
        raise StructuralError(f"{chain.label or 'chain'} carries no tree edge list")
    return edges


def central_node(chain: ChainMatrix, edges=None) -> int:
    """Smallest vertex whose removal leaves components of stationary mass <= 1/2.

    ``edges`` defaults to the edge list stored by the tree generators.

    Raises
    ------
    StructuralError
        If the edges do not form a spanning tree of the chain's states.
    """
    n = chain.n
    edges = tree_edges(chain) if edges is None else edges
    masses = _component_masses(n, edges, chain.pi)
    for v in range(n):
        if max(masses[v], default=0.0) <= 0.5 + 1e-12:
            return v
    raise StructuralError("no central node found")  # unreachable for a tree


def component_masses(chain: ChainMatrix, v: int, edges=None) -> list[float]:
    """Stationary masses of the components of ``T - {v}``."""
    edges = tree_edges(chain) if edges is None else edges
    return _component_masses(chain.n, edges, chain.pi)[v]


def _component_masses(n, edges, pi) -> list[list[float]]:
    if len(edges) != n - 1:
        raise StructuralError(f"a tree on {n} vertices has {n - 1} edges, got {len(edges)}")
    adj = [[] for _ in range(n)]
    for a, b, *_ in edges:
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    parent = [-1] * n
    order = []
    seen = [False] * n
    stack = [0]
    seen[0] = True
    while stack:
        x = stack.pop()
        order.append(x)
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                parent[y] = x
                stack.append(y)
    if len(order) != n:
        raise StructuralError("edge list is disconnected, not a tree")
    sub = np.array(pi, dtype=np.float64)
    for x in reversed(order[1:]):
        sub[parent[x]] += sub[x]
    total = float(sub[0])
    out = []
    for v in range(n):
        comps = [float(sub[y]) for y in adj[v] if parent[y] == v]
        if parent[v] >= 0:
            comps.append(total - float(sub[v]))
        out.append(comps)
    return out
