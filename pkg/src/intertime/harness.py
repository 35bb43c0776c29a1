"""Instance sweeps, inequality checks with calibrated windows, and reports.

Every check compares a ratio against a window. A window is either exact (the
constant is known, e.g. ``t_unif <= 2 sqrt(Q)``) or calibrated: the observed
ratio range over a fixed calibration set, inflated by a factor of 2 and
frozen in ``data/windows.json``. Calibration and assertion instances are
disjoint.

Ratios that involve Monte Carlo estimates carry a 3-standard-error interval,
and a check passes when the interval meets the window, i.e. the estimate is
judged at its most favourable endpoint.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from intertime import exact, montecarlo as mc, spectral
from intertime.chain import ChainMatrix
from intertime.config import TOL
from intertime.errors import BudgetError, DivergenceError, IntertimeError, ValidationError
from intertime.families import FamilySpec, central_node, generate, spec

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
WINDOWS_SCHEMA_VERSION = 1
INFLATION = 2.0
MIN_CALIBRATION = 4
PASS, FAIL, SKIPPED, NOT_EVALUATED = "pass", "fail", "skipped", "not-evaluated"


# --------------------------------------------------------------------------- instance sets

CALIBRATION_SET = (
    spec("cycle", n=32), spec("torus", d=2, l=8), spec("complete", n=256), spec("hypercube", d=8),
    spec("cycle", n=10), spec("complete", n=12), spec("torus", d=2, l=5), spec("hypercube", d=3),
    spec("cycle", n=90), spec("complete", n=40), spec("torus", d=3, l=5), spec("hypercube", d=7),
    spec("path", n=12), spec("path", n=40),
    spec("balanced_tree", r=2, h=4),
    spec("weighted_tree", n=14, seed=1001), spec("weighted_tree", n=45, seed=1002),
    spec("weighted_tree", n=120, seed=1003), spec("random_tree", n=60, seed=1004),
    spec("two_cliques", m=9), spec("two_cliques", m=36),
)

TRANSITIVE_SET = (
    spec("cycle", n=4), spec("cycle", n=5), spec("cycle", n=8), spec("cycle", n=16),
    spec("cycle", n=64), spec("cycle", n=128),
    spec("complete", n=4), spec("complete", n=5), spec("complete", n=16), spec("complete", n=64),
    spec("complete", n=1024), spec("complete", n=4096),
    spec("torus", d=2, l=3), spec("torus", d=2, l=12), spec("torus", d=2, l=16),
    spec("torus", d=3, l=4),
    spec("hypercube", d=4), spec("hypercube", d=5), spec("hypercube", d=10),
)

TREE_SET = tuple(spec("weighted_tree", n=n, seed=s)
                 for s, n in enumerate(range(20, 201, 20), start=1))

OTHER_SET = (
    spec("path", n=16), spec("path", n=48), spec("balanced_tree", r=3, h=3),
    spec("random_tree", n=30, seed=7),
    spec("two_cliques", m=16), spec("two_cliques", m=64), spec("two_cliques", m=256),
)

SUITES = ("all", "transitive", "regular", "trees", "torus")


def suite_instances(name: str) -> tuple[FamilySpec, ...]:
    if name == "transitive":
        return TRANSITIVE_SET
    if name == "regular":
        return TRANSITIVE_SET + (spec("two_cliques", m=16),)
    if name == "trees":
        return TREE_SET + tuple(f for f in OTHER_SET if f.family != "two_cliques")
    if name == "all":
        return TRANSITIVE_SET + TREE_SET + OTHER_SET
    raise ValidationError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")


# --------------------------------------------------------------------------- config and types

@dataclass(frozen=True)
class HarnessConfig:
    samples: int = 10_000
    cap: int | None = None
    nmax: int = TOL.dense_max_n
    seed: int = mc.DEFAULT_SEED
    windows: dict | None = None

    def __post_init__(self):
        if self.samples < 2:
            raise ValidationError("samples must be at least 2")
        if self.cap is not None and self.cap < 1:
            raise ValidationError("cap must be positive")
        if self.nmax < 1:
            raise ValidationError("nmax must be positive")

    def window_table(self) -> dict:
        return self.windows if self.windows is not None else load_windows()["windows"]

    def provenance(self) -> dict:
        return {"seed": self.seed, "samples": self.samples, "cap": self.cap, "nmax": self.nmax}


@dataclass(frozen=True)
class Interval:
    """A value with a 3-SE band (degenerate for exact quantities)."""

    mid: float
    lo: float
    hi: float

    @classmethod
    def exact(cls, v: float) -> Interval:
        v = float(v)
        return cls(v, v, v)

    @classmethod
    def of(cls, e: mc.EstimateWithCI) -> Interval:
        return cls(e.mean, max(0.0, e.lower), e.upper)

    def __truediv__(self, other: Interval | float) -> Interval:
        o = other if isinstance(other, Interval) else Interval.exact(other)
        hi = self.hi / o.lo if o.lo > 0 else math.inf
        return Interval(self.mid / o.mid, self.lo / o.hi, hi)

    def __mul__(self, k: float) -> Interval:
        return Interval(self.mid * k, self.lo * k, self.hi * k)

    def sq(self) -> Interval:
        return Interval(self.mid ** 2, self.lo ** 2, self.hi ** 2)


@dataclass
class Check:
    id: str
    kind: str                     # "upper", "lower" or "two-sided"
    calibrated: bool
    refs: tuple[str, ...]
    lhs: float | None = None
    rhs: float | None = None
    ratio: float | None = None
    ratio_lo: float | None = None
    ratio_hi: float | None = None
    window: tuple[float | None, float | None] = (None, None)
    status: str = NOT_EVALUATED
    reason: str = ""
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "calibrated": self.calibrated,
            "refs": list(self.refs), "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
            "ratio_interval": [self.ratio_lo, self.ratio_hi],
            "window": list(self.window), "status": self.status, "pass": self.status == PASS,
            "reason": self.reason, "meta": self.meta,
        }


@dataclass
class TheoremReport:
    instance: dict
    flags: dict
    quantities: dict
    checks: list[Check]
    provenance: dict
    errors: dict = field(default_factory=dict)

    @property
    def id(self) -> str:
        return self.instance["id"]

    def check(self, cid: str) -> Check:
        for c in self.checks:
            if c.id == cid:
                return c
        raise KeyError(cid)

    @property
    def failed(self) -> list[Check]:
        return [c for c in self.checks if c.status == FAIL]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "instance": self.instance,
            "flags": self.flags,
            "quantities": self.quantities,
            "checks": [c.to_dict() for c in self.checks],
            "provenance": self.provenance,
            "errors": self.errors,
        }


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of ``log y = slope * log x + intercept``."""

    label: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    slope: float
    intercept: float
    r2: float
    extra: dict = field(default_factory=dict)

    @classmethod
    def fit(cls, label: str, x, y, extra: dict | None = None) -> SlopeFit:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size < 3:
            raise ValidationError("a slope fit needs at least 3 sizes")
        lx, ly = np.log(x), np.log(y)
        slope, intercept = np.polyfit(lx, ly, 1)
        resid = ly - (slope * lx + intercept)
        ss = float(np.sum((ly - ly.mean()) ** 2))
        r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
        return cls(label, tuple(x.tolist()), tuple(y.tolist()), float(slope),
                   float(intercept), r2, dict(extra or {}))

    def to_dict(self) -> dict:
        return {"label": self.label, "x": list(self.x), "y": list(self.y), "slope": self.slope,
                "intercept": self.intercept, "r2": self.r2, **self.extra}


@dataclass
class SweepCheck:
    """An assertion across several instances (trend or stability window)."""

    id: str
    instances: list[str]
    values: list[float]
    status: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "instances": self.instances, "values": self.values,
                "status": self.status, "pass": self.status == PASS, "detail": self.detail}


# --------------------------------------------------------------------------- windows

def load_windows(path=None) -> dict:
    """Frozen window table (package default unless ``path`` is given)."""
    if path is None:
        text = resources.files("intertime").joinpath("data/windows.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    if data.get("schema_version") != WINDOWS_SCHEMA_VERSION:
        raise ValidationError("unsupported windows file version")
    return data


# --------------------------------------------------------------------------- quantities

def _instance_dict(fs: FamilySpec) -> dict:
    return {"id": fs.id, **fs.to_dict()}


def _flags(chain: ChainMatrix) -> dict:
    return {"n": chain.n, "lazy": bool(chain.lazy), "reversible": bool(chain.reversible),
            "transitive": bool(chain.transitive), "regular": bool(chain.regular),
            "tree": bool(chain.meta.get("tree", False))}


def _try(errors: dict, name: str, fn):
    try:
        return fn()
    except (BudgetError, DivergenceError) as exc:
        errors[name] = f"{type(exc).__name__}: {exc}"
        return None


def t_grid(Q: float, t_rel: float) -> list[int]:
    """Horizons ``{1, ceil(t_rel), ceil(sqrt(Q))}`` used for the moment checks."""
    return sorted({1, max(1, math.ceil(t_rel)), max(1, math.ceil(math.sqrt(Q)))})


def compute_quantities(chain: ChainMatrix, cfg: HarnessConfig) -> tuple[dict, dict, dict]:
    """All exact and estimated quantities for one instance.

    Returns ``(quantities, estimates, errors)``; ``estimates`` holds the
    :class:`EstimateWithCI` objects behind the Monte Carlo entries.
    """
    n = chain.n
    q: dict = {}
    est: dict = {}
    err: dict = {}
    dense_ok = n <= cfg.nmax

    def guarded(name, fn, need_dense=True):
        if need_dense and not dense_ok and not chain.transitive:
            err[name] = f"BudgetError: n={n} exceeds nmax={cfg.nmax}"
            return None
        return _try(err, name, fn)

    q["t_mix"] = guarded("t_mix", lambda: exact.tv_mixing_time(chain))
    q["t_ces"] = guarded("t_ces", lambda: exact.cesaro_mixing_time(chain))
    q["t_unif"] = guarded("t_unif", lambda: spectral.uniform_mixing_time(chain))
    q["t_hit"] = guarded("t_hit", lambda: float(exact.t_hit(chain)))
    if n <= exact.T_H_MAX_N:
        q["t_H"], _ = exact.t_H_bruteforce(chain)
        q["t_H_source"] = "exact"
    else:
        q["t_H"] = q["t_ces"]
        q["t_H_source"] = "t_ces-proxy"

    if chain.reversible:
        sp_ = _try(err, "Q", lambda: spectral.spectrum(chain, closed_form=True))
        if sp_ is not None:
            q["Q"], q["t_rel"] = spectral.compute_Q(sp_)
            if chain.transitive and n > 1:
                grid = t_grid(q["Q"], q["t_rel"])
                if q["t_unif"] is not None:
                    grid = sorted(set(grid) | {int(q["t_unif"])})
                q["Qt"] = {str(t): spectral.compute_Qt(chain, 0, t) for t in grid}
                if q["t_unif"] is not None:
                    q["EI_tunif"] = q["Qt"][str(int(q["t_unif"]))]

    if chain.meta.get("tree"):
        v = central_node(chain)
        q["central_node"] = v
        q["max_hit_central"] = float(exact.hitting_times_to(chain, v).max())

    seed, samples = cfg.seed, cfg.samples
    cap = cfg.cap if cfg.cap is not None else mc.default_cap(chain)
    q["cap"] = cap
    tI = mc.estimate_tI(chain, samples, cap, seed)
    star = mc.estimate_tI_star(chain, samples, cap, seed)
    est["tI"], est["tI_star"] = tI.estimate, star.estimate
    q["tI"], q["tI_se"] = tI.estimate.mean, tI.estimate.std_error
    q["tI_mode"], q["tI_argmax"] = tI.mode, list(tI.argmax)
    q["tI_star"], q["tI_star_se"] = star.estimate.mean, star.estimate.std_error
    q["tI_star_argmax"] = star.argmax[0]
    if chain.transitive:
        pp = mc.estimate_pi_pi_expectation(chain, samples, cap, seed)
        est["E_pipi"] = pp
        q["E_pipi"], q["E_pipi_se"] = pp.mean, pp.std_error
    return q, est, err


# --------------------------------------------------------------------------- checks

_HYPOTHESIS_WORDS = {"lazy": "laziness", "reversible": "reversibility",
                     "transitive": "transitivity", "regular": "regular-graph", "tree": "tree"}


def _hypothesis(chain: ChainMatrix, needs: tuple[str, ...]) -> str | None:
    flags = _flags(chain)
    for need in needs:
        if not flags[need]:
            return f"{_HYPOTHESIS_WORDS[need]} hypothesis fails"
    return None


def _apply_window(c: Check, window: tuple[float | None, float | None]) -> None:
    lo, hi = window
    c.window = (lo, hi)
    ok = True
    if hi is not None and c.ratio_lo > hi:
        ok = False
    if lo is not None and c.ratio_hi < lo:
        ok = False
    c.status = PASS if ok else FAIL


def _evaluate(c: Check, num: Interval, den: Interval, windows: dict,
              exact_window: tuple | None = None) -> Check:
    r = num / den
    c.lhs, c.rhs = num.mid, den.mid
    c.ratio, c.ratio_lo, c.ratio_hi = r.mid, r.lo, r.hi
    if not all(math.isfinite(v) for v in (r.mid, r.lo)):
        c.status, c.reason = NOT_EVALUATED, "non-finite ratio"
        return c
    if exact_window is not None:
        _apply_window(c, exact_window)
        return c
    w = windows.get(c.id)
    if w is None:
        c.status, c.reason = NOT_EVALUATED, "no calibrated window"
        return c
    _apply_window(c, (w.get("min"), w.get("max")))
    return c


# id -> (kind, calibrated, hypotheses, quantities referenced)
CHECK_TABLE: dict[str, tuple[str, bool, tuple[str, ...], tuple[str, ...]]] = {
    "tH-le-tI": ("upper", True, ("lazy",), ("t_H", "tI")),
    "tces-le-tI": ("upper", True, ("lazy",), ("t_ces", "tI")),
    "tces-tH": ("two-sided", True, ("lazy",), ("t_ces", "t_H")),
    "tmix-le-tI": ("upper", True, ("lazy", "reversible"), ("t_mix", "tI")),
    "tree-tI-vs-central": ("two-sided", True, ("lazy", "tree"), ("tI", "max_hit_central")),
    "tI-le-2thit": ("upper", False, (), ("tI", "t_hit")),
    "tI-vs-tIstar": ("two-sided", True, (), ("tI", "tI_star")),
    "tI-vs-Epipi": ("two-sided", True, ("transitive", "reversible"), ("tI", "E_pipi")),
    "tI-vs-sqrtQ": ("two-sided", True, ("transitive", "reversible", "lazy"), ("tI", "Q")),
    "Q-vs-returns": ("two-sided", True, ("transitive", "reversible", "lazy"),
                 ("Q", "EI_tunif")),
    "tunif-le-2sqrtQ": ("upper", False, ("transitive", "reversible", "lazy"), ("t_unif", "Q")),
    "thit-le-tI2": ("upper", True, ("regular", "lazy"), ("t_hit", "tI")),
    "tI-le-sqrtn-tunif34": ("upper", True, ("regular", "lazy"), ("tI", "t_unif")),
    "qt-dual": ("two-sided", False, ("transitive", "reversible"), ("Qt",)),
    "It-mean": ("two-sided", False, ("transitive",), ("Qt",)),
    "It-second": ("upper", False, ("transitive",), ("Qt",)),
    "St-tail": ("lower", False, ("transitive",), ("Qt",)),
    "pipi-sandwich": ("two-sided", False, ("transitive",), ("Qt",)),
}

CALIBRATED_CHECKS = tuple(k for k, v in CHECK_TABLE.items() if v[1])


def _new(cid: str) -> Check:
    kind, cal, _, refs = CHECK_TABLE[cid]
    return Check(cid, kind, cal, refs)


def _ci(q: dict, est: dict, name: str) -> Interval:
    return Interval.of(est[name]) if name in est else Interval.exact(q[name])


def evaluate_checks(chain: ChainMatrix, q: dict, est: dict, err: dict,
                    cfg: HarnessConfig) -> list[Check]:
    windows = cfg.window_table()
    checks: list[Check] = []
    n = chain.n

    def gate(cid: str) -> Check | None:
        c = _new(cid)
        checks.append(c)
        reason = _hypothesis(chain, CHECK_TABLE[cid][2])
        if reason:
            c.status, c.reason = SKIPPED, reason
            return None
        missing = [r for r in c.refs if q.get(r) is None]
        if missing:
            c.status = NOT_EVALUATED
            c.reason = "; ".join(err.get(m, f"{m} unavailable") for m in missing)
            return None
        return c

    tI = _ci(q, est, "tI")
    if n == 1:
        return checks

    if (c := gate("tH-le-tI")) is not None:
        if q["t_H_source"] != "exact":
            c.status, c.reason = SKIPPED, f"exact t_H needs n <= {exact.T_H_MAX_N}"
        else:
            _evaluate(c, Interval.exact(q["t_H"]), tI, windows)
    if (c := gate("tces-le-tI")) is not None:
        c.meta["substitute"] = "t_ces stands in for t_H"
        _evaluate(c, Interval.exact(q["t_ces"]), tI, windows)
    if (c := gate("tces-tH")) is not None:
        if q["t_H_source"] != "exact":
            c.status, c.reason = SKIPPED, f"exact t_H needs n <= {exact.T_H_MAX_N}"
        else:
            _evaluate(c, Interval.exact(q["t_ces"]), Interval.exact(q["t_H"]), windows)
    if (c := gate("tmix-le-tI")) is not None:
        _evaluate(c, Interval.exact(q["t_mix"]), tI, windows)
    if (c := gate("tree-tI-vs-central")) is not None:
        c.meta["central_node"] = q["central_node"]
        _evaluate(c, tI, Interval.exact(q["max_hit_central"]), windows)
    if (c := gate("tI-le-2thit")) is not None:
        _evaluate(c, tI, Interval.exact(2 * q["t_hit"]), windows, (None, 1.0))
    if (c := gate("tI-vs-tIstar")) is not None:
        _evaluate(c, tI, _ci(q, est, "tI_star"), windows)
    if (c := gate("tI-vs-Epipi")) is not None:
        _evaluate(c, tI, _ci(q, est, "E_pipi"), windows)
    if (c := gate("tI-vs-sqrtQ")) is not None:
        _evaluate(c, tI, Interval.exact(math.sqrt(q["Q"])), windows)
    if (c := gate("Q-vs-returns")) is not None:
        c.meta["t"] = q["t_unif"]
        _evaluate(c, Interval.exact(q["Q"]), Interval.exact(n * q["EI_tunif"]), windows)
    if (c := gate("tunif-le-2sqrtQ")) is not None:
        # integer vs real: compared with no slack
        _evaluate(c, Interval.exact(q["t_unif"]), Interval.exact(2 * math.sqrt(q["Q"])),
                  windows, (None, 1.0))
    if (c := gate("thit-le-tI2")) is not None:
        _evaluate(c, Interval.exact(q["t_hit"]), tI.sq(), windows)
    if (c := gate("tI-le-sqrtn-tunif34")) is not None:
        _evaluate(c, tI, Interval.exact(math.sqrt(n) * q["t_unif"] ** 0.75), windows)

    if chain.transitive:
        _transitive_checks(chain, q, cfg, gate)
    else:
        for cid in ("qt-dual", "It-mean", "It-second", "St-tail", "pipi-sandwich"):
            gate(cid)
    return checks


def _transitive_checks(chain: ChainMatrix, q: dict, cfg: HarnessConfig, gate) -> None:
    n = chain.n
    if (c := gate("qt-dual")) is not None:
        sp_ = spectral.spectrum(chain, closed_form=True)
        worst, worst_t = 1.0, 0
        grid = sorted({0, 1, math.ceil(q["t_rel"]), math.ceil(2 * math.sqrt(q["Q"]))})
        for t in grid:
            direct = spectral.compute_Qt(chain, 0, t, check=False)
            for alt in (spectral.return_sum_Qt(chain, 0, t), spectral.spectral_Qt(sp_, t)):
                r = direct / alt
                if abs(r - 1) >= abs(worst - 1):
                    worst, worst_t = r, t
        c.lhs, c.rhs, c.ratio, c.ratio_lo, c.ratio_hi = worst, 1.0, worst, worst, worst
        c.meta = {"t_grid": grid, "worst_t": worst_t}
        rel = TOL.dual_formula_rel
        _apply_window(c, (1 - rel, 1 + rel))

    grid = t_grid(q["Q"], q["t_rel"])
    key = cfg.seed
    if (c := gate("It-mean")) is not None:
        c2 = gate("It-second")
        worst_mean, worst_second = None, None
        for t in grid:
            m = mc.intersection_moments(chain, 0, t, cfg.samples, key)
            w = max(0.02, 3 * m.rel_se)
            r = m.mean.mean / m.Qt
            if worst_mean is None or abs(r - 1) - w > abs(worst_mean[0] - 1) - worst_mean[1]:
                worst_mean = (r, w, t, m)
            rse = m.second.std_error / m.second.mean if m.second.mean else 0.0
            r2 = m.second.mean / (4 * m.Qt ** 2)
            if worst_second is None or r2 - (1 + 3 * rse) > worst_second[0] - worst_second[1]:
                worst_second = (r2, 1 + 3 * rse, t, m)
        r, w, t, m = worst_mean
        c.lhs, c.rhs, c.ratio, c.ratio_lo, c.ratio_hi = m.mean.mean, m.Qt, r, r, r
        c.meta = {"t": t, "t_grid": grid, "samples": cfg.samples, "std_error": m.mean.std_error}
        _apply_window(c, (1 - w, 1 + w))
        if c2 is not None:
            r2, lim, t, m = worst_second
            c2.lhs, c2.rhs = m.second.mean, 4 * m.Qt ** 2
            c2.ratio = c2.ratio_lo = c2.ratio_hi = r2
            c2.meta = {"t": t, "t_grid": grid, "samples": cfg.samples}
            _apply_window(c2, (None, lim))
    else:
        gate("It-second")

    if (c := gate("St-tail")) is not None:
        ts = sorted({max(1, math.ceil(q["t_rel"])), max(1, math.ceil(math.sqrt(q["Q"])))})
        worst = None
        for t in ts:
            d = mc.s_t_diagnostic(chain, 0, t, cfg.samples, key)
            if worst is None or d.frequency + 3 * d.std_error < worst.frequency + 3 * worst.std_error:
                worst = d
        c.lhs, c.rhs = worst.frequency, 1 / 16
        c.ratio = worst.frequency * 16
        c.ratio_lo = max(0.0, worst.frequency - 3 * worst.std_error) * 16
        c.ratio_hi = (worst.frequency + 3 * worst.std_error) * 16
        c.meta = {"t": worst.t, "t_grid": ts, "samples": worst.samples}
        _apply_window(c, (1.0, None))

    c = gate("pipi-sandwich")
    if c is not None:
        if n > exact.PRODUCT_MAX_N:
            c.status, c.reason = SKIPPED, f"exact probabilities need n <= {exact.PRODUCT_MAX_N}"
        else:
            s = pipi_sandwich(chain)
            c.lhs, c.rhs = s["min_lower_ratio"], s["max_upper_ratio"]
            c.ratio, c.ratio_lo, c.ratio_hi = s["min_lower_ratio"], s["min_lower_ratio"], \
                s["min_lower_ratio"]
            c.meta = s
            c.window = (1.0, None)
            c.status = PASS if s["ok"] else FAIL


def pipi_sandwich(chain: ChainMatrix, tmax: int = 20) -> dict:
    """Exact ``P_{pi,pi}(I_t > 0)`` against ``(t+1)^2/(4nQ_t)`` and ``min(1, 2^7 (t+1)^2/(nQ_t))``."""
    n = chain.n
    probs = exact.exact_intersection_curve(chain, chain.pi, chain.pi, tmax)
    qt = spectral.qt_curve(chain, 0, tmax)
    t = np.arange(tmax + 1)
    lower = (t + 1) ** 2 / (4 * n * qt)
    upper = np.minimum(1.0, 2 ** 7 * (t + 1) ** 2 / (n * qt))
    sel = slice(1, tmax + 1)
    lo_ok = probs[sel] >= lower[sel] - TOL.criterion_atol
    hi_ok = probs[sel] <= upper[sel] + TOL.criterion_atol
    return {
        "t": t[sel].tolist(), "probability": probs[sel].tolist(),
        "lower": lower[sel].tolist(), "upper": upper[sel].tolist(),
        "min_lower_ratio": float(np.min(probs[sel] / lower[sel])),
        "max_upper_ratio": float(np.max(probs[sel] / upper[sel])),
        "ok": bool(lo_ok.all() and hi_ok.all()),
    }


# --------------------------------------------------------------------------- drivers

def run_instance(fs: FamilySpec, cfg: HarnessConfig) -> TheoremReport:
    chain = generate(fs)
    log.info("instance %s (n=%d)", fs.id, chain.n)
    q, est, err = compute_quantities(chain, cfg)
    checks = evaluate_checks(chain, q, est, err, cfg)
    trunc = {k: e.truncated_fraction for k, e in est.items()}
    prov = {**cfg.provenance(), "cap": q["cap"], "truncated_fraction": trunc,
            "t_H_source": q["t_H_source"]}
    rep = TheoremReport(_instance_dict(fs), _flags(chain), _jsonable(q), checks, prov, err)
    _validate_report(rep)
    return rep


def _validate_report(rep: TheoremReport) -> None:
    for c in rep.checks:
        if c.status in (PASS, FAIL):
            missing = [r for r in c.refs if rep.quantities.get(r) is None]
            if missing:
                raise IntertimeError(f"{rep.id}: check {c.id} refers to missing {missing}")
            if c.ratio is None or not math.isfinite(c.ratio):
                raise IntertimeError(f"{rep.id}: check {c.id} has non-finite ratio")


def run_check_suite(instances, cfg: HarnessConfig | None = None) -> list[TheoremReport]:
    """One report per instance, in input order."""
    cfg = cfg or HarnessConfig()
    return [run_instance(fs, cfg) for fs in instances]


def two_cliques_trend(reports: list[TheoremReport]) -> SweepCheck:
    """``t_unif / t_I`` must increase along the two-cliques sizes."""
    rows = sorted((r.instance["params"]["m"], r) for r in reports
                  if r.instance["family"] == "two_cliques")
    ids = [r.id for _, r in rows]
    if len(rows) < 3:
        return SweepCheck("two-cliques-trend", ids, [], NOT_EVALUATED, "needs 3 sizes")
    vals = [r.quantities["t_unif"] / r.quantities["tI"] for _, r in rows]
    ok = all(b > a for a, b in zip(vals, vals[1:]))
    return SweepCheck("two-cliques-trend", ids, vals, PASS if ok else FAIL,
                      "t_unif / t_I increasing in m")


def stability(check_id: str, reports: list[TheoremReport], family: str, value,
              spread: float, min_count: int = 3) -> SweepCheck:
    """``max/min`` of ``value(report)`` over one family stays within ``spread``."""
    rows = sorted((r.flags["n"], r) for r in reports if r.instance["family"] == family)
    ids = [r.id for _, r in rows]
    if len(rows) < min_count:
        return SweepCheck(check_id, ids, [], NOT_EVALUATED, f"needs {min_count} sizes")
    vals = [float(value(r)) for _, r in rows]
    ok = max(vals) / min(vals) <= spread
    return SweepCheck(check_id, ids, vals, PASS if ok else FAIL,
                      f"max/min <= {spread:g}")


def sweep_checks(reports: list[TheoremReport]) -> list[SweepCheck]:
    out = [two_cliques_trend(reports)]
    # complete graphs: t_I / sqrt(n) within +-25% of a common centre
    out.append(stability("complete-tI-sqrt-n", reports, "complete",
                         lambda r: r.quantities["tI"] / math.sqrt(r.flags["n"]),
                         1.25 / 0.75, min_count=4))
    out.append(stability("cycle-thit-n2", reports, "cycle",
                         lambda r: r.quantities["t_hit"] / r.flags["n"] ** 2, 2.0, 4))
    out.append(stability("cycle-tunif-n2", reports, "cycle",
                         lambda r: r.quantities["t_unif"] / r.flags["n"] ** 2, 2.0, 4))
    return [s for s in out if s.status != NOT_EVALUATED]


def torus_scaling(dims=(1, 2, 3), sizes: dict | None = None,
                  cfg: HarnessConfig | None = None, informational=(4, 5)) -> list[SlopeFit]:
    """Log-log slope of estimated ``t_I`` against side length per dimension.

    For the informational dimensions (default 4 and 5) the fit is still
    reported, together with ``t_I / (sqrt(n) log n)`` and ``t_I / sqrt(n)``.
    """
    cfg = cfg or HarnessConfig()
    sizes = {**DEFAULT_TORUS_SIZES, **(sizes or {})}
    fits = []
    for d in tuple(dims) + tuple(informational):
        xs, ys, ids, skipped = [], [], [], []
        for side in sizes[d]:
            n = side ** d
            if n > cfg.nmax:
                skipped.append({"l": side, "reason": f"n={n} exceeds nmax={cfg.nmax}"})
                continue
            chain = generate(spec("torus", d=d, l=side))
            e = mc.estimate_tI(chain, cfg.samples, cfg.cap, cfg.seed)
            xs.append(side)
            ys.append(e.estimate.mean)
            ids.append(chain.meta["family"])
        extra = {"d": d, "asserted": d in dims, "skipped": skipped}
        if d in informational:
            ns = np.array(xs, dtype=float) ** d
            extra["tI_over_sqrt_n_log_n"] = (np.array(ys) / (np.sqrt(ns) * np.log(ns))).tolist()
            extra["tI_over_sqrt_n"] = (np.array(ys) / np.sqrt(ns)).tolist()
        if len(xs) >= 3:
            fits.append(SlopeFit.fit(f"torus-d{d}", xs, ys, extra))
        elif d in dims:
            raise BudgetError(f"torus d={d}: fewer than 3 sizes within budget")
    return fits


DEFAULT_TORUS_SIZES = {1: (16, 32, 64, 128), 2: (8, 16, 32, 64), 3: (4, 6, 8, 10),
                       4: (3, 4, 5), 5: (2, 3, 4)}
TORUS_SLOPE_TOL = {1: 0.2, 2: 0.3, 3: 0.4}


def torus_checks(fits: list[SlopeFit]) -> list[SweepCheck]:
    out = []
    for f in fits:
        d = f.extra["d"]
        if d not in TORUS_SLOPE_TOL or not f.extra.get("asserted"):
            continue
        ok = abs(f.slope - 2.0) <= TORUS_SLOPE_TOL[d]
        out.append(SweepCheck(f"torus-slope-d{d}", [f"l={int(x)}" for x in f.x], [f.slope],
                              PASS if ok else FAIL, f"slope 2 +- {TORUS_SLOPE_TOL[d]}"))
    return out


# --------------------------------------------------------------------------- calibration

def calibrate_windows(instances=CALIBRATION_SET, cfg: HarnessConfig | None = None,
                      reports: list[TheoremReport] | None = None) -> dict:
    """Observed ratio ranges over ``instances``, inflated by 2, as a window table.

    Raises
    ------
    ValidationError
        Fewer than 4 calibration instances contributed to some check.
    """
    cfg = cfg or HarnessConfig()
    cal_cfg = HarnessConfig(cfg.samples, cfg.cap, cfg.nmax, cfg.seed, windows={})
    if reports is None:
        reports = run_check_suite(instances, cal_cfg)
    observed: dict[str, list[tuple[float, str]]] = {k: [] for k in CALIBRATED_CHECKS}
    for rep in reports:
        for c in rep.checks:
            if c.calibrated and c.ratio is not None and c.status != SKIPPED:
                observed[c.id].append((c.ratio, rep.id))
    windows = {}
    for cid, vals in observed.items():
        if len(vals) < MIN_CALIBRATION:
            raise ValidationError(
                f"check {cid}: {len(vals)} calibration instances, need {MIN_CALIBRATION}")
        r = [v for v, _ in vals]
        kind = CHECK_TABLE[cid][0]
        windows[cid] = {
            "kind": kind,
            "min": None if kind == "upper" else min(r) / INFLATION,
            "max": max(r) * INFLATION,
            "observed": [min(r), max(r)],
            "instances": [i for _, i in vals],
        }
    return {
        "schema_version": WINDOWS_SCHEMA_VERSION,
        "inflation": INFLATION,
        "config": cal_cfg.provenance(),
        "calibration_instances": [fs.id for fs in instances],
        "windows": windows,
    }


# --------------------------------------------------------------------------- output

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


CSV_FIELDS = ("instance", "check", "lhs", "rhs", "ratio", "ratio_lo", "ratio_hi",
              "window_min", "window_max", "status", "pass", "reason")


def reports_csv(reports: list[TheoremReport], sweeps: list[SweepCheck] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for rep in reports:
        for c in rep.checks:
            w.writerow([rep.id, c.id, _fmt(c.lhs), _fmt(c.rhs), _fmt(c.ratio),
                        _fmt(c.ratio_lo), _fmt(c.ratio_hi), _fmt(c.window[0]),
                        _fmt(c.window[1]), c.status, int(c.status == PASS), c.reason])
    for s in sweeps:
        w.writerow(["|".join(s.instances), s.id, "", "", _fmt(s.values[-1] if s.values else None),
                    "", "", "", "", s.status, int(s.status == PASS), s.detail])
    return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def exit_code(reports: list[TheoremReport], sweeps: list[SweepCheck] = ()) -> int:
    bad = any(r.failed for r in reports) or any(s.status == FAIL for s in sweeps)
    return 1 if bad else 0


def emit_report(reports: list[TheoremReport], out_dir, fmt: str = "both",
                sweeps: list[SweepCheck] = (), fits: list[SlopeFit] = ()) -> int:
    """Write ``reports.json`` and/or ``checks.csv`` (plus ``sweeps.json``).

    Returns the exit status: 1 iff any evaluated check failed.
    """
    if fmt not in ("json", "csv", "both"):
        raise ValidationError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt in ("json", "both"):
        (out / "reports.json").write_text(dumps([r.to_dict() for r in reports]))
        if sweeps or fits:
            (out / "sweeps.json").write_text(dumps({
                "schema_version": SCHEMA_VERSION,
                "checks": [s.to_dict() for s in sweeps],
                "fits": [f.to_dict() for f in fits],
            }))
    if fmt in ("csv", "both"):
        (out / "checks.csv").write_text(reports_csv(reports, sweeps))
    return exit_code(reports, sweeps)


__all__ = [
    "CALIBRATION_SET",
    "CHECK_TABLE",
    "Check",
    "HarnessConfig",
    "SlopeFit",
    "SweepCheck",
    "TheoremReport",
    "calibrate_windows",
    "compute_quantities",
    "emit_report",
    "evaluate_checks",
    "exit_code",
    "load_windows",
    "pipi_sandwich",
    "run_check_suite",
    "run_instance",
    "suite_instances",
    "sweep_checks",
    "torus_checks",
    "torus_scaling",
    "two_cliques_trend",
]
