"""Command-line entry point: ``intertime <command> ...``.

Commands write JSON (or a chain file for ``generate``) to stdout or ``--out``
and log instance metadata to stderr. Exit status: 0 success, 1 a harness
check failed, 2 usage or configuration error (including errors raised by the
library, which are reported as a JSON object on stderr).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from intertime import exact, harness, montecarlo as mc, spectral
from intertime.chain import ChainMatrix, format_chain, read_chain
from intertime.config import TOL
from intertime.errors import IntertimeError, ValidationError
from intertime.families import FAMILIES, FamilySpec, generate

log = logging.getLogger("intertime")

FAMILY_PARAMS = ("n", "d", "l", "r", "h", "m", "s")
QUANTITIES = ("tmix", "tces", "tunif", "thit", "tH", "hitting", "etauI", "pIt", "tI")
MC_QUANTITIES = ("tau", "tI", "tIstar", "pipi", "It", "St")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _common(p: argparse.ArgumentParser, *, source=True, seed=True) -> None:
    if source:
        g = p.add_argument_group("chain source (exactly one of --family / --in)")
        g.add_argument("--family", choices=FAMILIES, help="generated family")
        g.add_argument("--in", dest="input", metavar="PATH", help="chain file")
        for k in FAMILY_PARAMS:
            g.add_argument(f"--{k}", type=int, metavar="INT", help=f"family parameter {k}")
        names = ("--family-seed",) if seed else ("--family-seed", "--seed")
        g.add_argument(*names, dest="family_seed", type=_seed, default=0, metavar="S",
                       help="seed for random tree families (default 0)")
    if seed:
        p.add_argument("--seed", type=_seed, default=mc.DEFAULT_SEED,
                       help="Monte Carlo seed (default 0xC0FFEE)")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--threads", type=_positive, default=None,
                   help="worker threads (default: all available); results do not depend on it")
    p.add_argument("--quiet", action="store_true", help="suppress log lines on stderr")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="intertime", description="Intersection and mixing times of Markov chains.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a family chain to a chain file")
    _common(g, seed=False)

    s = sub.add_parser("spectral", help="spectrum summary, Q, t_rel, t_unif, Q_t")
    _common(s, seed=False)
    s.add_argument("--horizon", type=_nonneg, action="append", metavar="T",
                   help="also report Q_t from state --x (repeatable)")
    s.add_argument("--x", type=_nonneg, default=0, help="state for Q_t (default 0)")
    s.add_argument("--dense", action="store_true", help="skip closed-form spectra")
    s.add_argument("--eigenvalues", action="store_true", help="include all eigenvalues")

    e = sub.add_parser("exact", help="exact quantities by linear algebra")
    _common(e, seed=False)
    e.add_argument("--quantity", choices=QUANTITIES, required=True,
                   help="tmix, tces, tunif, thit, tH, hitting (full table), etauI, pIt, tI")
    e.add_argument("--start", default=None, metavar="X,Y",
                   help="start pair for etauI / pIt; entries may be 'pi' for pIt")
    e.add_argument("--horizon", type=_nonneg, default=None, metavar="T", help="t for pIt")
    e.add_argument("--eps", type=float, default=None, help="threshold for tmix/tces/tunif")

    m = sub.add_parser("mc", help="Monte Carlo estimates with standard errors")
    _common(m)
    m.add_argument("--quantity", choices=MC_QUANTITIES, default=None,
                   help="tau (fixed start), tI, tIstar, pipi, It (intersection counts), "
                        "St (Green-sum diagnostic); default: tau if --start given, It if "
                        "--horizon also given, else tI")
    m.add_argument("--samples", type=_positive, default=10_000, help="replicates (default 10000)")
    m.add_argument("--cap", type=_positive, default=None,
                   help="truncation cap per replicate (default 100 (n + t_rel))")
    m.add_argument("--start", default=None, metavar="X,Y",
                   help="start laws: 'x,y', 'pi,pi' or 'x,pi'")
    m.add_argument("--horizon", type=_nonneg, default=None, metavar="T",
                   help="horizon t for It / St")

    h = sub.add_parser("harness", help="run or calibrate the inequality checks")
    hs = h.add_subparsers(dest="action", required=True, parser_class=_Parser)
    r = hs.add_parser("run", help="evaluate all checks on a suite, write JSON and CSV")
    r.add_argument("--suite", choices=harness.SUITES, default="all")
    r.add_argument("--out", required=True, metavar="DIR", help="output directory")
    r.add_argument("--seed", type=_seed, default=mc.DEFAULT_SEED)
    r.add_argument("--samples", type=_positive, default=None)
    r.add_argument("--cap", type=_positive, default=None)
    r.add_argument("--nmax", type=_positive, default=None, help="largest n for dense paths")
    r.add_argument("--budget", default=None, metavar="K=V,...",
                   help="budget shorthand, e.g. samples=2000,cap=50000,nmax=1024")
    r.add_argument("--windows", default=None, metavar="PATH",
                   help="window table (default: the frozen package table)")
    r.add_argument("--format", choices=("json", "csv", "both"), default="both")
    r.add_argument("--threads", type=_positive, default=None)
    r.add_argument("--quiet", action="store_true")
    c = hs.add_parser("calibrate", help="measure windows on the calibration set")
    c.add_argument("--out", required=True, metavar="PATH", help="windows JSON to write")
    c.add_argument("--seed", type=_seed, default=mc.DEFAULT_SEED)
    c.add_argument("--samples", type=_positive, default=10_000)
    c.add_argument("--threads", type=_positive, default=None)
    c.add_argument("--quiet", action="store_true")
    return p


# --------------------------------------------------------------------------- helpers

def _load_chain(args) -> tuple[ChainMatrix, dict]:
    params = {k: getattr(args, k) for k in FAMILY_PARAMS if getattr(args, k) is not None}
    if (args.family is None) == (args.input is None):
        raise UsageError("give exactly one chain source: --family or --in")
    if args.input is not None:
        if params:
            raise UsageError("family parameters given together with --in")
        chain = read_chain(args.input)
        info = {"source": "file", "path": str(args.input)}
    else:
        fs = FamilySpec(args.family, params, args.family_seed)
        chain = generate(fs)
        info = {"source": "family", "id": fs.id, **fs.to_dict()}
    info.update(n=chain.n, lazy=bool(chain.lazy), reversible=bool(chain.reversible),
                transitive=bool(chain.transitive))
    log.info("chain %s", json.dumps(info, sort_keys=True))
    return chain, info


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _start(text: str | None, n: int, allow_pi: bool) -> tuple:
    if text is None:
        raise UsageError("--start is required for this quantity")
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise UsageError(f"--start expects two comma-separated entries, got {text!r}")
    out = []
    for p in parts:
        if p == "pi":
            if not allow_pi:
                raise UsageError("'pi' start is not supported here")
            out.append("pi")
            continue
        try:
            v = int(p)
        except ValueError:
            raise UsageError(f"bad start entry {p!r}") from None
        if not 0 <= v < n:
            raise UsageError(f"start state {v} out of range for n={n}")
        out.append(v)
    return tuple(out)


def _parse_budget(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in ("samples", "cap", "nmax"):
            raise UsageError(f"bad --budget entry {item!r}; keys are samples, cap, nmax")
        try:
            out[key] = int(val)
        except ValueError:
            raise UsageError(f"bad --budget value {val!r}") from None
        if out[key] < 1:
            raise UsageError(f"--budget {key} must be positive")
    return out


# --------------------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    chain, _ = _load_chain(args)
    _emit(format_chain(chain), args.out)
    return 0


def cmd_spectral(args) -> int:
    chain, info = _load_chain(args)
    sp_ = spectral.spectrum(chain, closed_form=not args.dense)
    Q, t_rel = spectral.compute_Q(sp_)
    res = {"command": "spectral", "chain": info, "source": sp_.source, "n": sp_.n,
           "lambda2": sp_.lambda2, "Q": Q, "t_rel": t_rel, "sqrt_Q": Q ** 0.5}
    if chain.lazy:
        res["t_unif"] = spectral.uniform_mixing_time(chain)
        res["Qt_unif"] = spectral.compute_Qt(chain, args.x if args.x < chain.n else 0,
                                             res["t_unif"])
    if args.horizon:
        if not 0 <= args.x < chain.n:
            raise UsageError(f"--x {args.x} out of range")
        res["Qt"] = {str(t): spectral.compute_Qt(chain, args.x, t) for t in args.horizon}
    if args.eigenvalues:
        res["eigenvalues"] = sp_.eigenvalues.tolist()
    _emit(harness.dumps(res), args.out)
    return 0


# how each exact quantity is computed, and the size limit it runs under
EXACT_METHODS = {
    "tmix": ("dense powers with bisection (single row if transitive)", "dense_max_n"),
    "tces": ("linear scan of averaged distributions", "dense_max_n"),
    "tunif": ("dense powers with bisection (return probability if transitive)", "dense_max_n"),
    "thit": ("restricted linear solves", "dense_max_n"),
    "hitting": ("fundamental matrix", "dense_max_n"),
    "tH": ("subset enumeration with restricted solves", "t_H_max_n"),
    "etauI": ("absorbing product-range chain solve", "product_max_n"),
    "pIt": ("forward propagation on the product-range chain", "product_max_n"),
    "tI": ("absorbing product-range chain solve over all pairs", "product_max_n"),
}


def cmd_exact(args) -> int:
    chain, info = _load_chain(args)
    q = args.quantity
    method, limit = EXACT_METHODS[q]
    limits = {"dense_max_n": TOL.dense_max_n, "t_H_max_n": exact.T_H_MAX_N,
              "product_max_n": exact.PRODUCT_MAX_N}
    res: dict = {"command": "exact", "chain": info, "quantity": q, "method": method,
                 "budget_used": {"n": chain.n, limit: limits[limit]}}
    if q == "tmix":
        res["value"] = exact.tv_mixing_time(chain, args.eps)
    elif q == "tces":
        res["value"] = exact.cesaro_mixing_time(chain, args.eps)
    elif q == "tunif":
        res["value"] = spectral.uniform_mixing_time(chain, args.eps)
    elif q == "thit":
        res["value"] = exact.t_hit(chain)
    elif q == "hitting":
        tab = exact.hitting_times(chain)
        res.update(value=tab.t_hit, table=tab.h.tolist(), residual=tab.residual)
    elif q == "tH":
        val, arg = exact.t_H_bruteforce(chain)
        res.update(value=val, argmax_set=list(arg))
    elif q == "etauI":
        x, y = _start(args.start, chain.n, allow_pi=False)
        res.update(start=[x, y], value=exact.exact_intersection_expectation(chain, x, y))
    elif q == "tI":
        val, pair = exact.exact_tI(chain)
        res.update(value=val, argmax=list(pair))
    else:  # pIt
        if args.horizon is None:
            raise UsageError("--horizon is required for pIt")
        x, y = _start(args.start, chain.n, allow_pi=True)
        mu_x = chain.pi if x == "pi" else x
        mu_y = chain.pi if y == "pi" else y
        res.update(start=[x, y], t=args.horizon,
                   value=exact.exact_intersection_probability(chain, mu_x, mu_y, args.horizon))
    _emit(harness.dumps(res), args.out)
    return 0


def cmd_mc(args) -> int:
    chain, info = _load_chain(args)
    q = args.quantity
    if q is None:
        q = "tI" if args.start is None else ("It" if args.horizon is not None else "tau")
    res: dict = {"command": "mc", "chain": info, "quantity": q, "seed": args.seed,
                 "samples": args.samples}
    if q in ("It", "St") and args.horizon is None:
        raise UsageError(f"--horizon is required for {q}")
    cap = args.cap
    if q == "tau":
        x, y = _start(args.start, chain.n, allow_pi=True)
        if x == "pi" and y != "pi":
            x, y = y, x
        res["start"] = [x, y]
        res["estimate"] = mc.estimate_tau_I(chain, x, y, args.samples, cap, args.seed).to_dict()
    elif q == "tI":
        res["estimate"] = mc.estimate_tI(chain, args.samples, cap, args.seed).to_dict()
    elif q == "tIstar":
        res["estimate"] = mc.estimate_tI_star(chain, args.samples, cap, args.seed).to_dict()
    elif q == "pipi":
        res["estimate"] = mc.estimate_pi_pi_expectation(chain, args.samples, cap,
                                                        args.seed).to_dict()
    elif q == "It":
        x, y = _start(args.start or "0,0", chain.n, allow_pi=False)
        counts = mc.count_intersections(chain, x, y, args.horizon, args.samples, args.seed)
        res.update(start=[x, y], t=args.horizon)
        res["estimate"] = mc.summarize(counts, args.seed).to_dict()
        res["second_moment"] = mc.summarize(counts.astype(float) ** 2, args.seed).to_dict()
        res["Qt"] = spectral.compute_Qt(chain, x, args.horizon, check=False)
    else:  # St
        x = 0 if args.start is None else _start(args.start, chain.n, allow_pi=True)[0]
        if x == "pi":
            raise UsageError("St needs a fixed start state")
        d = mc.s_t_diagnostic(chain, x, args.horizon, args.samples, args.seed)
        res.update(start=x, t=d.t, Qt=d.Qt, frequency=d.frequency, std_error=d.std_error,
                   bound=1 / 16, ok=d.ok)
    _emit(harness.dumps(res), args.out)
    return 0


def cmd_harness(args) -> int:
    if args.action == "calibrate":
        cfg = harness.HarnessConfig(samples=args.samples, seed=args.seed)
        table = harness.calibrate_windows(harness.CALIBRATION_SET, cfg)
        Path(args.out).write_text(harness.dumps(table))
        return 0
    budget = _parse_budget(args.budget)
    for key in ("samples", "cap", "nmax"):
        if getattr(args, key) is not None:
            budget[key] = getattr(args, key)
    windows = harness.load_windows(args.windows)["windows"] if args.windows else None
    cfg = harness.HarnessConfig(seed=args.seed, windows=windows, **budget)
    if args.suite == "torus":
        fits = harness.torus_scaling(cfg=cfg)
        sweeps = harness.torus_checks(fits)
        return harness.emit_report([], args.out, args.format, sweeps, fits)
    reports = harness.run_check_suite(harness.suite_instances(args.suite), cfg)
    sweeps = harness.sweep_checks(reports)
    code = harness.emit_report(reports, args.out, args.format, sweeps)
    for rep in reports:
        for c in rep.failed:
            log.warning("FAIL %s %s ratio=%s window=%s", rep.id, c.id, c.ratio, c.window)
    return code


COMMANDS = {"generate": cmd_generate, "spectral": cmd_spectral, "exact": cmd_exact,
            "mc": cmd_mc, "harness": cmd_harness}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    mc.set_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"intertime: error: {exc}", file=sys.stderr)
        return 2
    except (IntertimeError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ValidationError):
            err["kind"] = "validation"
        print(json.dumps(err), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
