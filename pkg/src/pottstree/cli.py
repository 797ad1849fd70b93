"""Command-line interface.

Every option can also be supplied through an environment variable named
``POTTS_<OPTION>`` (upper case, dashes replaced by underscores); explicit
flags take precedence over the environment, which takes precedence over
the built-in defaults.

Exit codes: 0 success, 1 numerical failure, 2 invalid input, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable, Optional, Sequence

from .chains import build_chain
from .errors import BudgetExceeded, DomainError, SolverError
from .extremality import classify
from .model import Branch, PottsParams, branch_solution, enumerate_tisgms
from .recon import Decision, Estimator, RootPrior, SimConfig, estimate_reconstruction
from .scan import COLUMNS, SCHEMA_VERSION, scan, to_csv, to_jsonl
from .thresholds import critical_thresholds

EXIT_OK, EXIT_NUMERIC, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3
ENV_PREFIX = "POTTS_"
SIM_COLUMNS = ("schema_version", "q", "k", "m", "branch", "theta", "z", "depth", "method",
               "statistic", "stderr", "decision")


def _bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def _env(name: str, conv: Callable, default=None):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    try:
        return conv(raw)
    except ValueError as exc:
        raise DomainError(f"bad value for {ENV_PREFIX}{name.upper()}: {raw!r}") from exc


def _opt(p: argparse.ArgumentParser, name: str, conv=str, default=None, **kw):
    """Add ``--name`` whose default comes from the environment, then ``default``."""
    dest = name.replace("-", "_")
    p.add_argument(f"--{name}", dest=dest, type=conv, default=_env(name, conv, default), **kw)


def _flag(p: argparse.ArgumentParser, name: str, help: str):
    p.add_argument(f"--{name}", dest=name.replace("-", "_"), action="store_true",
                   default=_env(name, _bool, False), help=help)


def _common(p, theta=True, point=True):
    _opt(p, "q", int, help="number of spin values")
    _opt(p, "k", int, 2, help="tree order (children per vertex)")
    if theta:
        _opt(p, "theta", float, help="exp(J beta)")
    if point:
        _opt(p, "m", int, 1, help="size of the favoured block")
        _opt(p, "branch", str, "free", choices=["free", "z1", "z2"])
    _flag(p, "paper-exact", "do not cap the gamma bound at 1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pottstree",
        description="Translation-invariant Potts measures on Cayley trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify one measure")
    _common(p)
    _flag(p, "json", "print JSON instead of text")

    p = sub.add_parser("scan", help="classify every branch on a theta grid")
    _common(p, theta=False, point=False)
    _opt(p, "theta-min", float, help="first grid point (> 1)")
    _opt(p, "theta-max", float, help="last grid point")
    _opt(p, "steps", int, 1000, help="number of grid points")
    p.add_argument("--m", dest="m", type=int, action="append",
                   default=None, help="restrict to block size (repeatable)")
    p.add_argument("--branch", dest="branch", action="append",
                   choices=["free", "z1", "z2"], default=None,
                   help="restrict to branch (repeatable)")
    _flag(p, "no-markers", "omit threshold marker rows")
    _opt(p, "workers", int, 1)
    _opt(p, "format", str, "csv", choices=["csv", "jsonl"])
    _opt(p, "out", str, "-", help="output path, '-' for stdout")

    p = sub.add_parser("simulate", help="empirical reconstruction probe")
    _common(p)
    _opt(p, "depth", int, 8)
    _opt(p, "samples", int, 2000)
    _opt(p, "seed", int, 0)
    _opt(p, "workers", int, 1)
    _opt(p, "root-prior", str, "stationary", choices=[r.value for r in RootPrior])
    _opt(p, "fixed-spin", int, None, help="root spin for --root-prior fixed (1..q)")
    _opt(p, "estimator", str, Estimator.LEAF_TV.value, choices=[e.value for e in Estimator])
    _opt(p, "method", str, "auto", choices=["auto", "exact", "mc"])
    _opt(p, "format", str, "csv", choices=["csv", "jsonl"])
    _opt(p, "out", str, "-")

    p = sub.add_parser("counts", help="number of translation-invariant measures")
    _common(p, point=False)
    _flag(p, "json", "print JSON instead of text")

    p = sub.add_parser("thresholds", help="critical temperatures for a block size")
    _common(p, theta=False, point=False)
    _opt(p, "m", int, 1)
    _flag(p, "json", "print JSON instead of text")
    return parser


def _require(args, *names):
    for n in names:
        if getattr(args, n.replace("-", "_")) is None:
            raise DomainError(f"--{n} is required (or set {ENV_PREFIX}{n.upper().replace('-', '_')})")


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def cmd_classify(args) -> int:
    _require(args, "q", "theta")
    params = PottsParams(args.q, args.k, args.theta)
    sol = branch_solution(params, args.m, args.branch)
    v = classify(params, sol, args.paper_exact)
    ch = v.chain
    record = {
        "schema_version": SCHEMA_VERSION, "q": params.q, "k": params.k, "m": sol.m,
        "branch": sol.branch.value, "theta": params.theta, "z": sol.z,
        "a": _num(ch.a), "b": _num(ch.b), "lambda2_hat": ch.lambda2_hat,
        "lambda_hat": ch.lambda_hat, "ks_value": v.ks_value,
        "ks_value_fuzzy": v.ks_value_fuzzy, "martin_value": v.martin_value,
        "kappa": v.kappa, "gamma_bound": v.gamma_bound, "msw_value": v.msw_value,
        "verdict": v.verdict.value,
        "fuzzy_verdict": v.fuzzy_verdict.value if v.fuzzy_verdict else None,
        "region_annotation": v.region,
    }
    if args.json:
        _write(json.dumps(record) + "\n", "-")
    else:
        lines = [f"measure   q={params.q} k={params.k} m={sol.m} branch={sol.branch.value} "
                 f"theta={params.theta!r} z={sol.z!r}",
                 f"verdict   {v.verdict.value}",
                 f"region    {v.region}",
                 f"KS        k*lambda^2 = {v.ks_value:.12g}",
                 f"MSW       k*kappa*gamma = {v.msw_value:.12g} "
                 f"(kappa={v.kappa:.12g}, gamma<={v.gamma_bound:.12g})",
                 f"lumped    Martin = {v.martin_value:.12g}"
                 + (f" -> {v.fuzzy_verdict.value}" if v.fuzzy_verdict else "")]
        _write("\n".join(lines) + "\n", "-")
    return EXIT_OK


def cmd_scan(args) -> int:
    _require(args, "q", "theta-min", "theta-max")
    rows = scan(args.q, args.k, args.theta_min, args.theta_max, args.steps, ms=args.m,
                branches=args.branch or ("free", "z1", "z2"),
                paper_exact=args.paper_exact, markers=not args.no_markers,
                workers=args.workers)
    text = to_csv(rows, COLUMNS) if args.format == "csv" else to_jsonl(rows, COLUMNS)
    _write(text, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    _require(args, "q", "theta")
    params = PottsParams(args.q, args.k, args.theta)
    sol = branch_solution(params, args.m, args.branch)
    chain = build_chain(params, sol)
    base = {"schema_version": SCHEMA_VERSION, "q": params.q, "k": params.k, "m": sol.m,
            "branch": sol.branch.value, "theta": params.theta, "z": sol.z}
    rows = [dict(base, depth=0, method="exact", statistic=1.0, stderr=0.0,
                 decision=Decision.INCONCLUSIVE.value if args.depth == 0 else "")]
    decision = Decision.INCONCLUSIVE
    if args.depth < 0:
        raise DomainError("depth must be non-negative")
    if args.depth > 0:
        cfg = SimConfig(depth=args.depth, samples=args.samples, seed=args.seed,
                        root_prior=RootPrior(args.root_prior), fixed_spin=args.fixed_spin,
                        estimator=Estimator(args.estimator), method=args.method,
                        workers=args.workers)
        est = estimate_reconstruction(chain, cfg, params.k)
        decision = est.decision
        rows[0]["method"] = est.method
        for d, s, e in zip(est.depths, est.statistic, est.stderr):
            rows.append(dict(base, depth=int(d), method=est.method, statistic=float(s),
                             stderr=float(e), decision=est.decision.value))
    text = to_csv(rows, SIM_COLUMNS) if args.format == "csv" else to_jsonl(rows, SIM_COLUMNS)
    _write(text, args.out)
    if args.out != "-":
        sys.stdout.write(f"{decision.value}\n")
    return EXIT_OK


def cmd_counts(args) -> int:
    _require(args, "q", "theta")
    params = PottsParams(args.q, args.k, args.theta)
    en = enumerate_tisgms(params)
    entries = [{"m": 0 if e.solution.branch is Branch.FREE else e.solution.m,
                "branch": e.solution.branch.value, "z": e.solution.z,
                "orbit_size": e.orbit_size,
                "alias_of": None if e.alias_of is None else
                [e.alias_of[0], e.alias_of[1].value]} for e in en.entries]
    if args.json:
        _write(json.dumps({"q": params.q, "k": params.k, "theta": params.theta,
                           "count": en.total, "regime": en.regime,
                           "entries": entries}) + "\n", "-")
        return EXIT_OK
    lines = [f"count   {en.total}", f"regime  {en.regime}", "m  branch  orbit  z"]
    for e in entries:
        alias = "" if e["alias_of"] is None else f"  (relabels m={e['alias_of'][0]} {e['alias_of'][1]})"
        lines.append(f"{e['m']:<2} {e['branch']:<7} {e['orbit_size']:<6} {e['z']!r}{alias}")
    _write("\n".join(lines) + "\n", "-")
    return EXIT_OK


def cmd_thresholds(args) -> int:
    _require(args, "q")
    params = PottsParams(args.q, args.k, float(args.q + 1))
    th = critical_thresholds(params, args.m)
    if args.json:
        _write(json.dumps(th.as_dict()) + "\n", "-")
    else:
        lines = [f"{name:<20} {value!r}" for name, value in th.named_values().items()]
        lines.append(f"{'fold_meets_critical':<20} {th.fold_meets_critical}")
        _write("\n".join(lines) + "\n", "-")
    return EXIT_OK


_COMMANDS = {"classify": cmd_classify, "scan": cmd_scan, "simulate": cmd_simulate,
             "counts": cmd_counts, "thresholds": cmd_thresholds}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except DomainError as exc:  # malformed environment value
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (DomainError, BudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
