"""Command line interface.

Examples::

    vpl kr-min --gamma 1
    vpl solve --kappa 1 --lambda 400 --grid-n 256 --out runs/one
    vpl sweep --kappa 1 --lambdas 50,100,200,400,800 --grid-n 256 --out runs/sweep
    vpl verify --in runs/sweep

Every flag may also be given in a ``--config`` file of ``key = value`` lines
(``#`` starts a comment; keys are flag names without dashes, e.g.
``grid-n = 256``).  Flags on the command line override the file.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from . import __version__
from .diagnostics import make_constraints, make_report, sweep
from .disk_grid import build_grid
from .energy_solver import SolverConfig, solve
from .errors import ConfigurationError, VplError
from .io import persist, verify_dir
from .kirchhoff_routh import kr_minimize


def read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for num, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{path}:{num}: expected key = value")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _lambdas(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from exc


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_solver_flags(p):
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--energy-tol", type=float, default=1e-13)
    p.add_argument("--stability-tol", type=float, default=0.0)
    p.add_argument("--translate", type=_bool, default=True, metavar="yes|no",
                   help="try rigid one-row shifts after each bathtub fixed point")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vpl", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kr-min", help="minimum point of the two-vortex Kirchhoff-Routh function")
    p.add_argument("--config")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--kappa1", type=float, default=1.0)

    p = sub.add_parser("solve", help="maximize the energy for one lambda")
    p.add_argument("--config")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--grid-n", type=int, required=True)
    p.add_argument("--class", dest="klass", choices=("symmetric", "general"), default="symmetric")
    p.add_argument("--kappa2", type=float)
    p.add_argument("--out")
    _add_solver_flags(p)

    p = sub.add_parser("sweep", help="solve over several lambdas and fit the asymptotics")
    p.add_argument("--config")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--lambdas", type=_lambdas, required=True)
    p.add_argument("--grid-n", type=int, required=True)
    p.add_argument("--class", dest="klass", choices=("symmetric", "general"), default="symmetric")
    p.add_argument("--kappa2", type=float)
    p.add_argument("--out")
    _add_solver_flags(p)

    p = sub.add_parser("verify", help="re-check a persisted output directory")
    p.add_argument("--config")
    p.add_argument("--in", dest="in_dir", required=True)
    return ap


_DEST = {"lambda": "lam", "class": "klass", "in": "in_dir"}


def parse_args(argv=None) -> argparse.Namespace:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # find --config before the real parse so file values become defaults
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:] if argv else [])
    if known.config and argv:
        values = read_config(known.config)
        subparser = ap._subparsers._group_actions[0].choices.get(argv[0])
        if subparser is not None:
            actions = {a.dest: a for a in subparser._actions}
            defaults = {}
            for key, raw in values.items():
                dest = _DEST.get(key, key)
                if dest not in actions:
                    raise ConfigurationError(f"unknown config key {key!r} for {argv[0]}")
                act = actions[dest]
                defaults[dest] = act.type(raw) if act.type else raw
                act.required = False
            subparser.set_defaults(**defaults)
    return ap.parse_args(argv)


def _solver(args) -> SolverConfig:
    return SolverConfig(args.max_iters, args.stability_tol, args.energy_tol, args.translate)


def _settings(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config",)}


def _print_report(r):
    ratio = min(r.diam_over_eps)
    print(f"lambda={r.lam:g} eps={r.epsilon:.6g} E={r.energy:.12g} mu={r.mu:.12g} "
          f"c1=({r.centroid1[0]:.6g},{r.centroid1[1]:.6g}) c2=({r.centroid2[0]:.6g},"
          f"{r.centroid2[1]:.6g}) diam/eps={ratio:.4g} iters={r.iterations} "
          f"converged={r.converged}")


def cmd_kr_min(args) -> int:
    t0 = time.perf_counter()
    crit = kr_minimize(args.gamma, args.kappa1)
    print(f"gamma     {args.gamma!r}")
    print(f"rho1      {crit.rho1:.15f}")
    print(f"rho2      {crit.rho2:.15f}")
    print(f"F1        {crit.residuals[0]:.3e}")
    print(f"F2        {crit.residuals[1]:.3e}")
    print(f"H2        {crit.value:.15f}")
    print(f"P         (0, {crit.rho1:.15f})")
    print(f"Q         (0, {-crit.rho2:.15f})")
    print(f"time      {time.perf_counter() - t0:.4f} s")
    return 0


def cmd_solve(args) -> int:
    grid = build_grid(args.grid_n)
    cons = make_constraints(args.kappa, args.lam, args.klass, args.kappa2)
    res = solve(grid, cons, _solver(args))
    rep = make_report(res)
    _print_report(rep)
    if args.out:
        persist([res], args.out, _settings(args), _solver(args), [rep])
        print(f"wrote {args.out}")
    return 0 if res.converged else 1


def cmd_sweep(args) -> int:
    reports, fit, results = sweep(args.grid_n, args.kappa, args.lambdas, args.klass,
                                  args.kappa2, _solver(args), keep_results=True)
    for r in reports:
        _print_report(r)
    k = args.kappa
    print(f"mu slope     {fit.mu_slope:.6f}   (kappa/4pi = {k / (4 * math.pi):.6f})")
    print(f"energy slope {fit.energy_slope:.6f}   (kappa^2/4pi = {k * k / (4 * math.pi):.6f})")
    print(f"max diam/eps {fit.diam_ratio_max:.4f}")
    if fit.flagged:
        print(f"not converged: {fit.flagged}")
    if args.out:
        persist(results, args.out, _settings(args), _solver(args), reports)
        print(f"wrote {args.out}")
    return 0 if not fit.flagged else 1


def cmd_verify(args) -> int:
    checks = verify_dir(args.in_dir)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
    failed = sum(not ok for _, ok, _ in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if checks and not failed else 1


COMMANDS = {"kr-min": cmd_kr_min, "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except VplError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
