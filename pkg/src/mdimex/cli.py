"""Command-line front end: single solves and the data tables behind each study.

    mdimex solve --problem kaps --eps 1e-3 --dt 1e-2 --tend 1 --kmax 2
    mdimex converge --problem vdp --kmax 2 --tend 0.5 --eps 1e-1,1e-2 --dts halving:1e-1:8
    mdimex asymptotic --kmax 100 --tend 0.5 --dts halving:1e-1:5
    mdimex apresid --dt 1e-2 --eps 1e-3,1e-4,1e-5,1e-6
    mdimex stability --scheme fullk2 --gammas logspace

Tables are whitespace separated with 17 significant digits.  Exit status is
0 on success, 1 on a parameter error and 2 when a solve fails.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .core import SolverConfig
from .problems import (
    KapsSpec,
    LinearPrototypeSpec,
    UnsupportedProblem,
    VanDerPolSpec,
    family,
    kaps,
    linear_prototype,
    van_der_pol,
)
from .solver import StepFailure, integrate

FMT = "%.17g"


class ParameterError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for solver failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_floats(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values:
        raise ParameterError("empty list")
    return values


def parse_dts(text: str) -> list:
    """``halving:start:count`` or an explicit comma-separated list."""
    if text.startswith("halving:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ParameterError(f"expected halving:start:count, got {text!r}")
        try:
            start, count = float(parts[1]), int(parts[2])
        except ValueError:
            raise ParameterError(f"bad halving spec {text!r}") from None
        if not start > 0 or count < 1:
            raise ParameterError("halving needs start > 0 and count >= 1")
        return [start * 2.0 ** -j for j in range(count)]
    return parse_floats(text)


def parse_gammas(text: str) -> list:
    if text == "logspace":
        return [float(g) for g in analysis.default_gammas()]
    gammas = parse_floats(text)
    # accept either sign on input; the ray parameter is always <= 0
    return [-abs(g) for g in gammas]


def _write_table(rows, header: str, output: Optional[str]):
    lines = [header] + [" ".join(FMT % v for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _problem(args, eps: float):
    if args.problem == "vdp":
        return van_der_pol(VanDerPolSpec(eps))
    if args.problem == "kaps":
        return kaps(KapsSpec(eps))
    if args.problem == "linear":
        return linear_prototype(LinearPrototypeSpec(args.lam, args.mu))
    raise UnsupportedProblem(f"unknown problem {args.problem!r}")


def _config(args, dt: Optional[float] = None) -> SolverConfig:
    return SolverConfig(dt=args.dt if dt is None else dt, t_end=args.tend, k_max=args.kmax,
                        newton_tol=args.newton_tol)


def _require_finite(rows):
    if not all(np.isfinite(v) for row in rows for v in row):
        raise StepFailure("non-finite value in the output table")


def cmd_solve(args):
    eps = parse_floats(args.eps)[0] if args.eps else 1.0
    p = _problem(args, eps)
    result = integrate(p, _config(args), scheme=args.scheme)
    rows = [(t, *w) for t, w in zip(result.times, result.states)]
    _require_finite(rows)
    names = "t y z" if args.problem != "linear" else "t re im"
    _write_table(rows, f"# {names}", args.output)


def cmd_converge(args):
    if args.problem == "linear":
        raise ParameterError("converge needs an epsilon family (vdp or kaps)")
    dts = parse_dts(args.dts)
    epsilons = parse_floats(args.eps)
    cfg = _config(args, dts[0])
    recs = analysis.convergence_study(family(args.problem), cfg, dts, epsilons, args.kmax)
    n = len(dts)
    rows = []
    for j, dt in enumerate(dts):
        row = [dt]
        for i in range(len(epsilons)):
            r = recs[i * n + j]
            if not r.valid:
                raise StepFailure(f"solve failed at dt={dt:g}, eps={r.epsilon:g}")
            row += [r.error, r.slope_vs_prev if r.slope_vs_prev is not None else math.nan]
        rows.append(row)
    header = "# dt " + " ".join(f"err(eps={e:g}) slope(eps={e:g})" for e in epsilons)
    header += "\n# first-row slopes are nan: no coarser step to compare against"
    _write_table(rows, header, args.output)


def cmd_asymptotic(args):
    if args.problem != "vdp" and args.problem != "kaps":
        raise ParameterError("asymptotic needs an epsilon family (vdp or kaps)")
    dts = parse_dts(args.dts)
    eps_base = parse_floats(args.eps)[0] if args.eps else analysis.DEFAULT_EPSILON_BASE
    cfg = _config(args, dts[0])
    out = analysis.asymptotic_decompose(family(args.problem), cfg, dts, args.alpha, eps_base, args.kmax)
    rows = [(d.dt, d.delta0, d.delta1) for d in out]
    _require_finite(rows)
    _write_table(rows, f"# dt delta0 delta1  (alpha={args.alpha:g}, eps={eps_base:g})", args.output)


def cmd_apresid(args):
    if args.problem != "vdp":
        raise ParameterError("apresid needs a y' = z, z' = g/eps problem (vdp)")
    epsilons = parse_floats(args.eps)
    sweep = analysis.ap_residual_sweep(family("vdp"), _config(args), epsilons)
    rows = list(zip(sweep.epsilons, sweep.residuals))
    _require_finite(rows)
    _write_table(rows, f"# eps max|g|  (log-log slope {sweep.slope:.6g})", args.output)


def cmd_stability(args):
    analysis.parse_scheme(args.scheme)
    gammas = parse_gammas(args.gammas)
    points = analysis.stability_scan(args.scheme, gammas, mu_max_search=args.mu_max)
    rows = [(-pt.gamma, pt.mu_tilde_max if pt.bounded else args.mu_max) for pt in points]
    header = (f"# -gamma mu_max  (scheme {args.scheme}; "
              f"rows equal to {args.mu_max:g} are stable over the whole search range)")
    _write_table(rows, header, args.output)


COMMANDS = {
    "solve": cmd_solve,
    "converge": cmd_converge,
    "asymptotic": cmd_asymptotic,
    "apresid": cmd_apresid,
    "stability": cmd_stability,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdimex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dt=1e-2, tend=1.0, kmax=2, problems=("vdp", "kaps", "linear"), problem="vdp"):
        sp.add_argument("--problem", choices=problems, default=problem)
        sp.add_argument("--eps", default=None, help="comma-separated epsilon values")
        sp.add_argument("--dt", type=float, default=dt)
        sp.add_argument("--tend", type=float, default=tend)
        sp.add_argument("--kmax", type=int, default=kmax)
        sp.add_argument("--newton-tol", type=float, default=1e-14)
        sp.add_argument("--output", default=None, help="write the table here instead of stdout")

    sp = sub.add_parser("solve", help="one run, rows 't y z'")
    common(sp)
    sp.add_argument("--scheme", choices=("imex", "limit"), default="imex")
    sp.add_argument("--lam", type=float, default=-1.0, help="linear problem only")
    sp.add_argument("--mu", type=float, default=1.0, help="linear problem only")

    sp = sub.add_parser("converge", help="error/slope table over a dt sequence")
    common(sp, tend=0.5, problems=("vdp", "kaps", "linear"))
    sp.add_argument("--dts", default="halving:1e-1:8")
    sp.set_defaults(eps="1e-1,1e-2,1e-3,1e-4,1e-5,1e-6")

    sp = sub.add_parser("asymptotic", help="delta0/delta1 split of the error")
    common(sp, tend=0.5, kmax=100, problems=("vdp", "kaps", "linear"))
    sp.add_argument("--dts", default="halving:1e-1:5")
    sp.add_argument("--alpha", type=float, default=analysis.DEFAULT_ALPHA)

    sp = sub.add_parser("apresid", help="max |g| along the run against epsilon")
    common(sp, tend=0.5)
    sp.set_defaults(eps="1e-3,1e-4,1e-5,1e-6")

    sp = sub.add_parser("stability", help="largest stable mu~ along each ray lam~ = gamma mu~")
    sp.add_argument("--scheme", default="fullk2", help="predictor, limit or fullk<k>")
    sp.add_argument("--gammas", default="logspace", help="'logspace' or a comma-separated list")
    sp.add_argument("--mu-max", type=float, default=1e3)
    sp.add_argument("--output", default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except StepFailure as exc:
        print(f"mdimex: solver failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:  # ParameterError, UnsupportedProblem, config checks
        print(f"mdimex: parameter error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mdimex: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
