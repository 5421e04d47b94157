"""Command-line interface: ``hbvm <subcommand> ...``.

Exit status is 0 when every verdict passes, 1 when any fails and 2 on usage
or runtime errors.  Experiment outputs (CSV tables, ``report.json`` and a
plotting script) go to ``--out``; a summary is printed to stdout.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import experiments as ex
from .errors import HBVMError
from .integrator import AdaptiveConfig, integrate_adaptive, integrate_fixed
from .problems import HamiltonianSystem, problem_from_spec
from .tableau import tableau_to_json

DEFAULT_METHOD = "hbvm:k=3,r=3"
DEFAULT_PROBLEM = "kepler:e=0.6"


def _floats(text: str) -> list[float]:
    return [float(eval_number(v)) for v in text.split(",") if v.strip()]


def eval_number(text: str) -> float:
    """Parse a float, also accepting ``pi`` and simple ``a*pi/b`` forms."""
    t = text.strip().lower().replace("π", "pi")
    try:
        return float(t)
    except ValueError:
        pass
    if not set(t) <= set("0123456789.e+-*/pi() "):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    try:
        return float(eval(t, {"__builtins__": {}}, {"pi": math.pi}))  # noqa: S307
    except Exception as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _common(p: argparse.ArgumentParser, method: bool = True, problem: bool = True) -> None:
    if method:
        p.add_argument("--method", action="append", default=None,
                       help=f"hbvm:k=K,r=R[,rule=gauss|lobatto|file] (default {DEFAULT_METHOD})")
        p.add_argument("--rule-file", help="JSON file with nodes/weights for rule=file")
    if problem:
        p.add_argument("--problem", default=DEFAULT_PROBLEM,
                       help="kepler:e=E | test:alpha=A,beta=B | quartic")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="stdout format: verdict lines (csv) or the JSON report")
    p.add_argument("--backend", choices=("compiled", "python"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbvm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tableau", help="print an HBVM tableau as JSON")
    p.add_argument("-k", type=int, help="stages")
    p.add_argument("-r", type=int, help="truncation index (default k)")
    p.add_argument("--rule", choices=("gauss", "lobatto", "file"), default="gauss")
    p.add_argument("--verify", action="store_true", help="check row sums, factorization, Gauss coincidence")
    _common(p, problem=False)

    p = sub.add_parser("integrate", help="integrate a problem and write the trajectory CSV")
    _common(p)
    p.add_argument("--h", type=eval_number, help="fixed stepsize")
    p.add_argument("--steps", type=int, help="number of fixed steps")
    p.add_argument("--t-end", type=eval_number, help="final time")
    p.add_argument("--periods", type=int, help="final time in Kepler periods")
    p.add_argument("--tol", type=float, help="adaptive tolerance (switches to adaptive mode)")
    p.add_argument("--h-init", type=eval_number, default=1e-3)

    p = sub.add_parser("converge", help="fixed-step convergence order")
    _common(p)
    p.add_argument("--h", type=eval_number, help="largest stepsize (default 2*pi/100 for Kepler, 0.1 otherwise)")
    p.add_argument("--halvings", type=int, default=4)
    p.add_argument("--h-list", type=_floats, help="explicit comma-separated stepsizes")
    p.add_argument("--t-end", type=eval_number, help="final time (default one period / 1.0)")
    p.add_argument("--slope-tol", type=float, default=0.3)

    p = sub.add_parser("drift", help="long-time Hamiltonian drift and error growth")
    _common(p)
    p.add_argument("--mode", choices=("fixed", "adaptive"), default="adaptive")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--h", type=eval_number, help="fixed stepsize (fixed mode)")
    p.add_argument("--periods", type=int, default=100)
    p.add_argument("--long-run", action="store_true", help="use the full 1000 periods")
    p.add_argument("--expect", action="append", choices=("conserve", "drift", "none"),
                   help="expected behaviour, one per --method")
    p.add_argument("--drift-max", type=float, default=1e-12)
    p.add_argument("--ratio-min", type=float, default=10.0)

    p = sub.add_parser("stability", help="|R(z)| scan and Lyapunov check")
    _common(p, problem=False)
    p.add_argument("--grid", default="-50,0,-50,50,60,60",
                   help="re_min,re_max,im_min,im_max,n_re,n_im")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--beta", type=float, default=1.0)

    p = sub.add_parser("gamma", help="decay of the expansion coefficients with h")
    _common(p, method=False)
    p.add_argument("-r", type=int, default=5)
    p.add_argument("-k", type=int, help="stages of the generating method (default 2r)")
    p.add_argument("--h-list", type=_floats, default=[0.04, 0.02, 0.01, 0.005])
    p.add_argument("--slope-tol", type=float, default=0.3)
    return parser


def _methods(args) -> list:
    specs = args.method or [DEFAULT_METHOD]
    return [ex.method_from_spec(s, args.rule_file) for s in specs]


def _emit(report: ex.ExperimentReport, args) -> int:
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for stem in report.tables:
            with open(os.path.join(args.out, f"{stem}.csv"), "w", newline="") as fh:
                fh.write(report.table_csv(stem))
        with open(os.path.join(args.out, "report.json"), "w") as fh:
            fh.write(report.to_json() + "\n")
        with open(os.path.join(args.out, f"plot_{report.name}.py"), "w") as fh:
            fh.write(ex.plot_script(report))
    if args.format == "json":
        print(report.to_json())
    else:
        for v in report.verdicts:
            print(v.line())
        for note in report.notes:
            print(f"note: {note}")
    return 0 if report.passed else 1


def cmd_tableau(args) -> int:
    if args.k is not None:
        spec = f"hbvm:k={args.k},r={args.r if args.r is not None else args.k},rule={args.rule}"
    else:
        spec = (args.method or [DEFAULT_METHOD])[0]
    tab = ex.method_from_spec(spec, args.rule_file)
    text = tableau_to_json(tab)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "tableau.json"), "w") as fh:
            fh.write(text + "\n")
    print(text)
    if not args.verify:
        return 0
    report = ex.verify_tableau(tab)
    for v in report.verdicts:
        print(v.line())
    return 0 if report.passed else 1


def cmd_integrate(args) -> int:
    tab = _methods(args)[0]
    system = problem_from_spec(args.problem)
    period = getattr(system, "period", None)
    t_end = args.t_end
    if args.periods is not None:
        if period is None:
            raise HBVMError("--periods needs a periodic problem")
        t_end = args.periods * period
    if args.tol is not None:
        if t_end is None:
            raise HBVMError("adaptive mode needs --t-end or --periods")
        cfg = AdaptiveConfig(tol=args.tol, h_init=args.h_init,
                             h_max=max(args.h_init, (period or t_end) / 4.0))
        traj = integrate_adaptive(tab, system, system.y0, t_end, cfg, backend=args.backend)
    else:
        if args.h is None:
            raise HBVMError("fixed mode needs --h")
        n = args.steps if args.steps is not None else (
            round(t_end / args.h) if t_end is not None else None)
        if n is None:
            raise HBVMError("fixed mode needs --steps, --t-end or --periods")
        traj = integrate_fixed(tab, system, system.y0, args.h, n, backend=args.backend)
    text = traj.to_csv()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "trajectory.csv"), "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {len(traj.times)} rows to {os.path.join(args.out, 'trajectory.csv')}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_converge(args) -> int:
    tab = _methods(args)[0]
    system = problem_from_spec(args.problem)
    period = getattr(system, "period", None)
    t_end = args.t_end if args.t_end is not None else (period or 1.0)
    if args.h_list:
        h_list = args.h_list
    else:
        h0 = args.h if args.h is not None else (t_end / 100 if period else 0.1)
        h_list = ex.halving_list(h0, args.halvings)
    report = ex.run_converge(tab, system, h_list, t_end, slope_tol=args.slope_tol,
                             backend=args.backend)
    return _emit(report, args)


def cmd_drift(args) -> int:
    tabs = _methods(args)
    expects = args.expect or []
    if expects and len(expects) != len(tabs):
        raise HBVMError("give one --expect per --method")
    runs = [ex.DriftRun(t, e) for t, e in zip(tabs, expects or ["none"] * len(tabs))]
    system = problem_from_spec(args.problem)
    if not isinstance(system, HamiltonianSystem):
        raise HBVMError("drift needs a Hamiltonian problem")
    periods = 1000 if args.long_run else args.periods
    h = args.h
    if args.mode == "fixed" and h is None:
        h = 2.0 * math.pi / 200
    report = ex.run_drift(runs, system, mode=args.mode, periods=periods, tol=args.tol, h=h,
                          drift_max=args.drift_max, ratio_min=args.ratio_min,
                          backend=args.backend)
    return _emit(report, args)


def cmd_stability(args) -> int:
    parts = args.grid.split(",")
    if len(parts) != 6:
        raise HBVMError("--grid needs re_min,re_max,im_min,im_max,n_re,n_im")
    grid = tuple(float(x) for x in parts[:4]) + (int(parts[4]), int(parts[5]))
    report = ex.run_stability(_methods(args)[0], grid=grid, beta=args.beta, tol=args.tol)
    return _emit(report, args)


def cmd_gamma(args) -> int:
    system = problem_from_spec(args.problem)
    report = ex.run_gamma(system, r=args.r, h_list=args.h_list, k=args.k,
                          slope_tol=args.slope_tol, backend=args.backend)
    return _emit(report, args)


COMMANDS = {
    "tableau": cmd_tableau,
    "integrate": cmd_integrate,
    "converge": cmd_converge,
    "drift": cmd_drift,
    "stability": cmd_stability,
    "gamma": cmd_gamma,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (HBVMError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
