"""Experiment drivers behind the CLI.

Each ``run_*`` function returns an :class:`ExperimentReport` holding the raw
per-run data (as CSV tables), the fitted slopes and the pass/fail verdicts
with the tolerance each one was judged against.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import custom_rule, gauss_rule, legendre_table, lobatto_rule
from .errors import StageConvergenceError, StepsizeUnderflowError, ValidationError
from .integrator import AdaptiveConfig, integrate_adaptive, integrate_fixed
from .problems import HamiltonianSystem, OdeSystem, linear_test, parse_params
from .stepper import step, step_polynomial
from .tableau import (
    ButcherTableau,
    StabilityFunction,
    build_hbvm,
    collocation_tableau,
    stability_value,
    verify_factorization,
)


def _f17(x) -> str:
    return format(float(x), ".17g")


@dataclass
class Verdict:
    name: str
    value: float
    criterion: str
    tolerance: float
    passed: bool

    def line(self) -> str:
        return (f"{self.name}: {'PASS' if self.passed else 'FAIL'} "
                f"(value={self.value:.6g}, {self.criterion}, tol={self.tolerance:g})")


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    tables: dict = field(default_factory=dict)  # file stem -> (header, rows)
    fits: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add_table(self, stem: str, header: list[str], rows: list[list]) -> None:
        self.tables[stem] = (header, rows)

    def check(self, name: str, value: float, ok: bool, criterion: str, tolerance: float):
        self.verdicts.append(Verdict(name, float(value), criterion, float(tolerance), bool(ok)))

    def table_csv(self, stem: str) -> str:
        header, rows = self.tables[stem]
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "parameters": self.parameters,
            "fits": self.fits,
            "verdicts": [v.__dict__ for v in self.verdicts],
            "passed": self.passed,
            "tables": {stem: f"{stem}.csv" for stem in self.tables},
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, default=_jsonable)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return _f17(v)


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def loglog_slope(x, y) -> tuple[float, float, float]:
    """Least-squares fit of ``log y = slope * log x + icept``; returns (slope, icept, rms residual)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    coef, res, *_ = np.polyfit(lx, ly, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(lx)) if len(res) else 0.0
    return float(coef[0]), float(coef[1]), rms


def linear_slope(x, y) -> tuple[float, float]:
    coef = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(coef[0]), float(coef[1])


# ------------------------------------------------------------ method specs


def rule_from_file(path: str) -> "QuadratureRule":  # noqa: F821
    """Read ``{"nodes": [...], "weights": [...]}`` from a JSON file."""
    with open(path) as fh:
        data = json.load(fh)
    return custom_rule(data["nodes"], data["weights"], name=f"file:{path}")


def method_from_spec(spec: str, rule_file: str | None = None) -> ButcherTableau:
    """``hbvm:k=3,r=3[,rule=gauss|lobatto|file]`` -> tableau."""
    name, _, rest = spec.partition(":")
    if name != "hbvm":
        raise ValidationError(f"unknown method family {name!r}")
    params = parse_params(rest)
    extra = set(params) - {"k", "r", "rule"}
    if extra:
        raise ValidationError(f"unknown method parameters {sorted(extra)}")
    try:
        k = int(params["k"])
        r = int(params.get("r", k))
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"method spec {spec!r} needs integer k (and r)") from exc
    kind = params.get("rule", "gauss")
    if kind == "gauss":
        rule = gauss_rule(k)
    elif kind == "lobatto":
        rule = lobatto_rule(k)
    elif kind == "file":
        if not rule_file:
            raise ValidationError("rule=file needs --rule-file")
        rule = rule_from_file(rule_file)
    else:
        raise ValidationError(f"unknown rule {kind!r}")
    return build_hbvm(k, r, rule)


# ---------------------------------------------------------------- converge


def halving_list(h0: float, halvings: int) -> list[float]:
    return [h0 / 2**i for i in range(halvings + 1)]


def run_converge(tableau: ButcherTableau, system: OdeSystem, h_list, t_end: float,
                 y0=None, slope_tol: float = 0.3, expected: int | None = None,
                 backend: str | None = None) -> ExperimentReport:
    """Fixed-step errors at ``t_end`` for each h and the fitted log-log slope."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise ValidationError("need at least three stepsizes")
    for a, b in zip(h_list, h_list[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ValidationError("each stepsize must halve the previous one")
    y0 = np.asarray(system.y0 if y0 is None else y0, dtype=float)
    steps = []
    for h in h_list:
        n = round(t_end / h)
        if n < 1 or abs(n * h - t_end) > 1e-9 * max(1.0, t_end):
            raise ValidationError(f"t_end={t_end} is not a multiple of h={h}")
        steps.append(n)

    expected = tableau.p if expected is None else expected
    report = ExperimentReport("converge", {
        "method": tableau.label, "k": tableau.k, "r": tableau.r, "rule_order": tableau.rule_order,
        "problem": system.name, "t_end": t_end, "h_list": h_list, "expected_order": expected,
        "slope_tol": slope_tol, "norm": "inf",
    })
    if system.exact is not None:
        y_ref = np.asarray(system.exact(t_end), dtype=float)
        report.parameters["reference"] = "closed form"
    else:
        h_ref = h_list[-1] / 8.0
        ref = integrate_fixed(build_hbvm(15, 3), system, y0, h_ref, steps[-1] * 8,
                              backend=backend)
        y_ref = ref.y[-1]
        report.parameters["reference"] = f"HBVM(15,3) at h={h_ref:.17g}"

    rows, errs = [], []
    for h, n in zip(h_list, steps):
        traj = integrate_fixed(tableau, system, y0, h, n, backend=backend)
        err = float(np.max(np.abs(traj.y[-1] - y_ref)))
        errs.append(err)
        rows.append([h, n, err, max(traj.iterations[1:])])
    report.add_table("converge", ["h", "n_steps", "error", "max_iterations"], rows)
    slope, icept, rms = loglog_slope(h_list, errs)
    report.fits["error_vs_h"] = {"slope": slope, "intercept": icept, "rms_residual": rms}
    report.check("order", slope, abs(slope - expected) <= slope_tol,
                 f"|slope - {expected}| <= tol", slope_tol)
    return report


# ------------------------------------------------------------------- drift


@dataclass
class DriftRun:
    tableau: ButcherTableau
    expect: str = "none"  # conserve | drift | none


def _period_samples(traj, period: float, n_periods: int):
    t = traj.t
    idx = []
    for n in range(1, n_periods + 1):
        i = int(np.argmin(np.abs(t - n * period)))
        if abs(t[i] - n * period) > 1e-9 * n * period:
            break
        idx.append(i)
    return idx


def run_drift(runs: list[DriftRun], system: HamiltonianSystem, mode: str = "adaptive",
              periods: int = 100, tol: float = 1e-10, h: float | None = None,
              period: float | None = None, drift_max: float = 1e-12,
              ratio_min: float = 10.0, backend: str | None = None,
              h_init: float = 1e-3) -> ExperimentReport:
    """Per-period Hamiltonian and solution errors for one or more methods.

    ``expect="conserve"`` asserts a drift slope ``<= drift_max`` per period and
    a growth exponent of 1 +- 0.3; ``expect="drift"`` asserts an exponent of
    2 +- 0.4 and, when a conserving run is present, a drift slope at least
    ``ratio_min`` times the largest conserving one.
    """
    if not isinstance(system, HamiltonianSystem):
        raise ValidationError("drift needs a Hamiltonian problem")
    if mode not in ("fixed", "adaptive"):
        raise ValidationError(f"mode must be fixed or adaptive, got {mode!r}")
    period = period or getattr(system, "period", 2.0 * math.pi)
    y0 = np.asarray(system.y0, dtype=float)
    H0 = float(system.H(y0))
    report = ExperimentReport("drift", {
        "methods": [r.tableau.label for r in runs], "expect": [r.expect for r in runs],
        "problem": system.name, "mode": mode, "periods": periods, "period": period,
        "tol": tol if mode == "adaptive" else None, "h": h if mode == "fixed" else None,
        "drift_max_per_period": drift_max, "ratio_min": ratio_min, "norm": "inf",
        "reference": "analytic" if system.exact is not None else "none",
    })
    slopes = {}
    for run in runs:
        tab = run.tableau
        label = tab.label if tab.rule_name.startswith("gauss") else f"{tab.label}[{tab.rule_name}]"
        failure = None
        try:
            if mode == "fixed":
                if h is None:
                    raise ValidationError("fixed mode needs h")
                n_per = round(period / h)
                if abs(n_per * h - period) > 1e-9 * period:
                    raise ValidationError("h must divide the period")
                traj = integrate_fixed(tab, system, y0, h, n_per * periods, backend=backend)
            else:
                cfg = AdaptiveConfig(tol=tol, h_init=h_init, h_max=period / 4.0)
                traj = integrate_adaptive(tab, system, y0, periods * period, cfg,
                                          checkpoints=[n * period for n in range(1, periods)],
                                          backend=backend)
        except (StageConvergenceError, StepsizeUnderflowError) as exc:
            traj, failure = exc.partial, exc
        if failure is not None:
            report.notes.append(f"{label}: integration failed: {failure}")
            report.check(f"{label} integration", float(traj.times[-1]), False,
                         "reached t_end (value = last time reached)", periods * period)
        idx = _period_samples(traj, period, periods)
        if len(idx) < 2:
            report.notes.append(f"{label}: fewer than two periods completed, no fits")
            continue
        rows, dH, serr = [], [], []
        for n, i in enumerate(idx, start=1):
            e_H = abs(traj.H_values[i] - H0)
            e_y = (float(np.max(np.abs(traj.states[i] - system.exact(traj.times[i]))))
                   if system.exact is not None else math.nan)
            dH.append(e_H)
            serr.append(e_y)
            rows.append([n, traj.times[i], traj.H_values[i], e_H, e_y])
        stem = f"drift_{tab.k}_{tab.r}_{tab.rule_name}"
        report.add_table(stem, ["period", "t", "H", "H_error", "solution_error"], rows)
        report.add_table(stem + "_trajectory", *_traj_table(traj))
        n_arr = np.arange(1, len(idx) + 1)
        slope, icept = linear_slope(n_arr, dH)
        fit = {"H_drift_slope_per_period": slope, "H_drift_intercept": icept,
               "max_H_error": float(max(dH)), "accepted_steps": traj.n_accepted,
               "rejected_steps": traj.n_rejected}
        if system.exact is not None:
            expo, ic, rms = loglog_slope(n_arr * period, serr)
            fit.update(growth_exponent=expo, growth_intercept=ic, growth_rms=rms)
        report.fits[label] = fit
        slopes[label] = (run.expect, slope, fit.get("growth_exponent", math.nan))
        if len(idx) < periods:
            report.notes.append(f"{label}: only {len(idx)} of {periods} periods reached")

    conserving = [s for (e, s, _) in slopes.values() if e == "conserve"]
    for label, (expect, slope, expo) in slopes.items():
        if expect == "conserve":
            report.check(f"{label} H drift", slope, slope <= drift_max,
                         "slope <= tol per period", drift_max)
            report.check(f"{label} growth exponent", expo, abs(expo - 1.0) <= 0.3,
                         "|exponent - 1| <= tol", 0.3)
        elif expect == "drift":
            report.check(f"{label} growth exponent", expo, abs(expo - 2.0) <= 0.4,
                         "|exponent - 2| <= tol", 0.4)
            if conserving:
                ref = max(max(conserving), 0.0)
                report.check(f"{label} drift ratio", slope, slope >= ratio_min * ref and slope > 0,
                             f"slope >= tol x conserving slope ({ref:.3g})", ratio_min)
            else:
                report.check(f"{label} drift present", slope, slope > 0.0, "slope > tol", 0.0)
    return report


def _traj_table(traj):
    m = len(traj.states[0])
    header = ["t"] + [f"y_{i + 1}" for i in range(m)] + ["H", "V", "h", "err"]
    rows = []
    for n in range(len(traj.times)):
        rows.append([traj.times[n], *traj.states[n],
                     traj.H_values[n] if traj.H_values is not None else math.nan,
                     traj.V_values[n], traj.h_values[n], traj.err_values[n]])
    return header, rows


# --------------------------------------------------------------- stability

LYAPUNOV_HS = (0.1, 1.0, 10.0, 100.0)
IMAG_AXIS_YS = (0.1, 1.0, 10.0, 40.0)


def run_stability(tableau: ButcherTableau, grid=(-50.0, 0.0, -50.0, 50.0, 60, 60),
                  hs=LYAPUNOV_HS, beta: float = 1.0, conserve_steps: int = 1000,
                  decay_steps: int = 20, tol: float = 1e-10,
                  lyapunov_tol: float = 1e-11) -> ExperimentReport:
    """Scan |R(z)| on a rectangle and check the discrete Lyapunov behaviour.

    The time-domain part integrates the rotated test system for
    ``alpha = -1`` (V must strictly decrease) and ``alpha = 0`` (V must stay
    within ``lyapunov_tol`` relative) with the Newton stage solver.
    """
    re0, re1, im0, im1, nre, nim = grid
    report = ExperimentReport("stability", {
        "method": tableau.label, "rule_order": tableau.rule_order, "grid": list(grid),
        "hs": list(hs), "beta": beta, "conserve_steps": conserve_steps,
        "decay_steps": decay_steps,
    })
    xs, ys, mag = StabilityFunction(tableau).grid(re0, re1, im0, im1, int(nre), int(nim))
    rows = [[x, y, mag[j, i]] for j, y in enumerate(ys) for i, x in enumerate(xs)]
    report.add_table("stability_grid", ["re", "im", "absR"], rows)
    max_r = float(np.max(mag))
    report.fits["max_absR"] = max_r
    report.check("grid max |R|", max_r, max_r <= 1.0 + tol, "max |R| <= 1 + tol", tol)
    axis_rows = []
    for y in IMAG_AXIS_YS:
        dev = abs(abs(stability_value(tableau, complex(0.0, y))) - 1.0)
        axis_rows.append([y, dev])
        report.check(f"||R(i{y:g})| - 1|", dev, dev <= tol, "deviation <= tol", tol)
    report.add_table("stability_axis", ["y", "abs_deviation"], axis_rows)

    lyap_rows = []
    for alpha, n_steps in ((-1.0, decay_steps), (0.0, conserve_steps)):
        for h in hs:
            sysm = linear_test(alpha, beta)
            traj = integrate_fixed(tableau, sysm, np.array([1.0, 0.0]), h, n_steps,
                                   solver="newton")
            V = traj.V
            dV = np.diff(V)
            for i, d in enumerate(dV):
                lyap_rows.append([alpha, h, i + 1, V[i + 1], d])
            if alpha < 0:
                ok = bool(np.all(dV < 0.0))
                report.check(f"dV < 0 (alpha={alpha:g}, h={h:g})", float(np.max(dV)), ok,
                             "max dV < tol", 0.0)
            else:
                dev = float(np.max(np.abs(V - V[0])) / V[0])
                report.check(f"|V - V0|/V0 (alpha=0, h={h:g})", dev, dev <= lyapunov_tol,
                             "deviation <= tol", lyapunov_tol)
    report.add_table("lyapunov", ["alpha", "h", "step", "V", "dV"], lyap_rows)
    return report


# ------------------------------------------------------------------- gamma


def gamma_coefficients(tableau: ButcherTableau, system: OdeSystem, y0, h: float,
                       n: int, quad_points: int = 30, backend: str | None = None):
    """``gamma_j = int_0^1 P_j(tau) f(u(t0 + tau h)) dtau`` for j = 0..n-1.

    ``u`` is the polynomial of one converged step; the integrals use a
    ``quad_points``-point Gauss rule.  Returns an array of shape ``(n, m)``.
    """
    res = step(tableau, system, y0, h, backend=backend)
    u = step_polynomial(tableau, res, y0, h)
    rule = gauss_rule(quad_points)
    F = system.rhs(u(rule.nodes))
    P = legendre_table(n - 1, rule.nodes)
    return (P * rule.weights[None, :]) @ F


def run_gamma(system: OdeSystem, r: int = 5, h_list=(0.04, 0.02, 0.01, 0.005), y0=None,
              k: int | None = None, slope_tol: float = 0.3, zero_tol: float = 1e-14,
              backend: str | None = None) -> ExperimentReport:
    """Decay rate of |gamma_j| with h along HBVM(k, r) steps (k defaults to 2r)."""
    k = 2 * r if k is None else k
    tab = build_hbvm(k, r)
    y0 = np.asarray(system.y0 if y0 is None else y0, dtype=float)
    report = ExperimentReport("gamma", {
        "problem": system.name, "r": r, "k": k, "h_list": [float(h) for h in h_list],
        "slope_tol": slope_tol, "zero_tol": zero_tol, "norm": "inf",
    })
    mags = np.array([np.max(np.abs(gamma_coefficients(tab, system, y0, h, r, backend=backend)),
                            axis=1) for h in h_list])  # len(h) x r
    rows = [[h, j, mags[i, j]] for i, h in enumerate(h_list) for j in range(r)]
    report.add_table("gamma", ["h", "j", "abs_gamma"], rows)
    scale = 1.0 + float(np.max(mags[:, 0]))
    for j in range(r):
        if np.all(mags[:, j] <= zero_tol * scale):
            report.fits[f"j={j}"] = {"slope": None, "vanishes": True}
            report.check(f"gamma_{j} vanishes", float(np.max(mags[:, j])), True,
                         "max |gamma| <= tol", zero_tol)
            continue
        slope, icept, rms = loglog_slope(h_list, mags[:, j])
        report.fits[f"j={j}"] = {"slope": slope, "slope_minus_j": slope - j,
                                 "intercept": icept, "rms_residual": rms}
        tol_j = 0.2 if j == 0 else slope_tol
        report.check(f"gamma_{j} slope", slope, abs(slope - j) <= tol_j,
                     f"|slope - {j}| <= tol", tol_j)
    return report


# ----------------------------------------------------------------- tableau

# Published Gauss collocation coefficients.
_S3 = math.sqrt(3.0)
_S15 = math.sqrt(15.0)
PUBLISHED_GAUSS = {
    1: np.array([[0.5]]),
    2: np.array([[0.25, 0.25 - _S3 / 6.0],
                 [0.25 + _S3 / 6.0, 0.25]]),
    3: np.array([[5.0 / 36.0, 2.0 / 9.0 - _S15 / 15.0, 5.0 / 36.0 - _S15 / 30.0],
                 [5.0 / 36.0 + _S15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - _S15 / 24.0],
                 [5.0 / 36.0 + _S15 / 30.0, 2.0 / 9.0 + _S15 / 15.0, 5.0 / 36.0]]),
}


def gauss_reference(s: int) -> np.ndarray:
    """Classical s-stage Gauss matrix: closed forms for s <= 3, collocation otherwise."""
    if s in PUBLISHED_GAUSS:
        return PUBLISHED_GAUSS[s]
    return collocation_tableau(gauss_rule(s).nodes)


def verify_tableau(tableau: ButcherTableau, tol_rows: float = 1e-13,
                   tol_fact: float = 1e-12, tol_gauss: float = 1e-12) -> ExperimentReport:
    report = ExperimentReport("tableau", {"method": tableau.label, "rule": tableau.rule_name})
    d = tableau.row_sum_defect()
    report.check("row_sums", d, d <= tol_rows, "max |A1 - c| <= tol", tol_rows)
    if tableau.rule_name.startswith("gauss"):
        d = verify_factorization(tableau.k, tableau.r)
        report.check("factorization", d, d <= tol_fact, "max |A - A_G P P^T Omega| <= tol",
                     tol_fact)
        if tableau.k == tableau.r:
            d = float(np.max(np.abs(tableau.A - gauss_reference(tableau.k))))
            report.check("gauss_coincidence", d, d <= tol_gauss, "max entry gap <= tol",
                         tol_gauss)
    return report


# ------------------------------------------------------------ plot scripts


def plot_script(report: ExperimentReport) -> str:
    """Matplotlib script that redraws the report's figures from its CSV files."""
    lines = [
        "import csv",
        "import matplotlib.pyplot as plt",
        "",
        "",
        "def load(name):",
        "    with open(name) as fh:",
        "        rows = list(csv.DictReader(fh))",
        "    return {k: [float(r[k]) if r[k] else float('nan') for r in rows] for k in rows[0]}",
        "",
        "",
    ]
    if report.name == "converge":
        lines += [
            "d = load('converge.csv')",
            "plt.loglog(d['h'], d['error'], 'o-')",
            "plt.xlabel('h'); plt.ylabel('error at t_end')",
            "plt.savefig('converge.png', dpi=150)",
        ]
    elif report.name == "drift":
        stems = [s for s in report.tables if not s.endswith("_trajectory")]
        lines += ["fig, (a1, a2) = plt.subplots(1, 2, figsize=(11, 4))"]
        for s in stems:
            lines += [
                f"d = load('{s}.csv')",
                f"a1.semilogy(d['t'], d['H_error'], label='{s}')",
                f"a2.loglog(d['t'], d['solution_error'], label='{s}')",
            ]
        lines += [
            "a1.set_xlabel('t'); a1.set_ylabel('|H - H0|'); a1.legend()",
            "a2.set_xlabel('t'); a2.set_ylabel('solution error'); a2.legend()",
            "fig.savefig('drift.png', dpi=150)",
        ]
    elif report.name == "stability":
        lines += [
            "import numpy as np",
            "d = load('stability_grid.csv')",
            "re, im, r = (np.array(d[k]) for k in ('re', 'im', 'absR'))",
            "n = len(set(d['re']))",
            "plt.contourf(re.reshape(-1, n), im.reshape(-1, n), r.reshape(-1, n), 30)",
            "plt.colorbar(label='|R(z)|'); plt.xlabel('Re z'); plt.ylabel('Im z')",
            "plt.savefig('stability.png', dpi=150)",
        ]
    elif report.name == "gamma":
        lines += [
            "d = load('gamma.csv')",
            "for j in sorted(set(d['j'])):",
            "    pts = [(h, g) for h, jj, g in zip(d['h'], d['j'], d['abs_gamma']) if jj == j]",
            "    plt.loglog(*zip(*pts), 'o-', label=f'j={int(j)}')",
            "plt.legend(); plt.xlabel('h'); plt.ylabel('|gamma_j|')",
            "plt.savefig('gamma.png', dpi=150)",
        ]
    return "\n".join(lines) + "\n"
