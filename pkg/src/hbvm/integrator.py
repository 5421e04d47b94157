"""Fixed and adaptive time marching.

The adaptive driver estimates the local error by step doubling and picks
the next stepsize with

    h_new = safety * h * (Tol / err) ** (1 / (p + 1)),   safety = 0.7,

clamped to ``[h_min, min(h_max, facmax * h)]``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CollisionError,
    StageConvergenceError,
    StageDivergenceError,
    StepsizeUnderflowError,
    ValidationError,
)
from .problems import HamiltonianSystem, OdeSystem
from .stepper import DEFAULT_MAX_ITER, DEFAULT_TOL, step
from .tableau import ButcherTableau


@dataclass
class StepRecord:
    t: float
    h: float
    iterations: int
    accepted: bool
    err: float = math.nan


@dataclass
class Trajectory:
    """Grid, states and per-step diagnostics of one integration.

    ``step_stats`` holds every attempted step, rejected ones included; the
    ``h``/``err``/``iterations`` arrays are aligned with the accepted grid
    points (entry 0 belongs to the initial state and is NaN / 0).
    """

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    H_values: list | None = None
    V_values: list = field(default_factory=list)
    h_values: list = field(default_factory=list)
    err_values: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    step_stats: list = field(default_factory=list)
    system_name: str = ""

    def _append(self, system, t, y, h=math.nan, err=math.nan, iterations=0):
        self.times.append(float(t))
        self.states.append(np.array(y, dtype=float))
        if self.H_values is not None:
            self.H_values.append(float(system.H(y)))
        self.V_values.append(float(system.lyapunov(y)))
        self.h_values.append(float(h))
        self.err_values.append(float(err))
        self.iterations.append(int(iterations))

    @classmethod
    def start(cls, system: OdeSystem, t0: float, y0) -> "Trajectory":
        traj = cls(H_values=[] if isinstance(system, HamiltonianSystem) else None,
                   system_name=system.name)
        traj._append(system, t0, y0)
        return traj

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.states)

    @property
    def H(self) -> np.ndarray | None:
        return None if self.H_values is None else np.asarray(self.H_values)

    @property
    def V(self) -> np.ndarray:
        return np.asarray(self.V_values)

    @property
    def n_accepted(self) -> int:
        return sum(1 for s in self.step_stats if s.accepted)

    @property
    def n_rejected(self) -> int:
        return sum(1 for s in self.step_stats if not s.accepted)

    def to_csv(self, diagnostics: bool = True) -> str:
        """CSV text, header ``t,y_1..y_m[,H],V,h,err,accepted`` with 17 significant digits."""
        return trajectory_to_csv(self, diagnostics)


def _f17(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_to_csv(traj: Trajectory, diagnostics: bool = True) -> str:
    m = len(traj.states[0])
    cols = ["t"] + [f"y_{i + 1}" for i in range(m)]
    if diagnostics:
        if traj.H_values is not None:
            cols.append("H")
        cols += ["V", "h", "err", "accepted"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for n, (t, y) in enumerate(zip(traj.times, traj.states)):
        row = [_f17(t)] + [_f17(v) for v in y]
        if diagnostics:
            if traj.H_values is not None:
                row.append(_f17(traj.H_values[n]))
            row.append(_f17(traj.V_values[n]))
            if n == 0:
                row += ["", "", ""]
            else:
                err = traj.err_values[n]
                row += [_f17(traj.h_values[n]), "" if math.isnan(err) else _f17(err), "1"]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def integrate_fixed(tableau: ButcherTableau, system: OdeSystem, y0, h: float, n_steps: int,
                    t0: float = 0.0, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, solver: str = "fixed-point",
                    backend: str | None = None) -> Trajectory:
    """``n_steps`` constant steps of size ``h``.

    Increments are accumulated with compensated summation so that rounding
    does not swamp high-order errors over long runs.
    A stage solve that does not converge raises :class:`StageConvergenceError`
    carrying the step index and the trajectory computed so far.
    """
    if not h > 0.0:
        raise ValidationError(f"stepsize must be positive, got {h}")
    if n_steps < 1:
        raise ValidationError(f"n_steps must be >= 1, got {n_steps}")
    traj = Trajectory.start(system, t0, y0)
    y = np.asarray(y0, dtype=float)
    carry = np.zeros_like(y)
    for n in range(n_steps):
        t = t0 + n * h
        try:
            res = step(tableau, system, y, h, tol, max_iter, solver, backend)
        except (StageDivergenceError, CollisionError) as exc:
            raise StageConvergenceError(f"step {n} failed: {exc}", step_index=n,
                                        partial=traj) from exc
        if not res.converged:
            raise StageConvergenceError(
                f"stage iteration did not converge at step {n} (t={t:g}, "
                f"residual={res.residual:.3g})", step_index=n, partial=traj)
        inc = res.increment + carry
        y_next = y + inc
        carry = inc - (y_next - y)
        y = y_next
        traj.step_stats.append(StepRecord(t, h, res.iterations, True))
        traj._append(system, t0 + (n + 1) * h, y, h=h, iterations=res.iterations)
    return traj


def estimate_local_error(tableau: ButcherTableau, system: OdeSystem, y0, h: float,
                         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                         backend: str | None = None, p: int | None = None):
    """Richardson step-doubling estimate.

    Returns ``(err, y_fine, iterations)`` where ``y_fine`` is the result of two
    half steps and ``err = |y_fine - y_coarse|_inf / (2**p - 1)``.  Raises
    :class:`StageConvergenceError` when any of the three stage solves stalls.
    """
    p = tableau.p if p is None else p
    coarse = step(tableau, system, y0, h, tol, max_iter, backend=backend)
    half1 = step(tableau, system, y0, 0.5 * h, tol, max_iter, backend=backend)
    half2 = step(tableau, system, half1.y1, 0.5 * h, tol, max_iter, backend=backend)
    if not (coarse.converged and half1.converged and half2.converged):
        raise StageConvergenceError(f"stage iteration did not converge (h={h:g})")
    err = float(np.max(np.abs(half2.y1 - coarse.y1))) / (2.0**p - 1.0)
    return err, half2.y1, coarse.iterations + half1.iterations + half2.iterations


@dataclass
class AdaptiveConfig:
    """Controller settings; ``p`` defaults to the tableau's order when ``None``."""

    tol: float = 1e-10
    safety: float = 0.7
    p: int | None = None
    h_init: float = 1e-2
    h_min: float = 1e-12
    h_max: float = 1.0
    facmax: float = 5.0
    stage_tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValidationError("Tol must be positive")
        if not 0.0 < self.safety < 1.0:
            raise ValidationError("safety factor must lie in (0, 1)")
        if not 0.0 < self.h_min <= self.h_init <= self.h_max:
            raise ValidationError("need 0 < h_min <= h_init <= h_max")
        if not self.facmax > 1.0:
            raise ValidationError("facmax must exceed 1")


def propose_stepsize(h: float, err: float, tol: float, p: int, safety: float = 0.7,
                     facmax: float = 5.0, h_max: float = math.inf) -> float:
    """``safety * h * (tol / err) ** (1 / (p + 1))`` capped at ``min(h_max, facmax * h)``.

    ``err == 0`` gives the cap directly.
    """
    cap = min(h_max, facmax * h)
    if err <= 0.0:
        return cap
    return min(cap, safety * h * (tol / err) ** (1.0 / (p + 1)))


def integrate_adaptive(tableau: ButcherTableau, system: OdeSystem, y0, t_end: float,
                       config: AdaptiveConfig | None = None, t0: float = 0.0,
                       checkpoints=None, backend: str | None = None) -> Trajectory:
    """Variable-step integration from ``t0`` to ``t_end``.

    Steps are shortened so that the trajectory passes exactly through every
    time in ``checkpoints`` and ends on ``t_end``; the controller keeps
    working from the untruncated proposal.  Failed stage solves count as
    rejections with the step halved.
    """
    config = config or AdaptiveConfig()
    if not t_end > t0:
        raise ValidationError("t_end must exceed t0")
    p = tableau.p if config.p is None else config.p
    stops = sorted(float(s) for s in (checkpoints or []) if t0 < s < t_end) + [float(t_end)]
    traj = Trajectory.start(system, t0, y0)
    y = np.asarray(y0, dtype=float)
    t = float(t0)
    h = config.h_init
    si = 0
    while si < len(stops):
        target = stops[si]
        h_try = h
        landing = target - (t + h_try) < 1e-3 * h_try
        if landing:
            h_try = target - t
        try:
            err, y_new, iters = estimate_local_error(
                tableau, system, y, h_try, config.stage_tol, config.max_iter, backend, p=p)
        except (StageConvergenceError, StageDivergenceError, CollisionError):
            traj.step_stats.append(StepRecord(t, h_try, 0, False, math.inf))
            h = 0.5 * h_try
            if h < config.h_min:
                raise StepsizeUnderflowError(
                    f"stage failures drove h below h_min at t={t:.17g}", t=t, h=h,
                    partial=traj) from None
            continue
        h_new = propose_stepsize(h_try, err, config.tol, p, config.safety, config.facmax,
                                 config.h_max)
        if err <= config.tol:
            traj.step_stats.append(StepRecord(t, h_try, iters, True, err))
            y = y_new
            t = target if landing else t + h_try
            traj._append(system, t, y, h=h_try, err=err, iterations=iters)
            if landing:
                si += 1
                # a truncated landing step says nothing about the natural size
                h_new = max(h_new, h)
        else:
            traj.step_stats.append(StepRecord(t, h_try, iters, False, err))
        if h_new < config.h_min:
            raise StepsizeUnderflowError(
                f"stepsize {h_new:.3g} below h_min={config.h_min:g} at t={t:.17g}",
                t=t, h=h_new, partial=traj)
        h = h_new
    return traj
