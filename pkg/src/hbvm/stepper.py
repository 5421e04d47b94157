"""One step of an implicit Runge-Kutta method.

The stage equations ``u_i = y0 + h sum_j a_ij f(u_j)`` are solved by
fixed-point iteration started from ``u_i = y0``.  A Newton variant is
available for stiff linear tests where the fixed-point map does not contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CollisionError, StageDivergenceError, ValidationError
from .problems import OdeSystem
from .tableau import ButcherTableau

DEFAULT_TOL = 1e-13
DEFAULT_MAX_ITER = 100


@dataclass
class StepResult:
    """Outcome of one stage solve; ``y1`` is ``None`` until :func:`step` fills it."""

    stages: np.ndarray
    iterations: int
    converged: bool
    residual: float
    y1: np.ndarray | None = None
    stage_derivatives: np.ndarray | None = None
    increment: np.ndarray | None = None


def _check_args(system: OdeSystem, y0, h: float, tol: float) -> np.ndarray:
    if not h > 0.0:
        raise ValidationError(f"stepsize must be positive, got {h}")
    if not tol > 0.0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    y0 = np.ascontiguousarray(y0, dtype=float)
    if y0.shape != (system.dim,):
        raise ValidationError(f"state has shape {y0.shape}, expected ({system.dim},)")
    return y0


def _fd_jacobian(rhs, y: np.ndarray) -> np.ndarray:
    m = y.size
    J = np.empty((m, m))
    for d in range(m):
        eps = 1e-7 * (1.0 + abs(y[d]))
        e = np.zeros(m)
        e[d] = eps
        J[:, d] = (rhs(y + e) - rhs(y - e)) / (2.0 * eps)
    return J


def _newton(A, y0, h, tol, max_iter, system):
    """Full Newton on the ``k*m`` stage system, Jacobians refreshed each iteration."""
    k, m = A.shape[0], y0.size
    jac = system.jacobian or (lambda y: _fd_jacobian(system.rhs, y))
    U = np.tile(y0, (k, 1))
    thresh = tol * (1.0 + np.max(np.abs(y0)))
    res = np.inf
    status = kernels.MAXITER
    it = 0
    eye = np.eye(k * m)
    try:
        while it < max_iter:
            it += 1
            F = system.rhs(U)
            G = U - y0 - h * (A @ F)
            blocks = np.stack([jac(U[j]) for j in range(k)])  # k x m x m
            M = eye - h * np.einsum("ij,jab->iajb", A, blocks).reshape(k * m, k * m)
            dU = np.linalg.solve(M, -G.ravel()).reshape(k, m)
            if not np.all(np.isfinite(dU)):
                return U, None, it, kernels.NONFINITE, np.inf
            U = U + dU
            res = float(np.max(np.abs(dU)))
            if res <= thresh:
                status = kernels.CONVERGED
                break
        F = system.rhs(U)
    except CollisionError:
        return U, None, it, kernels.COLLISION, res
    except np.linalg.LinAlgError:
        return U, None, it, kernels.NONFINITE, np.inf
    return U, F, it, status, res


def solve_stages(tableau: ButcherTableau, system: OdeSystem, y0, h: float,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 solver: str = "fixed-point", backend: str | None = None) -> StepResult:
    """Solve the stage equations for one step of size ``h`` from ``y0``.

    Convergence is declared when the largest stage increment, in the infinity
    norm, drops to ``tol * (1 + |y0|_inf)``.  Running out of iterations gives
    a result with ``converged=False``; non-finite stages raise
    :class:`StageDivergenceError` and stages hitting the Kepler singularity
    raise :class:`CollisionError`.
    """
    y0 = _check_args(system, y0, h, tol)
    A = np.ascontiguousarray(tableau.A)
    if solver == "fixed-point":
        U, F, it, status, res = kernels.fixed_point(A, y0, h, tol, max_iter, system, backend)
    elif solver == "newton":
        U, F, it, status, res = _newton(A, y0, h, tol, max_iter, system)
    else:
        raise ValidationError(f"unknown stage solver {solver!r}")
    if status == kernels.NONFINITE:
        raise StageDivergenceError(f"non-finite stage values after {it} iterations (h={h:g})")
    if status == kernels.COLLISION:
        raise CollisionError(f"stage reached the collision radius (h={h:g})")
    return StepResult(stages=U, iterations=it, converged=status == kernels.CONVERGED,
                      residual=res, stage_derivatives=F)


def step(tableau: ButcherTableau, system: OdeSystem, y0, h: float,
         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
         solver: str = "fixed-point", backend: str | None = None) -> StepResult:
    """Advance one step: ``y1 = y0 + h sum_l b_l f(u_l)``."""
    res = solve_stages(tableau, system, y0, h, tol, max_iter, solver, backend)
    y0 = np.asarray(y0, dtype=float)
    res.increment = h * (tableau.b @ res.stage_derivatives)
    res.y1 = y0 + res.increment
    return res


def step_polynomial(tableau: ButcherTableau, result: StepResult, y0, h: float):
    """The degree-r polynomial ``u(t0 + tau h)`` behind a converged HBVM step.

    Returns a callable of ``tau`` (scalar or array) giving states along the
    step; valid for tableaus built by :func:`~hbvm.tableau.build_hbvm`.
    """
    from .basis import antiderivative_table, legendre_table

    y0 = np.asarray(y0, dtype=float)
    P = legendre_table(tableau.r - 1, tableau.c)  # r x k
    coeffs = (P * tableau.b[None, :]) @ result.stage_derivatives  # r x m

    def u(tau):
        I = antiderivative_table(tableau.r - 1, tau)  # r x ...
        return y0 + h * np.tensordot(np.moveaxis(I, 0, -1), coeffs, axes=1)

    return u
