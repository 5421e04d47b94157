"""Pure-Python stage iteration, used when the compiled kernel is unavailable."""

import numpy as np

from .errors import CollisionError

CONVERGED, MAXITER, NONFINITE, COLLISION = 0, 1, 2, 3


def fixed_point(A, y0, h, tol, max_iter, rhs):
    """Iterate ``U <- y0 + h A f(U)`` from ``U = y0``.

    Returns ``(U, F, iterations, status, residual)`` with ``F = f(U)`` at the
    returned stages.
    """
    k = A.shape[0]
    U = np.tile(y0, (k, 1))
    thresh = tol * (1.0 + np.max(np.abs(y0)))
    hA = h * A
    res = np.inf
    status = MAXITER
    it = 0
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            while it < max_iter:
                it += 1
                U_new = y0 + hA @ rhs(U)
                if not np.all(np.isfinite(U_new)):
                    return U_new, None, it, NONFINITE, np.inf
                res = float(np.max(np.abs(U_new - U)))
                U = U_new
                if res <= thresh:
                    status = CONVERGED
                    break
            F = rhs(U)
        except CollisionError:
            return U, None, it, COLLISION, res
    if not np.all(np.isfinite(F)):
        return U, F, it, NONFINITE, np.inf
    return U, F, it, status, res
