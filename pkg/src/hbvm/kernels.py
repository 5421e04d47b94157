"""Backend selection for the stage iteration.

The compiled extension is used when it imports and the system declares a
built-in right-hand side; set ``HBVM_BACKEND=python`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

CONVERGED = _pykernels.CONVERGED
MAXITER = _pykernels.MAXITER
NONFINITE = _pykernels.NONFINITE
COLLISION = _pykernels.COLLISION

HAVE_COMPILED = _ckernels is not None


def default_backend() -> str:
    env = os.environ.get("HBVM_BACKEND", "").strip().lower()
    if env in ("python", "compiled"):
        if env == "compiled" and not HAVE_COMPILED:
            raise ImportError("HBVM_BACKEND=compiled but the extension is not built")
        return env
    return "compiled" if HAVE_COMPILED else "python"


def fixed_point(A, y0, h, tol, max_iter, system, backend=None):
    backend = backend or default_backend()
    if backend == "compiled" and system.kernel is not None and _ckernels.supported(system.kernel[0]):
        kind, params = system.kernel
        params = np.ascontiguousarray(params, dtype=float)
        return _ckernels.fixed_point(A, y0, h, tol, max_iter, kind, params)
    return _pykernels.fixed_point(A, y0, h, tol, max_iter, system.rhs)
