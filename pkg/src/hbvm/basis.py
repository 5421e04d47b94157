"""Shifted Legendre basis on [0, 1] and quadrature rules.

The polynomials are normalized so that ``int_0^1 P_i P_j dx = delta_ij``:

    P_j(x) = sqrt(2j + 1) * L_j(2x - 1)

with ``L_j`` the classical Legendre polynomial on [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError

#: Largest degree accepted by the scalar queries.
MAX_DEGREE = 200

_NEWTON_TOL = 1e-15
_NEWTON_MAXITER = 100
_ORDER_DETECT_TOL = 1e-10


def _check_degree(j: int, max_degree: int = MAX_DEGREE) -> None:
    if not isinstance(j, (int, np.integer)) or j < 0 or j > max_degree:
        raise DomainError(f"degree {j!r} outside supported range [0, {max_degree}]")


def _check_unit(x, name: str = "x") -> None:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")


def _legendre_std(n: int, t: np.ndarray) -> np.ndarray:
    """Classical Legendre values L_0..L_n at t, shape ``(n + 1,) + t.shape``."""
    out = np.empty((n + 1,) + t.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = t
    for m in range(1, n):
        out[m + 1] = ((2 * m + 1) * t * out[m] - m * out[m - 1]) / (m + 1)
    return out


def legendre_table(n: int, x) -> np.ndarray:
    """Orthonormal shifted Legendre values P_0..P_n at the points ``x``.

    Returns an array of shape ``(n + 1,) + np.shape(x)``.
    """
    _check_degree(n, max_degree=10**6)
    x = np.asarray(x, dtype=float)
    vals = _legendre_std(n, 2.0 * x - 1.0)
    scale = np.sqrt(2.0 * np.arange(n + 1) + 1.0)
    return vals * scale.reshape((-1,) + (1,) * x.ndim)


def antiderivative_table(n: int, c) -> np.ndarray:
    """Integrals ``int_0^c P_j(x) dx`` for j = 0..n, shape ``(n + 1,) + np.shape(c)``.

    Uses ``(2j + 1) L_j = (L_{j+1} - L_{j-1})'`` so the values are exact up to
    rounding; the boundary term at x = 0 vanishes for j >= 1.
    """
    _check_degree(n, max_degree=10**6)
    c = np.asarray(c, dtype=float)
    vals = _legendre_std(n + 1, 2.0 * c - 1.0)
    out = np.empty((n + 1,) + c.shape)
    out[0] = c
    for j in range(1, n + 1):
        out[j] = (vals[j + 1] - vals[j - 1]) / (2.0 * math.sqrt(2.0 * j + 1.0))
    return out


def legendre_eval(j: int, x: float) -> float:
    """Value of the orthonormal shifted Legendre polynomial of degree ``j`` at ``x``."""
    _check_degree(j)
    _check_unit(x)
    return float(legendre_table(j, x)[j])


def legendre_antiderivative(j: int, c: float) -> float:
    """``int_0^c P_j(x) dx`` for ``c`` in [0, 1]."""
    _check_degree(j)
    _check_unit(c, "c")
    return float(antiderivative_table(j, c)[j])


@dataclass(frozen=True)
class OrthonormalBasis:
    """Shifted Legendre polynomials P_0..P_max_degree on [0, 1]."""

    max_degree: int

    def __post_init__(self):
        if self.max_degree < 0:
            raise ValidationError("max_degree must be nonnegative")

    def eval(self, j: int, x: float) -> float:
        _check_degree(j, self.max_degree)
        return legendre_eval(j, x)

    def antiderivative(self, j: int, c: float) -> float:
        _check_degree(j, self.max_degree)
        return legendre_antiderivative(j, c)

    def table(self, x) -> np.ndarray:
        return legendre_table(self.max_degree, x)

    def antiderivatives(self, c) -> np.ndarray:
        return antiderivative_table(self.max_degree, c)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on [0, 1]: ``int_0^1 g ~ sum_i weights[i] * g(nodes[i])``.

    ``order`` is q such that every polynomial of degree < q is integrated exactly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> np.ndarray:
        """Apply the rule to samples at the nodes (first axis indexes the nodes)."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))


def _monomial_errors(nodes: np.ndarray, weights: np.ndarray, dmax: int) -> np.ndarray:
    d = np.arange(dmax + 1)
    approx = (weights[None, :] * nodes[None, :] ** d[:, None]).sum(axis=1)
    return np.abs(approx - 1.0 / (d + 1.0))


def detect_order(nodes, weights, tol: float = _ORDER_DETECT_TOL) -> int:
    """Largest q with ``x**d`` integrated to within ``tol`` for all d < q."""
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    # an n-point rule cannot be exact beyond degree 2n - 1
    errs = _monomial_errors(nodes, weights, 2 * len(nodes) + 1)
    bad = np.nonzero(errs > tol)[0]
    return int(bad[0]) if bad.size else len(errs)


def custom_rule(nodes, weights, name: str = "custom") -> QuadratureRule:
    """Validate a user rule on [0, 1] and certify its order empirically."""
    nodes = np.asarray(nodes, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if nodes.size == 0 or nodes.size != weights.size:
        raise ValidationError("nodes and weights must be nonempty and of equal length")
    if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
        raise ValidationError("nodes and weights must be finite")
    if np.any(nodes < 0.0) or np.any(nodes > 1.0):
        raise ValidationError("nodes must lie in [0, 1]")
    if np.any(np.diff(nodes) <= 0.0):
        raise ValidationError("nodes must be strictly increasing")
    if np.any(weights <= 0.0):
        raise ValidationError("weights must be positive")
    return QuadratureRule(nodes, weights, detect_order(nodes, weights), name=name)


def gauss_rule(k: int) -> QuadratureRule:
    """k-point Gauss-Legendre rule on [0, 1], order 2k.

    Newton iteration on L_k from Chebyshev-type initial guesses; only the
    nodes in (1/2, 1] are iterated and the rest are mirrored, so the rule is
    symmetric about 1/2 by construction.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValidationError(f"gauss_rule needs k >= 1, got {k!r}")
    half = k // 2 + k % 2
    i = np.arange(1, half + 1)
    t = np.cos(np.pi * (i - 0.25) / (k + 0.5))
    done = np.zeros(half, dtype=bool)
    for _ in range(_NEWTON_MAXITER):
        vals = _legendre_std(k, t)
        lk, lkm1 = vals[k], vals[k - 1]
        dp = k * (lkm1 - t * lk) / (1.0 - t * t)
        dt = lk / dp
        t = np.where(done, t, t - dt)
        done |= np.abs(dt) <= _NEWTON_TOL
        if done.all():
            break
    else:
        raise AssertionError(f"Gauss-Legendre node iteration did not converge for k={k}")
    if k % 2:
        t[-1] = 0.0
    # derivative at the converged nodes for the weights
    vals = _legendre_std(k, t)
    dp = k * (vals[k - 1] - t * vals[k]) / (1.0 - t * t)
    w = 1.0 / ((1.0 - t * t) * dp * dp)  # half of the [-1, 1] weight

    upper = 0.5 + 0.5 * t  # descending, in [1/2, 1)
    lower = 0.5 - 0.5 * t
    if k % 2:
        nodes = np.concatenate([lower, upper[-2::-1]])
        weights = np.concatenate([w, w[-2::-1]])
    else:
        nodes = np.concatenate([lower, upper[::-1]])
        weights = np.concatenate([w, w[::-1]])
    return QuadratureRule(nodes, weights, 2 * k, name=f"gauss{k}")


def lobatto_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Lobatto rule on [0, 1] (endpoints included), order 2n - 2."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValidationError(f"lobatto_rule needs n >= 2, got {n!r}")
    interior = np.polynomial.legendre.Legendre.basis(n - 1).deriv().roots()
    t = np.concatenate([[-1.0], np.sort(interior.real), [1.0]])
    t = 0.5 * (t - t[::-1])  # enforce symmetry
    lv = _legendre_std(n - 1, t)[n - 1]
    w = 1.0 / (n * (n - 1) * lv * lv)
    w = 0.5 * (w + w[::-1])
    return custom_rule(0.5 + 0.5 * t, w, name=f"lobatto{n}")
