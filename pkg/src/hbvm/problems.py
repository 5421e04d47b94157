"""ODE systems and the built-in test problems.

Right-hand sides act on the last axis, so ``rhs(Y)`` with ``Y`` of shape
``(k, m)`` evaluates all stages at once.  Hamiltonian states are ordered
``(q_1..q_n, p_1..p_n)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CollisionError, DomainError, ValidationError

# Identifiers understood by the compiled stage kernel.
KERNEL_KEPLER = 1
KERNEL_QUARTIC = 2
KERNEL_LINEAR = 3

COLLISION_RADIUS = 1e-8


@dataclass
class OdeSystem:
    """Autonomous system ``y' = rhs(y)`` of dimension ``dim``."""

    dim: int
    rhs: Callable[[np.ndarray], np.ndarray]
    name: str = "ode"
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    # (kernel id, parameter vector) when the compiled kernel can evaluate rhs
    kernel: tuple[int, np.ndarray] | None = field(default=None, repr=False)
    exact: Callable[[float], np.ndarray] | None = field(default=None, repr=False)
    y0: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, y):
        return self.rhs(y)

    def lyapunov(self, y) -> np.ndarray:
        """V(y) = y.y / 2."""
        y = np.asarray(y, dtype=float)
        return 0.5 * np.sum(y * y, axis=-1)


def canonical_J(dim: int) -> np.ndarray:
    n = dim // 2
    J = np.zeros((dim, dim))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def _symplectic(g: np.ndarray) -> np.ndarray:
    n = g.shape[-1] // 2
    return np.concatenate([g[..., n:], -g[..., :n]], axis=-1)


class HamiltonianSystem(OdeSystem):
    """Canonical system ``y' = J grad H(y)``."""

    def __init__(self, dim: int, H, grad_H, name: str = "hamiltonian",
                 degree: int | None = None, kernel=None, exact=None, jacobian=None):
        if dim % 2:
            raise ValidationError("Hamiltonian systems need an even dimension")
        self.H = H
        self.grad_H = grad_H
        self.degree = degree
        super().__init__(dim=dim, rhs=lambda y: _symplectic(grad_H(y)), name=name,
                         jacobian=jacobian, kernel=kernel, exact=exact)

    @property
    def J(self) -> np.ndarray:
        return canonical_J(self.dim)

    def energy(self, y):
        return self.H(y)


# ---------------------------------------------------------------- Kepler


def kepler_initial(e: float) -> np.ndarray:
    """Pericenter state ``(1 - e, 0, 0, sqrt((1 + e)/(1 - e)))`` of the orbit with eccentricity e."""
    if not (0.0 <= e < 1.0):
        raise DomainError(f"eccentricity must lie in [0, 1), got {e}")
    return np.array([1.0 - e, 0.0, 0.0, math.sqrt((1.0 + e) / (1.0 - e))])


def _radius(y: np.ndarray) -> np.ndarray:
    rad = np.hypot(y[..., 0], y[..., 1])
    if np.any(rad < COLLISION_RADIUS):
        raise CollisionError("Kepler state within collision radius of the origin")
    return rad


def kepler_energy(y) -> float | np.ndarray:
    """H = (p1^2 + p2^2)/2 - 1/|q|."""
    y = np.asarray(y, dtype=float)
    rad = _radius(y)
    out = 0.5 * (y[..., 2] ** 2 + y[..., 3] ** 2) - 1.0 / rad
    return float(out) if out.ndim == 0 else out


def kepler_grad(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    rad = _radius(y)
    g = np.empty(y.shape)
    inv3 = 1.0 / rad**3
    g[..., 0] = y[..., 0] * inv3
    g[..., 1] = y[..., 1] * inv3
    g[..., 2] = y[..., 2]
    g[..., 3] = y[..., 3]
    return g


def eccentric_anomaly(M: float, e: float, tol: float = 1e-14, max_iter: int = 100) -> float:
    """Solve Kepler's equation ``E - e sin E = M`` by Newton's method."""
    M = math.fmod(M, 2.0 * math.pi)
    E = M if e < 0.8 else math.pi
    for _ in range(max_iter):
        dE = (E - e * math.sin(E) - M) / (1.0 - e * math.cos(E))
        E -= dE
        if abs(dE) <= tol:
            return E
    raise RuntimeError(f"Kepler equation did not converge for M={M}, e={e}")


def kepler_exact(t: float, e: float) -> np.ndarray:
    """Analytic state at time t for the orbit started at :func:`kepler_initial`."""
    E = eccentric_anomaly(t, e)
    cE, sE = math.cos(E), math.sin(E)
    s = math.sqrt(1.0 - e * e)
    den = 1.0 - e * cE
    return np.array([cE - e, s * sE, -sE / den, s * cE / den])


def kepler(e: float = 0.6) -> HamiltonianSystem:
    kepler_initial(e)
    sysm = HamiltonianSystem(4, kepler_energy, kepler_grad, name=f"kepler:e={e:g}",
                             kernel=(KERNEL_KEPLER, np.zeros(1)),
                             exact=lambda t: kepler_exact(t, e))
    sysm.eccentricity = e
    sysm.y0 = kepler_initial(e)
    sysm.period = 2.0 * math.pi
    return sysm


# -------------------------------------------------------- linear test


@dataclass
class LinearTestProblem:
    """``x' = [[alpha, -beta], [beta, alpha]] x``, the real form of ``y' = lambda y``."""

    alpha: float
    beta: float

    @property
    def lam(self) -> complex:
        return complex(self.alpha, self.beta)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, -self.beta], [self.beta, self.alpha]])

    def system(self, y0=(1.0, 0.0)) -> OdeSystem:
        M = self.matrix
        y0 = np.asarray(y0, dtype=float)
        lam = self.lam

        def exact(t):
            w = complex(y0[0], y0[1]) * np.exp(lam * t)
            return np.array([w.real, w.imag])

        sysm = OdeSystem(2, lambda y: np.asarray(y) @ M.T,
                         name=f"test:alpha={self.alpha:g},beta={self.beta:g}",
                         jacobian=lambda y: M,
                         kernel=(KERNEL_LINEAR, np.array([self.alpha, self.beta])),
                         exact=exact)
        sysm.y0 = y0
        return sysm


def linear_test(alpha: float = -1.0, beta: float = 10.0) -> OdeSystem:
    return LinearTestProblem(alpha, beta).system()


# ----------------------------------------------- polynomial Hamiltonians


class PolynomialHamiltonian(HamiltonianSystem):
    """Polynomial ``H(q, p) = sum coeffs[(i, j)] q^i p^j`` in one degree of freedom."""

    def __init__(self, coeffs: dict[tuple[int, int], float], name: str = "polynomial",
                 kernel=None):
        self.coeffs = {tuple(key): float(v) for key, v in coeffs.items() if v != 0.0}
        degree = max(i + j for i, j in self.coeffs)
        super().__init__(2, self._H, self._grad, name=name, degree=degree, kernel=kernel)

    def _H(self, y):
        y = np.asarray(y, dtype=float)
        q, p = y[..., 0], y[..., 1]
        out = sum(c * q**i * p**j for (i, j), c in self.coeffs.items())
        return float(out) if np.ndim(out) == 0 else out

    def _grad(self, y):
        y = np.asarray(y, dtype=float)
        q, p = y[..., 0], y[..., 1]
        g = np.zeros(y.shape)
        for (i, j), c in self.coeffs.items():
            if i:
                g[..., 0] += c * i * q ** (i - 1) * p**j
            if j:
                g[..., 1] += c * j * q**i * p ** (j - 1)
        return g


def quartic_oscillator() -> PolynomialHamiltonian:
    """H = p^2/2 + q^4/4."""
    sysm = PolynomialHamiltonian({(0, 2): 0.5, (4, 0): 0.25}, name="quartic",
                                 kernel=(KERNEL_QUARTIC, np.zeros(1)))
    sysm.y0 = np.array([1.0, 0.0])
    return sysm


def constant_system(v) -> OdeSystem:
    """``y' = v``; with ``v = 0`` this is the trivial system."""
    v = np.asarray(v, dtype=float)
    sysm = OdeSystem(v.size, lambda y: np.broadcast_to(v, np.shape(y)).copy(),
                     name="constant", jacobian=lambda y: np.zeros((v.size, v.size)),
                     exact=None)
    sysm.y0 = np.zeros(v.size)
    return sysm


# ------------------------------------------------------------ spec strings

_ITEM = re.compile(r"\s*([A-Za-z_]\w*)\s*=\s*([^,]+)\s*")


def parse_params(text: str) -> dict[str, str]:
    """``"k=3,r=2"`` -> ``{"k": "3", "r": "2"}``."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        m = _ITEM.fullmatch(item)
        if not m:
            raise ValidationError(f"malformed parameter {item!r}")
        out[m.group(1)] = m.group(2).strip()
    return out


def problem_from_spec(spec: str) -> OdeSystem:
    """Build a problem from ``kepler:e=0.6``, ``test:alpha=-1,beta=10`` or ``quartic``."""
    name, _, rest = spec.partition(":")
    params = parse_params(rest)
    try:
        if name == "kepler":
            _only(params, {"e"})
            return kepler(float(params.get("e", 0.6)))
        if name == "test":
            _only(params, {"alpha", "beta"})
            return linear_test(float(params.get("alpha", -1.0)), float(params.get("beta", 10.0)))
        if name == "quartic":
            _only(params, set())
            return quartic_oscillator()
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad problem spec {spec!r}: {exc}") from exc
    raise ValidationError(f"unknown problem {name!r}")


def _only(params: dict, allowed: set) -> None:
    extra = set(params) - allowed
    if extra:
        raise ValidationError(f"unknown parameters {sorted(extra)}")
