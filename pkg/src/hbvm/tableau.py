"""HBVM(k, r) Butcher tableaus and their linear stability function."""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass, field

import numpy as np

from .basis import QuadratureRule, antiderivative_table, gauss_rule, legendre_table
from .errors import ValidationError

#: Returned by :func:`stability_value` when ``I - zA`` is singular.
POLE = complex(cmath.inf, 0.0)

_POLE_THRESHOLD = 1e-300


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta coefficients plus the HBVM parameters that produced them.

    ``p`` is the order claimed by the construction, ``min(q, 2r)`` with ``q``
    the order of the underlying quadrature rule.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    k: int
    r: int
    p: int
    rule_order: int
    rule_name: str = field(default="custom", compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        if A.shape != (self.k, self.k) or b.shape != (self.k,) or c.shape != (self.k,):
            raise ValidationError("tableau dimensions are inconsistent with k")
        if np.any(np.diff(c) <= 0.0):
            raise ValidationError("tableau nodes must be strictly increasing")
        for a in (A, b, c):
            a.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def label(self) -> str:
        return f"HBVM({self.k},{self.r})"

    def row_sum_defect(self) -> float:
        return float(np.max(np.abs(self.A.sum(axis=1) - self.c)))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "r": self.r,
            "p": self.p,
            "rule_order": self.rule_order,
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "A": self.A.tolist(),
        }

    def to_json(self) -> str:
        return tableau_to_json(self)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def tableau_to_json(tab: ButcherTableau, indent: int = 2) -> str:
    """JSON text with every real printed to 17 significant digits."""
    pad = " " * indent
    vec = lambda v: "[" + ", ".join(_fmt(x) for x in v) + "]"  # noqa: E731
    rows = (",\n" + pad * 2).join(vec(row) for row in tab.A)
    return (
        "{\n"
        f'{pad}"k": {tab.k},\n'
        f'{pad}"r": {tab.r},\n'
        f'{pad}"p": {tab.p},\n'
        f'{pad}"rule_order": {tab.rule_order},\n'
        f'{pad}"c": {vec(tab.c)},\n'
        f'{pad}"b": {vec(tab.b)},\n'
        f'{pad}"A": [\n{pad * 2}{rows}\n{pad}]\n'
        "}"
    )


def tableau_from_json(text: str) -> ButcherTableau:
    d = json.loads(text)
    return ButcherTableau(
        np.array(d["A"]), np.array(d["b"]), np.array(d["c"]),
        k=int(d["k"]), r=int(d["r"]), p=int(d["p"]), rule_order=int(d["rule_order"]),
    )


def build_hbvm(k: int, r: int, rule: QuadratureRule | None = None) -> ButcherTableau:
    """Tableau of HBVM(k, r) on the nodes of ``rule`` (Gauss by default).

    ``a_ij = b_j * sum_{l < r} P_l(c_j) * int_0^{c_i} P_l``.
    """
    if rule is None:
        rule = gauss_rule(k)
    if r < 1 or k < 1:
        raise ValidationError(f"need k >= 1 and r >= 1, got k={k}, r={r}")
    if k < r:
        raise ValidationError(f"HBVM(k, r) needs k >= r, got k={k}, r={r}")
    if rule.size != k:
        raise ValidationError(f"rule has {rule.size} nodes but k={k}")
    if rule.order < k:
        raise ValidationError(f"rule order {rule.order} is below k={k}")
    c, b = rule.nodes, rule.weights
    P = legendre_table(r - 1, c).T  # k x r, P[i, l] = P_l(c_i)
    I = antiderivative_table(r - 1, c).T  # k x r, I[i, l] = int_0^{c_i} P_l
    A = (I @ P.T) * b[None, :]
    return ButcherTableau(A, b, c, k=k, r=r, p=min(rule.order, 2 * r),
                          rule_order=rule.order, rule_name=rule.name)


def gauss_collocation(s: int) -> ButcherTableau:
    """s-stage Gauss collocation method, i.e. HBVM(s, s) on Gauss nodes."""
    return build_hbvm(s, s, gauss_rule(s))


def verify_factorization(k: int, r: int) -> float:
    """Max entrywise gap between HBVM(k, r) and ``A_gauss P P^T Omega``."""
    rule = gauss_rule(k)
    tab = build_hbvm(k, r, rule)
    A_gauss = gauss_collocation(k).A
    P = legendre_table(r - 1, rule.nodes).T
    prod = A_gauss @ P @ P.T @ np.diag(rule.weights)
    return float(np.max(np.abs(tab.A - prod)))


def stability_value(tab: ButcherTableau, z: complex) -> complex:
    """R(z) = 1 + z b^T (I - zA)^{-1} 1, or :data:`POLE` at a singularity."""
    z = complex(z)
    if z == 0:
        return 1.0 + 0.0j
    M = np.eye(tab.k, dtype=complex) - z * tab.A
    scale = np.max(np.abs(M)) ** tab.k
    try:
        det = np.linalg.det(M)
        if not np.isfinite(det) or abs(det) <= _POLE_THRESHOLD * max(scale, 1.0):
            return POLE
        x = np.linalg.solve(M, np.ones(tab.k, dtype=complex))
    except np.linalg.LinAlgError:
        return POLE
    return complex(1.0 + z * (tab.b @ x))


def is_pole(value: complex) -> bool:
    return cmath.isinf(value)


@dataclass
class StabilityFunction:
    """Callable wrapper around :func:`stability_value` with an optional cache."""

    tableau: ButcherTableau
    cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, z: complex) -> complex:
        z = complex(z)
        if z not in self.cache:
            self.cache[z] = stability_value(self.tableau, z)
        return self.cache[z]

    def grid(self, re_min: float, re_max: float, im_min: float, im_max: float,
             nre: int, nim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """|R| on an ``nre`` x ``nim`` rectangle, endpoints included."""
        xs = np.linspace(re_min, re_max, nre)
        ys = np.linspace(im_min, im_max, nim)
        mag = np.array([[abs(stability_value(self.tableau, complex(x, y))) for x in xs]
                        for y in ys])
        return xs, ys, mag


def collocation_tableau(nodes) -> np.ndarray:
    """Collocation matrix ``a_ij = int_0^{c_i} l_j`` for Lagrange polynomials ``l_j``.

    Built from monomial moments, independently of the Legendre machinery;
    conditioning limits it to modest stage counts.
    """
    c = np.asarray(nodes, dtype=float)
    s = c.size
    powers = np.arange(s)
    V = c[:, None] ** powers[None, :]
    moments = c[:, None] ** (powers[None, :] + 1) / (powers[None, :] + 1)
    # A V = moments, i.e. A = moments V^{-1}
    return np.linalg.solve(V.T, moments.T).T
