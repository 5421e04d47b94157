import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from hbvm.basis import (
    OrthonormalBasis,
    antiderivative_table,
    custom_rule,
    gauss_rule,
    legendre_antiderivative,
    legendre_eval,
    legendre_table,
    lobatto_rule,
)
from hbvm.errors import DomainError, ValidationError


def oracle_shifted(j, x):
    """sqrt(2j+1) L_j(2x-1) through numpy's Legendre series evaluation."""
    coef = np.zeros(j + 1)
    coef[j] = 1.0
    return math.sqrt(2 * j + 1) * npleg.legval(2 * x - 1, coef)


def oracle_antiderivative(j, c):
    coef = np.zeros(j + 1)
    coef[j] = 1.0
    integ = npleg.legint(coef, lbnd=-1)  # d/dt, integral from -1
    return math.sqrt(2 * j + 1) * 0.5 * npleg.legval(2 * c - 1, integ)


class TestLegendreEval:
    def test_examples(self):
        assert legendre_eval(0, 0.37) == 1.0
        assert legendre_eval(1, 0.5) == pytest.approx(0.0, abs=1e-16)
        assert legendre_eval(2, 1.0) == pytest.approx(math.sqrt(5), rel=1e-15)

    @pytest.mark.parametrize("j", range(0, 15))
    def test_against_numpy_series(self, j):
        xs = np.linspace(0, 1, 23)
        got = legendre_table(j, xs)[j]
        assert np.allclose(got, oracle_shifted(j, xs), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("j", range(0, 12))
    def test_endpoint_values(self, j):
        assert legendre_eval(j, 1.0) == pytest.approx(math.sqrt(2 * j + 1), rel=1e-14)
        assert legendre_eval(j, 0.0) == pytest.approx((-1) ** j * math.sqrt(2 * j + 1), rel=1e-14)

    @pytest.mark.parametrize("bad", [-1, 201, 1.5])
    def test_degree_out_of_range(self, bad):
        with pytest.raises(DomainError):
            legendre_eval(bad, 0.5)

    def test_x_out_of_range(self):
        with pytest.raises(DomainError):
            legendre_eval(1, 1.2)

    def test_leading_coefficient_and_degree(self):
        for j in range(8):
            xs = np.linspace(0, 1, 40)
            coef = np.polyfit(xs, legendre_table(j, xs)[j], j + 1)
            assert abs(coef[0]) < 1e-6  # no x^{j+1} term
            lead = math.sqrt(2 * j + 1) * math.comb(2 * j, j)
            assert coef[1] == pytest.approx(lead, rel=1e-6)


class TestAntiderivative:
    def test_examples(self):
        for c in (0.0, 0.3, 1.0):
            assert legendre_antiderivative(0, c) == c
        for j in range(1, 10):
            assert legendre_antiderivative(j, 1.0) == pytest.approx(0.0, abs=1e-15)
        assert legendre_antiderivative(1, 0.5) == pytest.approx(-math.sqrt(3) / 4, rel=1e-15)

    @pytest.mark.parametrize("j", range(0, 12))
    def test_against_numpy_integration(self, j):
        cs = np.linspace(0, 1, 17)
        assert np.allclose(antiderivative_table(j, cs)[j], oracle_antiderivative(j, cs),
                           rtol=0, atol=1e-13)

    def test_finite_difference_consistency(self, rng):
        step = 1e-6
        for _ in range(20):
            j = int(rng.integers(0, 10))
            c = float(rng.uniform(0.01, 0.99))
            fd = (legendre_antiderivative(j, c + step) - legendre_antiderivative(j, c - step)) / (2 * step)
            val = legendre_eval(j, c)
            assert abs(fd - val) <= 1e-6 * max(1.0, abs(val))

    def test_domain(self):
        with pytest.raises(DomainError):
            legendre_antiderivative(3, -0.1)
        with pytest.raises(DomainError):
            legendre_antiderivative(-2, 0.5)


class TestBasis:
    def test_orthonormality(self):
        rule = gauss_rule(12)
        P = legendre_table(10, rule.nodes)
        gram = (P * rule.weights) @ P.T
        assert np.max(np.abs(gram - np.eye(11))) < 1e-13

    def test_P0_is_one(self):
        basis = OrthonormalBasis(4)
        assert np.all(basis.table(np.linspace(0, 1, 9))[0] == 1.0)

    def test_bounds(self):
        basis = OrthonormalBasis(3)
        with pytest.raises(DomainError):
            basis.eval(4, 0.5)
        assert basis.antiderivative(1, 0.5) == pytest.approx(-math.sqrt(3) / 4)

    @pytest.mark.parametrize("j", [1, 2, 3, 4])
    def test_gamma_decay_of_smooth_function(self, j):
        # int_0^1 P_j(tau) exp(tau h) dtau = O(h^j)
        rule = gauss_rule(20)
        hs = np.array([0.1, 0.05, 0.025, 0.0125])
        vals = [abs(rule.integrate(legendre_table(j, rule.nodes)[j] * np.exp(rule.nodes * h)))
                for h in hs]
        slope = np.polyfit(np.log(hs), np.log(vals), 1)[0]
        assert abs(slope - j) <= 0.2


class TestGaussRule:
    def test_k1(self):
        r = gauss_rule(1)
        assert r.nodes.tolist() == [0.5] and r.weights.tolist() == [1.0] and r.order == 2

    def test_k2(self):
        r = gauss_rule(2)
        s = math.sqrt(3) / 6
        assert np.allclose(r.nodes, [0.5 - s, 0.5 + s], atol=1e-16)
        assert np.allclose(r.weights, [0.5, 0.5], atol=1e-16)
        assert r.order == 4

    @pytest.mark.parametrize("k", [1, 2, 3, 5, 8, 15, 30, 50])
    def test_against_leggauss(self, k):
        r = gauss_rule(k)
        x, w = npleg.leggauss(k)
        assert np.max(np.abs(r.nodes - (x + 1) / 2)) < 1e-14
        assert np.max(np.abs(r.weights - w / 2)) < 1e-14
        assert abs(r.weights.sum() - 1) < 1e-14
        assert np.max(np.abs(r.nodes + r.nodes[::-1] - 1)) < 1e-14
        assert np.all((r.nodes > 0) & (r.nodes < 1)) and np.all(np.diff(r.nodes) > 0)

    @pytest.mark.parametrize("k", range(1, 11))
    def test_exactness_boundary(self, k):
        r = gauss_rule(k)
        for d in range(2 * k):
            assert abs(r.integrate(r.nodes**d) - 1 / (d + 1)) < 1e-13
        assert abs(r.integrate(r.nodes ** (2 * k)) - 1 / (2 * k + 1)) > 1e-13

    def test_invalid(self):
        with pytest.raises(ValidationError):
            gauss_rule(0)


class TestCustomRule:
    def test_lobatto3(self):
        assert custom_rule([0, 0.5, 1], [1 / 6, 2 / 3, 1 / 6]).order == 4

    def test_midpoint_and_trapezoid(self):
        assert custom_rule([0.5], [1.0]).order == 2
        assert custom_rule([0, 1], [0.5, 0.5]).order == 2

    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_lobatto_family(self, n):
        r = lobatto_rule(n)
        assert r.order == 2 * n - 2
        assert r.nodes[0] == 0 and r.nodes[-1] == 1

    @pytest.mark.parametrize("nodes,weights", [
        ([0.5, 0.5], [0.5, 0.5]),
        ([0.7, 0.2], [0.5, 0.5]),
        ([0.2, 0.7], [1.5, -0.5]),
        ([0.2, 1.2], [0.5, 0.5]),
        ([0.2], [0.5, 0.5]),
    ])
    def test_validation(self, nodes, weights):
        with pytest.raises(ValidationError):
            custom_rule(nodes, weights)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=6, unique=True))
    def test_interpolatory_rules_have_order_at_least_n(self, pts):
        nodes = np.sort(np.array(pts))
        if np.min(np.diff(nodes), initial=1.0) < 0.05:
            return
        # interpolatory weights from the moment system
        V = nodes[None, :] ** np.arange(len(nodes))[:, None]
        w = np.linalg.solve(V, 1.0 / np.arange(1, len(nodes) + 1))
        if np.any(w <= 0):
            return
        assert custom_rule(nodes, w).order >= len(nodes)
