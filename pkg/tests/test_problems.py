import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbvm.errors import CollisionError, DomainError, ValidationError
from hbvm.problems import (
    LinearTestProblem,
    PolynomialHamiltonian,
    canonical_J,
    eccentric_anomaly,
    kepler,
    kepler_energy,
    kepler_exact,
    kepler_initial,
    problem_from_spec,
    quartic_oscillator,
)

finite = st.floats(-3, 3, allow_nan=False)


def central_grad(H, y):
    g = np.empty_like(y)
    for d in range(y.size):
        eps = 1e-6 * (1 + abs(y[d]))
        e = np.zeros_like(y)
        e[d] = eps
        g[d] = (H(y + e) - H(y - e)) / (2 * eps)
    return g


class TestKepler:
    def test_initial_examples(self):
        assert kepler_initial(0).tolist() == [1, 0, 0, 1]
        assert np.allclose(kepler_initial(0.6), [0.4, 0, 0, 2], rtol=0, atol=1e-15)
        assert np.allclose(kepler_initial(0.99), [0.01, 0, 0, math.sqrt(199)], rtol=1e-13)

    @pytest.mark.parametrize("e", [1.0, 1.5, -0.1])
    def test_initial_domain(self, e):
        with pytest.raises(DomainError):
            kepler_initial(e)

    @pytest.mark.parametrize("e", [0, 0.6, 0.99])
    def test_energy_is_minus_half(self, e):
        assert kepler_energy(kepler_initial(e)) == pytest.approx(-0.5, abs=1e-13)

    def test_energy_examples(self):
        assert kepler_energy([1, 0, 0, 1]) == -0.5
        assert kepler_energy([2, 0, 0, 0]) == -0.5

    def test_collision_guard(self):
        with pytest.raises(CollisionError):
            kepler_energy([0, 0, 1, 1])
        with pytest.raises(CollisionError):
            kepler(0.6).rhs(np.array([1e-9, 0, 0, 1]))

    @settings(max_examples=60, deadline=None)
    @given(st.tuples(finite, finite, finite, finite))
    def test_rhs_is_J_grad(self, y):
        y = np.array(y)
        if np.hypot(y[0], y[1]) < 0.1:
            return
        sysm = kepler(0.6)
        assert np.allclose(sysm.rhs(y), canonical_J(4) @ sysm.grad_H(y), rtol=0, atol=1e-12)
        g = central_grad(sysm.H, y)
        assert np.allclose(g, sysm.grad_H(y), rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("e", [0.0, 0.3, 0.6, 0.99])
    def test_exact_solution(self, e):
        sysm = kepler(e)
        assert np.allclose(kepler_exact(0.0, e), kepler_initial(e), atol=1e-14)
        assert np.allclose(kepler_exact(2 * math.pi, e), kepler_initial(e), atol=1e-9)
        for t in (0.3, 1.7, 4.0):
            y = kepler_exact(t, e)
            assert kepler_energy(y) == pytest.approx(-0.5, abs=1e-11)
            # derivative of the analytic path matches the vector field
            dt = 1e-6
            fd = (kepler_exact(t + dt, e) - kepler_exact(t - dt, e)) / (2 * dt)
            assert np.allclose(fd, sysm.rhs(y), rtol=1e-5, atol=1e-5)

    def test_eccentric_anomaly(self):
        for M in (0.1, 1.0, 3.0, 6.0):
            for e in (0.0, 0.6, 0.99):
                E = eccentric_anomaly(M, e)
                assert abs(E - e * math.sin(E) - M) < 1e-13


class TestLinear:
    def test_matrix(self):
        p = LinearTestProblem(-1.0, 10.0)
        assert p.matrix.tolist() == [[-1, -10], [10, -1]]
        assert p.lam == complex(-1, 10)

    def test_exact(self):
        sysm = LinearTestProblem(-0.5, 2.0).system()
        w = np.exp(complex(-0.5, 2.0) * 1.3)
        assert np.allclose(sysm.exact(1.3), [w.real, w.imag])


class TestQuartic:
    def test_examples(self):
        q = quartic_oscillator()
        assert q.grad_H(np.array([1.0, 1.0])).tolist() == [1, 1]
        assert q.H(np.array([0.0, 0.0])) == 0
        assert q.rhs(np.array([2.0, 3.0])).tolist() == [3, -8]
        assert q.degree == 4

    @settings(max_examples=40, deadline=None)
    @given(finite, finite)
    def test_gradient_fd(self, a, b):
        q = quartic_oscillator()
        y = np.array([a, b])
        assert np.allclose(central_grad(q.H, y), q.grad_H(y), rtol=1e-6, atol=1e-6)

    def test_general_polynomial(self):
        H = PolynomialHamiltonian({(2, 2): 1.0, (6, 0): 1 / 6, (0, 2): 0.5})
        assert H.degree == 6
        y = np.array([0.7, -0.4])
        assert np.allclose(central_grad(H.H, y), H.grad_H(y), rtol=1e-6)


class TestSpecStrings:
    def test_parse(self):
        assert problem_from_spec("kepler:e=0.6").y0.tolist() == [0.4, 0, 0, 2.0]
        t = problem_from_spec("test:alpha=-1,beta=10")
        assert np.allclose(t.rhs(np.array([1.0, 0.0])), [-1, 10])
        assert problem_from_spec("quartic").name == "quartic"

    @pytest.mark.parametrize("bad", ["moon", "kepler:e=x", "kepler:f=1", "quartic:a=1", "test:alpha"])
    def test_errors(self, bad):
        with pytest.raises(ValidationError):
            problem_from_spec(bad)
