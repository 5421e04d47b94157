import math

import numpy as np
import pytest

from hbvm.errors import CollisionError, StageDivergenceError, ValidationError
from hbvm.problems import (
    LinearTestProblem,
    OdeSystem,
    PolynomialHamiltonian,
    constant_system,
    kepler,
    linear_test,
    quartic_oscillator,
)
from hbvm.stepper import solve_stages, step, step_polynomial
from hbvm.tableau import build_hbvm, stability_value


def complex_oracle(alpha, beta, h, x, tab):
    w = stability_value(tab, complex(alpha, beta) * h) * complex(x[0], x[1])
    return np.array([w.real, w.imag])


class TestSolveStages:
    def test_zero_rhs(self, backend):
        res = solve_stages(build_hbvm(3, 2), constant_system([0.0, 0.0]), [1.0, 2.0], 0.1,
                           backend=backend)
        assert res.converged and res.iterations == 1
        assert np.array_equal(res.stages, np.tile([1.0, 2.0], (3, 1)))

    def test_linear_fixed_point(self, backend):
        lam = -1.0
        sysm = linear_test(lam, 0.0)
        res = solve_stages(build_hbvm(1, 1), sysm, [1.0, 0.0], 0.1, backend=backend)
        assert res.converged
        assert res.stages[0, 0] == pytest.approx(1 / 1.05, abs=1e-13)

    def test_kepler_converges(self, backend):
        sysm = kepler(0.6)
        res = solve_stages(build_hbvm(3, 3), sysm, sysm.y0, 0.01, tol=1e-13, backend=backend)
        assert res.converged and res.iterations < 30
        assert res.residual <= 1e-13 * (1 + np.max(np.abs(sysm.y0)))

    def test_nonconvergence_is_reported(self, backend):
        sysm = linear_test(-100.0, 0.0)
        # h*lambda = -10: the fixed-point map expands, so it either blows up or stalls
        try:
            res = solve_stages(build_hbvm(2, 2), sysm, [1.0, 0.0], 0.1, max_iter=5,
                               backend=backend)
        except StageDivergenceError:
            return
        assert not res.converged

    def test_divergence_raises(self, backend):
        sysm = linear_test(-1e6, 0.0)
        with pytest.raises(StageDivergenceError):
            solve_stages(build_hbvm(2, 2), sysm, [1.0, 0.0], 1.0, max_iter=100, backend=backend)

    def test_collision_raises(self, backend):
        sysm = kepler(0.6)
        with pytest.raises(CollisionError):
            solve_stages(build_hbvm(2, 2), sysm, np.array([1e-9, 0, 0, 1.0]), 0.01,
                         backend=backend)

    def test_newton_handles_stiff_linear(self):
        tab = build_hbvm(3, 3)
        res = step(tab, linear_test(-1.0, 5.0), [1.0, 0.0], 100.0, solver="newton")
        assert res.converged
        assert np.allclose(res.y1, complex_oracle(-1, 5, 100, [1, 0], tab), atol=1e-12)

    def test_newton_fd_jacobian(self):
        # quartic has no analytic Jacobian attached
        sysm = quartic_oscillator()
        y0 = np.array([0.8, 0.1])
        a = step(build_hbvm(3, 2), sysm, y0, 0.1, solver="newton").y1
        b = step(build_hbvm(3, 2), sysm, y0, 0.1).y1
        assert np.max(np.abs(a - b)) < 1e-12

    def test_argument_checks(self):
        tab = build_hbvm(1, 1)
        sysm = linear_test()
        with pytest.raises(ValidationError):
            step(tab, sysm, [1.0, 0.0], 0.0)
        with pytest.raises(ValidationError):
            step(tab, sysm, [1.0, 0.0], 0.1, tol=0.0)
        with pytest.raises(ValidationError):
            step(tab, sysm, [1.0, 0.0, 3.0], 0.1)
        with pytest.raises(ValidationError):
            step(tab, sysm, [1.0, 0.0], 0.1, solver="bogus")


class TestStep:
    def test_constant_field(self, backend):
        v = np.array([0.5, -2.0, 1.0])
        res = step(build_hbvm(4, 3), constant_system(v), [1.0, 1.0, 1.0], 0.3, backend=backend)
        assert np.allclose(res.y1, [1.0, 1.0, 1.0] + 0.3 * v, atol=1e-15)

    @pytest.mark.parametrize("kr", [(1, 1), (2, 2), (3, 3), (4, 3), (6, 2)])
    def test_scalar_linear_is_R(self, kr, backend):
        tab = build_hbvm(*kr)
        lam, h = -0.7, 0.2
        res = step(tab, linear_test(lam, 0.0), [1.0, 0.0], h, backend=backend)
        assert abs(res.y1[0] - stability_value(tab, lam * h).real) < 1e-13

    def test_rotated_system(self, rng, backend):
        for _ in range(10):
            alpha, beta = -rng.uniform(0, 2), rng.uniform(-3, 3)
            h = rng.uniform(0.01, 0.1)
            x = rng.normal(size=2)
            tab = build_hbvm(3, 3)
            y1 = step(tab, LinearTestProblem(alpha, beta).system(), x, h, backend=backend).y1
            assert np.max(np.abs(y1 - complex_oracle(alpha, beta, h, x, tab))) < 1e-12

    def test_kepler_energy_hbvm_15_3(self, backend):
        sysm = kepler(0.6)
        y1 = step(build_hbvm(15, 3), sysm, sysm.y0, 2 * math.pi / 500, backend=backend).y1
        assert abs(sysm.H(y1) - sysm.H(sysm.y0)) / abs(sysm.H(sysm.y0)) <= 1e-12

    @pytest.mark.parametrize("coeffs,nu", [
        ({(0, 2): 0.5, (4, 0): 0.25}, 4),
        ({(0, 2): 0.5, (6, 0): 1 / 6, (2, 2): 0.3}, 6),
        ({(3, 0): 1.0, (1, 2): -0.5, (0, 2): 0.5}, 3),
    ])
    @pytest.mark.parametrize("k,r", [(1, 1), (2, 1), (3, 1), (2, 2), (4, 2), (6, 2), (6, 3), (9, 3)])
    def test_polynomial_energy_conservation(self, coeffs, nu, k, r, rng):
        if nu > 2 * k / r:
            return
        sysm = PolynomialHamiltonian(coeffs)
        for _ in range(5):
            y0 = rng.uniform(-0.7, 0.7, 2)
            y1 = step(build_hbvm(k, r), sysm, y0, 0.1).y1
            H0 = sysm.H(y0)
            assert abs(sysm.H(y1) - H0) <= 1e-12 * (1 + abs(H0))

    def test_non_conservation_witness(self):
        sysm = quartic_oscillator()
        tab = build_hbvm(1, 1)
        y = np.array([1.0, 0.0])
        worst = 0.0
        for _ in range(50):
            y1 = step(tab, sysm, y, 0.1).y1
            worst = max(worst, abs(sysm.H(y1) - sysm.H(y)))
            y = y1
        assert worst > 1e-8

    def test_stabilization_in_k(self, rng):
        sysm = quartic_oscillator()
        for _ in range(5):
            y0, h = rng.uniform(-1, 1, 2), rng.uniform(0.02, 0.2)
            ys = [step(build_hbvm(k, 2), sysm, y0, h).y1 for k in (4, 6, 10)]
            assert max(np.max(np.abs(a - b)) for a in ys for b in ys) < 1e-11


class TestStepPolynomial:
    def test_endpoints_and_stages(self):
        sysm = kepler(0.6)
        tab = build_hbvm(5, 3)
        h = 0.05
        res = step(tab, sysm, sysm.y0, h)
        u = step_polynomial(tab, res, sysm.y0, h)
        assert np.allclose(u(0.0), sysm.y0, atol=1e-16)
        assert np.allclose(u(1.0), res.y1, atol=1e-15)
        # stages sit on the polynomial
        assert np.allclose(u(tab.c), res.stages, atol=1e-12)
