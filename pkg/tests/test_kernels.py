import numpy as np
import pytest

from conftest import BACKENDS
from hbvm import kernels
from hbvm.problems import kepler, linear_test, quartic_oscillator
from hbvm.stepper import step
from hbvm.tableau import build_hbvm

needs_compiled = pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="extension not built")


@needs_compiled
@pytest.mark.parametrize("make,y0,h", [
    (lambda: kepler(0.6), None, 0.02),
    (lambda: kepler(0.99), None, 1e-4),
    (quartic_oscillator, np.array([1.2, -0.3]), 0.1),
    (lambda: linear_test(-1.0, 10.0), np.array([1.0, 0.5]), 0.01),
])
@pytest.mark.parametrize("kr", [(1, 1), (3, 3), (15, 3)])
def test_backends_agree(make, y0, h, kr):
    sysm = make()
    y0 = sysm.y0 if y0 is None else y0
    tab = build_hbvm(*kr)
    a = step(tab, sysm, y0, h, backend="compiled")
    b = step(tab, sysm, y0, h, backend="python")
    assert a.converged and b.converged
    assert abs(a.iterations - b.iterations) <= 1
    assert np.max(np.abs(a.y1 - b.y1)) <= 1e-14 * (1 + np.max(np.abs(y0)))


def test_env_override(monkeypatch):
    monkeypatch.setenv("HBVM_BACKEND", "python")
    assert kernels.default_backend() == "python"
    monkeypatch.setenv("HBVM_BACKEND", "")
    assert kernels.default_backend() == ("compiled" if kernels.HAVE_COMPILED else "python")


def test_custom_rhs_uses_fallback():
    from hbvm.problems import OdeSystem

    sysm = OdeSystem(1, lambda y: -np.asarray(y), kernel=None)
    res = step(build_hbvm(2, 2), sysm, np.array([1.0]), 0.1, backend="compiled" if kernels.HAVE_COMPILED else None)
    assert res.converged


@needs_compiled
def test_compiled_collision_status():
    from hbvm.errors import CollisionError

    with pytest.raises(CollisionError):
        step(build_hbvm(2, 2), kepler(0.5), np.array([0.0, 0.0, 1.0, 0.0]), 0.01, backend="compiled")


def test_benchmark_cases_agree_across_backends():
    import importlib.util
    import pathlib

    path = pathlib.Path(__file__).parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    for _, fn in list(bench.cases())[:3]:
        outs = [fn(b) for b in BACKENDS]
        assert all(np.allclose(o, outs[0], rtol=0, atol=1e-13) for o in outs)
