"""Compiled sweep against the numpy fallback, and import-time selection."""

import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from conftest import COARSE, make_rod, random_state
from plsrod import kernels, kinematics
from plsrod.actuation import GRAVITY_DOWN_Z, Loads
from plsrod.statics import StaticProblem, solve_static

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")


@pytest.fixture
def backend():
    """Yield a switcher and restore the import-time backend afterwards."""
    before = kernels.BACKEND
    yield kernels.use_backend
    kernels.use_backend(before)


def sweep_both(backend, *args, **kw):
    out = {}
    for name in ("python", "compiled"):
        backend(name)
        out[name] = kinematics.run_sweep(*args, **kw).data
    return out["python"], out["compiled"]


@compiled
class TestAgreement:
    @pytest.mark.parametrize("quadrature", [True, False])
    def test_positions_and_jacobians(self, backend, rng, quadrature):
        rod = make_rod(COARSE)
        q = random_state(rng, rod.n_nodes)
        py, cc = sweep_both(backend, rod, q, quadrature=quadrature)
        assert set(py) == set(cc)
        for k in py:
            np.testing.assert_allclose(cc[k], py[k], rtol=1e-12, atol=1e-12, err_msg=k)

    def test_rates(self, backend, rng):
        rod = make_rod(COARSE)
        q = random_state(rng, rod.n_nodes)
        qd = rng.normal(size=q.size)
        py, cc = sweep_both(backend, rod, q, qd, eta0=rng.normal(size=6))
        for k in py:
            np.testing.assert_allclose(cc[k], py[k], rtol=1e-11, atol=1e-11, err_msg=k)

    def test_piecewise_constant_model(self, backend, rng):
        rod = make_rod(COARSE)
        q = random_state(rng, 3)
        py, cc = sweep_both(backend, rod, q, model="pcs")
        for k in py:
            np.testing.assert_allclose(cc[k], py[k], rtol=1e-12, atol=1e-12, err_msg=k)

    def test_static_solution(self, backend):
        rod = make_rod(COARSE)
        p = StaticProblem(rod, Loads(gravity=GRAVITY_DOWN_Z), tol=1e-11)
        backend("python")
        a = solve_static(p).q
        backend("compiled")
        b = solve_static(p).q
        np.testing.assert_allclose(b, a, atol=1e-9)


class TestSelection:
    def test_unknown_backend(self, backend):
        with pytest.raises(ValueError):
            backend("fortran")

    def test_switch_updates_dispatch(self, backend):
        backend("python")
        assert kernels.BACKEND == "python" and kernels.sweep is kernels.BACKENDS["python"]

    def run(self, code, **env):
        full = dict(os.environ, **env)
        return subprocess.run([sys.executable, "-c", textwrap.dedent(code)], env=full,
                              capture_output=True, text=True)

    def test_env_forces_python(self):
        r = self.run("from plsrod import kernels; print(kernels.BACKEND)", PLSROD_BACKEND="python")
        assert r.returncode == 0 and r.stdout.strip() == "python"

    def test_fallback_when_extension_missing(self):
        code = """
            import sys
            class Block:
                def find_spec(self, name, path=None, target=None):
                    if name == "plsrod._sweep":
                        raise ImportError("blocked")
            sys.meta_path.insert(0, Block())
            from plsrod import kernels
            print(kernels.BACKEND, sorted(kernels.BACKENDS))
        """
        r = self.run(code, PLSROD_BACKEND="auto")
        assert r.returncode == 0 and r.stdout.strip() == "python ['python']"

    def test_required_extension_missing_is_an_error(self):
        code = """
            import sys
            class Block:
                def find_spec(self, name, path=None, target=None):
                    if name == "plsrod._sweep":
                        raise ImportError("blocked")
            sys.meta_path.insert(0, Block())
            import plsrod.kernels
        """
        r = self.run(code, PLSROD_BACKEND="compiled")
        assert r.returncode != 0 and "ImportError" in r.stderr
