import os
import subprocess
import sys

import numpy as np
import pytest

from omdlab import _kernels_py, kernels

try:
    from omdlab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_kernels_py, id="python"),
            pytest.param(_ckernels, id="cython",
                         marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))]


def _instances(n=40, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        d = int(rng.integers(1, 30))
        eps = float(rng.choice([0.0, 1e-6, 0.1 / d]))
        x = rng.dirichlet(np.ones(d)) * (1 - d * eps) + eps
        g = rng.standard_normal(d) * float(rng.choice([0.01, 1.0, 100.0]))
        eta = float(np.exp(rng.uniform(-3, 2)))
        yield d, eps, x, g, eta


@pytest.mark.parametrize("impl", BACKENDS)
def test_projection(impl):
    for d, eps, x, g, _ in _instances():
        z = impl.project_capped_simplex(x - g, eps)
        assert z.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(z >= eps - 1e-15)
        # optimality: z - y is constant on the free coordinates
        free = z > eps + 1e-12
        if free.sum() > 1:
            shift = (z - (x - g))[free]
            assert np.ptp(shift) <= 1e-10


@pytest.mark.parametrize("impl", BACKENDS)
def test_entropy_step_kkt(impl):
    for d, eps, x, g, eta in _instances():
        if eps == 0.0:
            continue
        z, nu = impl.entropy_simplex_step(x, g, eta, eps)
        assert z.sum() == pytest.approx(1.0, abs=1e-10)
        free = z > eps * (1 + 1e-9)
        stat = np.log(z[free]) - np.log(x[free]) + eta * g[free]
        if stat.size > 1:
            assert np.ptp(stat) <= 1e-8


@pytest.mark.parametrize("impl", BACKENDS)
def test_burg_step_kkt(impl):
    for d, eps, x, g, eta in _instances():
        if eps == 0.0:
            continue
        z, nu, it = impl.burg_simplex_step(x, g, eta, eps, 200, 1e-12)
        assert z.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(z >= eps)


@pytest.mark.parametrize("impl", BACKENDS)
def test_l1sq_box_step(impl):
    rng = np.random.default_rng(3)
    for _ in range(40):
        d = int(rng.integers(1, 12))
        lo, hi = rng.uniform(0.01, 0.5, d), rng.uniform(1.0, 3.0, d)
        x = rng.uniform(lo, hi)
        g = rng.standard_normal(d)
        eta = float(rng.uniform(0.01, 3))
        z, s = impl.l1sq_box_step(x, g, eta, lo, hi)
        assert np.all(z >= lo - 1e-15) and np.all(z <= hi + 1e-15)
        assert z.sum() == pytest.approx(s)
        obj = z @ g + 0.5 * (z.sum() - x.sum()) ** 2 / eta
        # no random feasible point does better
        Z = rng.uniform(lo, hi, (2000, d))
        assert obj <= np.min(Z @ g + 0.5 * (Z.sum(axis=1) - x.sum()) ** 2 / eta) + 1e-12


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_backends_agree():
    for d, eps, x, g, eta in _instances(60, seed=11):
        assert np.allclose(_ckernels.project_capped_simplex(x - g, eps),
                           _kernels_py.project_capped_simplex(x - g, eps), atol=1e-14)
        if eps > 0:
            zc, _ = _ckernels.entropy_simplex_step(x, g, eta, eps)
            zp, _ = _kernels_py.entropy_simplex_step(x, g, eta, eps)
            assert np.allclose(zc, zp, atol=1e-13)
            bc = _ckernels.burg_simplex_step(x, g, eta, eps, 200, 1e-12)[0]
            bp = _kernels_py.burg_simplex_step(x, g, eta, eps, 200, 1e-12)[0]
            assert np.allclose(bc, bp, atol=1e-11)


def test_env_var_forces_python_backend():
    code = "from omdlab import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, OMD_LAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
