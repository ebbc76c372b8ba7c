import os
import subprocess
import sys

import numpy as np
import pytest

from dirac_soliton import kernels

compiled = pytest.importorskip("dirac_soliton._ckernels")
python = kernels.backend_module("python")


@pytest.fixture(scope="module")
def radii():
    return np.linspace(0.005, 20.0, 4000)


def _same(a, b):
    for x, y in zip(a, b):
        if isinstance(x, np.ndarray):
            np.testing.assert_array_equal(np.isnan(x), np.isnan(y))
            ok = ~np.isnan(x)
            np.testing.assert_allclose(x[ok], y[ok], rtol=1e-13, atol=1e-300)
        else:
            assert x == y


@pytest.mark.parametrize("q0", [2.0, 4.3373876800, 6.0])
@pytest.mark.parametrize("stop", [True, False])
def test_nls_trajectory_parity(radii, q0, stop):
    args = (radii, q0, 0.0, 1.0, 4, stop)
    _same(compiled.nls_trajectory(*args), python.nls_trajectory(*args))


@pytest.mark.parametrize("g0, theta", [(0.05, 1.0), (0.137, 1.0), (0.5, 1.5)])
def test_dirac_trajectory_parity(radii, g0, theta):
    args = (radii / 0.0316, 0.0, g0, theta, 1e-3, 4, True)
    _same(compiled.dirac_trajectory(*args), python.dirac_trajectory(*args))


def test_exp_sweeps_parity(radii):
    rng = np.random.default_rng(3)
    s, ds, t, dt = (rng.standard_normal(radii.size) * np.exp(-radii) for _ in range(4))
    _same(compiled.exp_sweeps(radii, s, ds, t, dt), python.exp_sweeps(radii, s, ds, t, dt))


def test_status_codes_distinct():
    assert len({kernels.UNDECIDED, kernels.OVERSHOOT, kernels.UNDERSHOOT}) == 3


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.backend_module("fortran")


def test_environment_forces_python_backend():
    env = dict(os.environ, DIRAC_SOLITON_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from dirac_soliton import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_compiled_backend_is_default():
    env = {k: v for k, v in os.environ.items() if k != "DIRAC_SOLITON_PURE_PYTHON"}
    out = subprocess.run(
        [sys.executable, "-c", "from dirac_soliton import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "cython"
