import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import special

from covertfbl import kernels
from covertfbl._accel import HAVE_NUMBA, backend_name
from covertfbl.covert import _shell_radius_nodes


def test_row_moments_parity(rng):
    z = rng.standard_normal((500, 37))
    a = kernels.row_moments_numba(z)
    b = kernels.row_moments_numpy(z)
    assert np.allclose(a[0], b[0], rtol=1e-13, atol=1e-12)
    assert np.allclose(a[1], b[1], rtol=1e-13)
    assert np.allclose(b[0], z.sum(axis=1))


@pytest.mark.parametrize("b", [0.5, 2.0, 16.0, 32.0])
def test_log_hyp0f1_parity_and_reference(b):
    x = np.array([0.0, 1e-8, 0.3, 5.0, 80.0, 900.0, 1e4])
    a = kernels.log_hyp0f1_numba(b, x)
    c = kernels.log_hyp0f1_numpy(b, x)
    ref = np.log(special.hyp0f1(b, x[x < 500]))
    assert np.allclose(a[: ref.size], ref, rtol=1e-12, atol=1e-14)
    assert np.allclose(a, c, rtol=1e-11, atol=1e-13)


def test_shell_likelihood_parity(rng):
    log_w, rho = _shell_radius_nodes(8, 0.8, 0.5, 64)
    t = rng.chisquare(8, 2000)
    a = kernels.shell_log_likelihood_ratio_numba(t, log_w, rho, 4.0)
    b = kernels.shell_log_likelihood_ratio_numpy(t, log_w, rho, 4.0)
    assert np.allclose(a, b, rtol=1e-11, atol=1e-12)


def test_shell_likelihood_integrates_to_one(rng):
    # E_0[L] = 1 for a likelihood ratio
    log_w, rho = _shell_radius_nodes(4, 0.8, 0.3, 64)
    t = rng.chisquare(4, 400_000)
    lr = np.exp(kernels.shell_log_likelihood_ratio(t, log_w, rho, 2.0))
    assert abs(lr.mean() - 1.0) < 4 * lr.std() / np.sqrt(t.size)


def test_decode_parity(rng):
    words = rng.standard_normal((6, 10))
    lg = rng.normal(0, 2, 6)
    y = words[rng.integers(0, 6, 3000)] + rng.standard_normal((3000, 10))
    a = kernels.decode_first_numba(words, lg, y, 0.3)
    b = kernels.decode_first_numpy(words, lg, y, 0.3)
    assert np.array_equal(a, b)
    assert (a == -1).any() and (a >= 0).any()


def test_backend_flag_selects_numpy():
    env = dict(os.environ, COVERTFBL_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from covertfbl import kernels, _accel; "
         "print(_accel.backend_name(), kernels.row_moments is kernels.row_moments_numpy)"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_default_backend_is_numba():
    if os.environ.get("COVERTFBL_DISABLE_NUMBA"):
        pytest.skip("backend disabled by environment")
    assert backend_name() == "numba"
    assert kernels.row_moments is kernels.row_moments_numba
