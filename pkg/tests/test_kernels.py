"""The numba and pure-numpy kernels must agree; the env flag picks one."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpr_lab import _kernels as K
from cpr_lab.measure import sample_ensemble


def _rip_batch(seed, n=12, m=30, S=40, k=3):
    rng = np.random.default_rng(seed)
    A = sample_ensemble(n, m, seed).vectors
    supports = np.sort(np.array([rng.choice(n, k, replace=False) for _ in range(S)]), axis=1)
    u1 = rng.standard_normal((S, k)) + 1j * rng.standard_normal((S, k))
    u2 = rng.standard_normal((S, k)) + 1j * rng.standard_normal((S, k))
    phi = rng.uniform(0, 2 * np.pi, S)
    return A, supports, u1, u2, np.cos(phi), np.sin(phi)


@given(st.integers(0, 2**32))
def test_l1_ratios_agree(seed):
    args = _rip_batch(seed)
    np.testing.assert_allclose(K.l1_ratios_numba(*args), K.l1_ratios_numpy(*args), rtol=1e-12)


def test_l1_ratios_chunk_boundary():
    args = _rip_batch(1, S=2 * K._CHUNK + 3)
    np.testing.assert_allclose(K.l1_ratios_numba(*args), K.l1_ratios_numpy(*args), rtol=1e-12)


@given(st.integers(0, 2**32), st.floats(-1, 1))
def test_moments_agree(seed, t):
    z = np.random.default_rng(seed).standard_normal((5000, 4))
    c = np.array([1.0, 1.0, t, t])
    a = K.abs_quadratic_moments_numba(z, c)
    b = K.abs_quadratic_moments_numpy(z, c)
    assert a[0] == pytest.approx(b[0], rel=1e-12)
    assert a[1] == pytest.approx(b[1], rel=1e-9)


@given(st.integers(0, 2**32), st.integers(1, 10), st.integers(1, 30))
def test_loss_grad_agree(seed, n, m):
    rng = np.random.default_rng(seed)
    A = sample_ensemble(n, m, seed).vectors
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    keep = rng.random(n) < 0.6
    x[~keep] = 0
    supp = np.flatnonzero(keep).astype(np.int64)
    y = rng.uniform(0, 2, m)
    fa, ga = K.loss_grad_numba(A, x, y, supp)
    fb, gb = K.loss_grad_numpy(A, x, y, supp)
    assert fa == pytest.approx(fb, rel=1e-12, abs=1e-15)
    np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-13)


def _backend_in_subprocess(value):
    env = dict(os.environ, CPR_LAB_NUMBA=value)
    out = subprocess.run(
        [sys.executable, "-c", "import cpr_lab; print(cpr_lab.BACKEND)"], env=env, capture_output=True, text=True, check=True
    )
    return out.stdout.strip()


@pytest.mark.parametrize("value, expected", [("0", "numpy"), ("off", "numpy"), ("1", "numba")])
def test_env_flag_selects_backend(value, expected):
    assert _backend_in_subprocess(value) == expected


def test_numpy_backend_recovers_same_signal():
    code = (
        "import numpy as np;"
        "from cpr_lab.experiments import recovery_trial;"
        "r = recovery_trial(dict(n=32, k=2, m=40, trial=0, seed=1, epsilon=0.0, noise='none', max_iters=2000, restarts=5));"
        "print(r['success'], r['relative_error'] < 1e-5)"
    )
    for flag in ("0", "1"):
        env = dict(os.environ, CPR_LAB_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.split() == ["True", "True"]
