import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpr_lab.core import DimensionMismatch, NotHermitian, lift
from cpr_lab.measure import (
    MeasurementEnsemble,
    NoiseKind,
    add_noise,
    apply_map_matrix,
    apply_map_signal,
    load_ensemble,
    sample_ensemble,
    save_ensemble,
)


def test_unit_second_moment():
    E = sample_ensemble(1, 1_000_000, seed=11)
    assert np.mean(np.abs(E.vectors) ** 2) == pytest.approx(1.0, abs=0.005)


def test_re_im_covariance_is_half_identity():
    E = sample_ensemble(2, 1_000_000, seed=12)
    parts = np.concatenate([E.vectors.real, E.vectors.imag], axis=1)
    cov = np.cov(parts, rowvar=False)
    assert np.max(np.abs(np.diag(cov) - 0.5)) < 0.005
    assert np.max(np.abs(cov - np.diag(np.diag(cov)))) < 0.005


def test_same_seed_same_ensemble():
    a, b = sample_ensemble(3, 5, 42), sample_ensemble(3, 5, 42)
    assert a == b
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert sample_ensemble(3, 5, 43) != a


def test_prefix_property():
    # a longer ensemble with the same seed extends a shorter one
    short, long = sample_ensemble(4, 300, 9), sample_ensemble(4, 700, 9)
    np.testing.assert_array_equal(long.vectors[:300], short.vectors)


def test_ensemble_is_immutable():
    E = sample_ensemble(2, 3, 0)
    with pytest.raises(ValueError):
        E.vectors[0, 0] = 1.0


def test_invalid_sizes():
    with pytest.raises(ValueError):
        sample_ensemble(0, 3, 0)
    with pytest.raises(ValueError):
        sample_ensemble(3, 0, 0)


def test_map_examples():
    E = sample_ensemble(4, 30, 1)
    np.testing.assert_array_equal(apply_map_matrix(E, np.zeros((4, 4))), np.zeros(30))
    np.testing.assert_allclose(apply_map_matrix(E, np.eye(4)), np.sum(np.abs(E.vectors) ** 2, axis=1), rtol=1e-13)
    np.testing.assert_array_equal(apply_map_signal(E, np.zeros(4)), np.zeros(30))
    x = np.array([1 + 1j, 0.5, -2j, 0.1])
    np.testing.assert_allclose(apply_map_matrix(E, lift(x)), apply_map_signal(E, x), rtol=1e-10, atol=1e-12)
    assert np.all(apply_map_signal(E, x) >= 0)


def test_injected_ensemble():
    V = np.array([[1, 0, 0], [0.5, 0.5j, 1]], dtype=complex)
    E = MeasurementEnsemble(V)
    assert apply_map_signal(E, [1, 0, 0])[0] == 1.0


def test_map_errors():
    E = sample_ensemble(3, 4, 0)
    with pytest.raises(DimensionMismatch):
        apply_map_signal(E, np.ones(2))
    with pytest.raises(DimensionMismatch):
        apply_map_matrix(E, np.eye(2))
    with pytest.raises(NotHermitian):
        apply_map_matrix(E, np.triu(np.ones((3, 3))))


@given(st.floats(0, 2 * math.pi), st.integers(0, 2**32))
def test_signal_map_phase_invariant(theta, seed):
    rng = np.random.default_rng(seed)
    E = sample_ensemble(5, 12, seed)
    x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    a = apply_map_signal(E, x)
    b = apply_map_signal(E, np.exp(1j * theta) * x)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32))
def test_matrix_map_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    n = 4
    E = sample_ensemble(n, 10, seed)
    G = rng.standard_normal((2, n, n)) + 1j * rng.standard_normal((2, n, n))
    X, Y = (G + G.conj().transpose(0, 2, 1)) / 2
    lhs = apply_map_matrix(E, alpha * X + beta * Y)
    rhs = alpha * apply_map_matrix(E, X) + beta * apply_map_matrix(E, Y)
    scale = abs(alpha) * np.abs(apply_map_matrix(E, X)) + abs(beta) * np.abs(apply_map_matrix(E, Y)) + 1.0
    assert np.all(np.abs(lhs - rhs) <= 1e-10 * scale)


@pytest.mark.parametrize("m", [10_000, 40_000])
def test_mean_intensity_concentrates(m):
    E = sample_ensemble(6, m, 77)
    x = np.ones(6, dtype=complex) / math.sqrt(6)
    assert abs(apply_map_signal(E, x).mean() - 1.0) <= 5 / math.sqrt(m)


def test_rerun_outputs_bit_identical():
    x = np.arange(1, 6) * (1 - 0.5j)
    a = apply_map_signal(sample_ensemble(5, 40, 3), x)
    b = apply_map_signal(sample_ensemble(5, 40, 3), x)
    assert a.tobytes() == b.tobytes()


# ------------------------------------------------------------ noise
def test_noise_examples():
    clean = np.array([3.0, 4.0])
    assert np.array_equal(add_noise(clean, 0.0, "gaussian_rescaled", 1).y, clean)
    noisy = add_noise(np.arange(10.0), 1.0, NoiseKind.GAUSSIAN_RESCALED, 5)
    assert np.linalg.norm(noisy.y - np.arange(10.0)) == pytest.approx(1.0, abs=1e-12)
    adv = add_noise(clean, 0.5, "adversarial_sphere", 0)
    np.testing.assert_allclose(adv.y, clean * 1.1, rtol=1e-15)
    none = add_noise(clean, 0.7, "none", 0)
    assert np.array_equal(none.y, clean) and none.noise_kind is NoiseKind.NONE


def test_noise_errors_and_zero_clean():
    with pytest.raises(ValueError):
        add_noise([1.0], -0.1)
    with pytest.raises(ValueError):
        add_noise([1.0], 0.1, "laplace")
    z = add_noise(np.zeros(4), 2.0, "adversarial_sphere", 0)
    assert np.linalg.norm(z.y) == pytest.approx(2.0)


def test_noise_is_seeded():
    a = add_noise(np.ones(8), 0.3, "gaussian_rescaled", 4).y
    b = add_noise(np.ones(8), 0.3, "gaussian_rescaled", 4).y
    c = add_noise(np.ones(8), 0.3, "gaussian_rescaled", 5).y
    assert a.tobytes() == b.tobytes() and not np.array_equal(a, c)


# ------------------------------------------------------------ file round trip
@pytest.mark.parametrize("suffix", [".bin", ".json"])
@pytest.mark.parametrize("seed", [0, 2**64 - 2, None])
def test_round_trip_bit_exact(tmp_path, suffix, seed):
    if seed is None:
        E = MeasurementEnsemble(np.array([[1e-300 + 3j, -0.0], [np.pi, 1 / 3j]]))
    else:
        E = sample_ensemble(7, 13, seed)
    path = tmp_path / f"ens{suffix}"
    save_ensemble(E, path)
    F = load_ensemble(path)
    assert F == E
    assert F.vectors.tobytes() == E.vectors.tobytes()


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not an ensemble")
    with pytest.raises(ValueError):
        load_ensemble(p)
