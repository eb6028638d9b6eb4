"""Value helpers shared by the rest of the package.

Vectors and matrices are plain numpy arrays. The helpers here validate them
once at the boundary (``as_vector``, ``hermitian``) and provide the
phase-invariant distances and sparsity counts used everywhere else.
"""
from __future__ import annotations

import numpy as np

ZERO_RTOL = 1e-12
ZERO_FLOOR = 1e-300
HERMITIAN_ATOL = 1e-10


class DimensionMismatch(ValueError):
    pass


class NotHermitian(ValueError):
    pass


def subseed(seed: int, *key: int) -> np.random.SeedSequence:
    """Child seed sequence for ``(seed, *key)``.

    Every random object in the package is derived this way so that results
    depend on the seed and the logical index only, never on worker layout.
    """
    return np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))


def derive_int(seed: int, *key: int) -> int:
    return int(subseed(seed, *key).generate_state(1, np.uint64)[0])


def as_vector(x) -> np.ndarray:
    """Validate and return ``x`` as a finite complex 1-D array."""
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def support(x, rtol: float = ZERO_RTOL) -> np.ndarray:
    """Sorted indices of the nonzero entries of ``x`` (scale-relative zero test)."""
    mag = np.abs(np.asarray(x))
    return np.flatnonzero(mag > _threshold(mag, rtol))


def l0(x, rtol: float = ZERO_RTOL) -> int:
    return int(support(x, rtol).size)


def hermitian(X) -> np.ndarray:
    """Return a conjugate-symmetric copy of ``X``.

    Deviations up to ``HERMITIAN_ATOL`` (relative to the largest entry) are
    removed by averaging ``X`` with ``X*``; anything larger raises
    :class:`NotHermitian`.
    """
    M = np.array(X, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NotHermitian("matrix has non-finite entries")
    dev = np.max(np.abs(M - M.conj().T), initial=0.0)
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    if dev > HERMITIAN_ATOL * scale:
        raise NotHermitian(f"conjugate-symmetry deviation {dev:.3e}")
    M = 0.5 * (M + M.conj().T)
    M[np.diag_indices_from(M)] = M.diagonal().real
    return M


def _threshold(mag: np.ndarray, rtol: float) -> float:
    return rtol * max(float(np.max(mag, initial=0.0)), ZERO_FLOOR)


def row_sparsity(X, rtol: float = ZERO_RTOL) -> int:
    """Number of rows of ``X`` holding at least one nonzero entry."""
    mag = np.abs(np.asarray(X))
    return int(np.count_nonzero(np.any(mag > _threshold(mag, rtol), axis=1)))


def frobenius_norm(X) -> float:
    return float(np.linalg.norm(np.asarray(X), "fro"))


def lift(x) -> np.ndarray:
    """The rank-one lift ``x x*``."""
    v = as_vector(x)
    L = np.outer(v, v.conj())
    # fused multiply-adds can leave last-bit asymmetry; averaging is exactly Hermitian
    return 0.5 * (L + L.conj().T)


def _check_pair(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[-1] != y.shape[-1]:
        raise DimensionMismatch(f"dimensions differ: {x.shape[-1]} vs {y.shape[-1]}")


def phase_align(x, ref):
    """Rotate ``x`` by the unit-modulus ``c`` minimising ``||c x - ref||_2``.

    ``c = <x, ref> / |<x, ref>|`` with ``<x, ref> = sum(conj(x) * ref)``. When
    the inner product vanishes every ``c`` is optimal and ``c = 1`` is
    returned. Leading axes are treated as a batch.

    Returns:
        tuple: ``(c * x, c)``.
    """
    x = np.asarray(x, dtype=np.complex128)
    ref = np.asarray(ref, dtype=np.complex128)
    _check_pair(x, ref)
    ip = np.sum(x.conj() * ref, axis=-1)
    mag = np.abs(ip)
    scale = np.linalg.norm(x, axis=-1) * np.linalg.norm(ref, axis=-1)
    tie = mag <= 1e-14 * scale
    # rescale by the largest component first: complex division of subnormals overflows
    big = np.where(tie, 1.0, np.maximum(np.abs(ip.real), np.abs(ip.imag)))
    re, im = ip.real / big, ip.imag / big
    r = np.where(tie, 1.0, np.hypot(re, im))
    c = np.where(tie, 1.0 + 0j, (re / r) + 1j * (im / r))
    if x.ndim == 1:
        c = complex(c)
        return c * x, c
    return c[..., None] * x, c


def aligned_distance(x, ref) -> float:
    """``min_{|c|=1} ||c x - ref||_2``."""
    xa, _ = phase_align(x, ref)
    return float(np.linalg.norm(xa - np.asarray(ref)))


def dist_matrix(x, y) -> float:
    """Frobenius distance between the lifts ``x x*`` and ``y y*``."""
    x, y = as_vector(x), as_vector(y)
    _check_pair(x, y)
    return frobenius_norm(lift(x) - lift(y))
