"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names (``l1_ratios``, ``abs_quadratic_moments``, ``loss_grad``)
point at the numba versions unless numba is missing or the environment sets
``CPR_LAB_NUMBA=0``. Both flavours are importable directly for tests and the
benchmark script.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CPR_LAB_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"

_CHUNK = 512


# ---------------------------------------------------------------- l1 ratios
def l1_ratios_numpy(A, supports, u1, u2, lam1, lam2):
    """(1/m)||A(X_s)||_1 for X_s = lam1 u1 u1* + lam2 u2 u2*, one per sample s.

    ``u1``/``u2`` hold the support-restricted entries, shape (S, k).
    """
    m = A.shape[0]
    out = np.empty(supports.shape[0])
    for lo in range(0, supports.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, supports.shape[0])
        G = A[:, supports[lo:hi]]  # (m, s, k)
        p1 = np.einsum("msk,sk->ms", G, u1[lo:hi].conj())
        p2 = np.einsum("msk,sk->ms", G, u2[lo:hi].conj())
        q = lam1[lo:hi] * (p1.real**2 + p1.imag**2) + lam2[lo:hi] * (p2.real**2 + p2.imag**2)
        out[lo:hi] = np.abs(q).sum(axis=0) / m
    return out


def _l1_ratios_loop(A, supports, u1, u2, lam1, lam2):
    m = A.shape[0]
    S, k = supports.shape
    out = np.empty(S)
    for s in range(S):
        acc = 0.0
        l1 = lam1[s]
        l2 = lam2[s]
        for j in range(m):
            p1 = 0j
            p2 = 0j
            for i in range(k):
                a = A[j, supports[s, i]]
                p1 += u1[s, i].conjugate() * a
                p2 += u2[s, i].conjugate() * a
            acc += abs(l1 * (p1.real * p1.real + p1.imag * p1.imag) + l2 * (p2.real * p2.real + p2.imag * p2.imag))
        out[s] = acc / m
    return out


# ------------------------------------------------- |sum c_i z_i^2| moments
def abs_quadratic_moments_numpy(z, coeffs):
    """Sample mean and standard deviation (ddof=1) of ``|sum_i c_i z_i^2|``."""
    v = np.abs((z * z) @ coeffs)
    return float(v.mean()), float(v.std(ddof=1))


def _abs_quadratic_moments_loop(z, coeffs):
    N, d = z.shape
    mean = 0.0
    m2 = 0.0
    # Welford keeps the variance stable for N ~ 1e6
    for r in range(N):
        s = 0.0
        for i in range(d):
            s += coeffs[i] * z[r, i] * z[r, i]
        v = abs(s)
        delta = v - mean
        mean += delta / (r + 1)
        m2 += delta * (v - mean)
    return mean, np.sqrt(m2 / (N - 1))


# -------------------------------------------------- intensity loss/gradient
def loss_grad_numpy(A, x, y, supp):
    """Intensity loss ``(1/m) sum (|a_j* x|^2 - y_j)^2`` and its real gradient.

    ``x`` must vanish off ``supp``. The gradient is returned as the complex
    vector ``d/dRe(x) + i d/dIm(x)`` over all n coordinates.
    """
    m = A.shape[0]
    p = A[:, supp].conj() @ x[supp]
    r = p.real**2 + p.imag**2 - y
    g = (4.0 / m) * (A.T @ (r * p))
    return float(r @ r) / m, g


def _loss_grad_loop(A, x, y, supp):
    m, n = A.shape
    g = np.zeros(n, dtype=np.complex128)
    f = 0.0
    for j in range(m):
        p = 0j
        for i in supp:
            p += A[j, i].conjugate() * x[i]
        r = p.real * p.real + p.imag * p.imag - y[j]
        f += r * r
        w = r * p
        for i in range(n):
            g[i] += w * A[j, i]
    return f / m, g * (4.0 / m)


if HAVE_NUMBA:
    l1_ratios_numba = njit(cache=True)(_l1_ratios_loop)
    abs_quadratic_moments_numba = njit(cache=True)(_abs_quadratic_moments_loop)
    loss_grad_numba = njit(cache=True)(_loss_grad_loop)
else:  # pragma: no cover
    l1_ratios_numba = l1_ratios_numpy
    abs_quadratic_moments_numba = abs_quadratic_moments_numpy
    loss_grad_numba = loss_grad_numpy


def l1_ratios(A, supports, u1, u2, lam1, lam2) -> np.ndarray:
    args = (
        np.ascontiguousarray(A, dtype=np.complex128),
        np.ascontiguousarray(supports, dtype=np.int64),
        np.ascontiguousarray(u1, dtype=np.complex128),
        np.ascontiguousarray(u2, dtype=np.complex128),
        np.ascontiguousarray(lam1, dtype=np.float64),
        np.ascontiguousarray(lam2, dtype=np.float64),
    )
    return l1_ratios_numba(*args) if USE_NUMBA else l1_ratios_numpy(*args)


def abs_quadratic_moments(z, coeffs) -> tuple[float, float]:
    z = np.ascontiguousarray(z, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    if USE_NUMBA:
        mean, std = abs_quadratic_moments_numba(z, coeffs)
        return float(mean), float(std)
    return abs_quadratic_moments_numpy(z, coeffs)


def loss_grad(A, x, y, supp) -> tuple[float, np.ndarray]:
    supp = np.ascontiguousarray(supp, dtype=np.int64)
    if USE_NUMBA:
        f, g = loss_grad_numba(A, x, y, supp)
        return float(f), g
    return loss_grad_numpy(A, x, y, supp)
