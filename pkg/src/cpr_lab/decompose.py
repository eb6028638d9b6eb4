"""Convex s-sparse decomposition of bounded real vectors.

Given ``v`` with ``||v||_inf <= theta`` and ``||v||_1 <= s*theta``, write
``v = sum_i w_i u_i`` as a convex combination of s-sparse ``u_i`` with
``supp(u_i) <= supp(v)``, ``||u_i||_1 <= ||v||_1`` and ``||u_i||_inf <= theta``.

Construction: with ``L = ||v||_1``, ``|v|`` lies in the polytope
``{0 <= u <= theta, sum(u) = L}`` restricted to ``supp(v)``. Its vertices put
``theta`` on ``floor(L/theta)`` coordinates and the remainder on one more, so
they are s-sparse. We peel vertices off greedily: pick the vertex on the
smallest face containing the current point (largest coordinates first),
take the largest step keeping the residual in the polytope, and repeat.
Each step pins at least one more coordinate to 0 or theta, so the loop ends
after at most ``dim(v) + 1`` atoms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SLACK = 1e-12
_SNAP = 1e-12
_FRAC_TOL = 1e-11


class HypothesisViolation(ValueError):
    pass


@dataclass
class DecompositionCertificate:
    weights: np.ndarray
    atoms: np.ndarray  # (N, dim)
    s: int
    theta: float
    source: np.ndarray

    @property
    def N(self) -> int:
        return len(self.weights)


def n_max(dim: int) -> int:
    return 4 * dim + 4


def _peel(w: np.ndarray) -> tuple[list[np.ndarray], list[float]]:
    """Vertex decomposition of ``w`` in units of theta (entries in (0, 1]).

    Vertex budgets come from the initial total rather than the running sum:
    the residual picks up rounding error amplified by ``1/(1 - lam)`` at each
    step, and atom sparsity must not depend on it.
    """
    w = w.copy()
    pinned_top = w >= 1.0 - _SNAP
    w[pinned_top] = 1.0
    total = float(w.sum())
    if abs(total - round(total)) <= _FRAC_TOL * max(1.0, total):
        total = float(round(total))
    atoms, weights = [], []
    remaining = 1.0
    for _ in range(n_max(w.size)):
        free = np.flatnonzero((w > 0.0) & ~pinned_top)
        budget = max(0.0, total - int(pinned_top.sum()))
        whole = int(math.floor(budget + _FRAC_TOL))
        frac = budget - whole if budget - whole > _FRAC_TOL else 0.0
        if whole >= free.size:
            whole, frac = free.size, 0.0
        # largest free coordinates first, ties to the lowest index
        order = free[np.lexsort((free, -w[free]))]
        u = np.where(pinned_top, 1.0, 0.0)
        ones, rest = order[:whole], order[whole:]
        u[ones] = 1.0
        cand = [(float(w[i]), i, 0.0) for i in ones]  # hits zero
        if frac > 0.0 and rest.size:
            i = int(rest[0])
            u[i] = frac
            cand.append((float(w[i]) / frac, i, 0.0))
            cand.append(((1.0 - float(w[i])) / (1.0 - frac), i, 1.0))
            rest = rest[1:]
        cand.extend((1.0 - float(w[i]), i, 1.0) for i in rest)  # hits one
        lam = min((c[0] for c in cand), default=1.0)
        if free.size <= 1 or lam >= 1.0 - 1e-12:
            # the residual is this vertex up to rounding
            atoms.append(u)
            weights.append(remaining)
            return atoms, weights
        if lam > 0.0:
            atoms.append(u)
            weights.append(remaining * lam)
            remaining *= 1.0 - lam
            w = np.clip((w - lam * u) / (1.0 - lam), 0.0, 1.0)
        # pin every coordinate that reached its bound at this step
        for val, i, target in cand:
            if val <= lam * (1.0 + 1e-12) + 1e-15:
                if target == 0.0:
                    w[i] = 0.0
                else:
                    w[i] = 1.0
                    pinned_top[i] = True
        w[pinned_top] = 1.0
        # project the free part back onto the budget so rounding cannot accumulate
        free = (w > 0.0) & ~pinned_top
        mass = float(w[free].sum())
        if mass > 0.0:
            w[free] = np.minimum(w[free] * (max(0.0, total - int(pinned_top.sum())) / mass), 1.0)
    raise RuntimeError(f"decomposition did not finish within {n_max(w.size)} atoms")


def decompose(v, s: int, theta: float) -> DecompositionCertificate:
    """Decompose ``v`` into s-sparse atoms; see the module docstring.

    Raises:
        HypothesisViolation: ``||v||_inf > theta`` or ``||v||_1 > s*theta``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("v must be one-dimensional")
    if not np.all(np.isfinite(v)):
        raise ValueError("v has non-finite entries")
    if s < 1 or not theta > 0:
        raise ValueError("need s >= 1 and theta > 0")
    inf_norm = float(np.max(np.abs(v), initial=0.0))
    l1_norm = float(np.sum(np.abs(v)))
    if inf_norm > theta * (1 + _SLACK):
        raise HypothesisViolation(f"||v||_inf = {inf_norm} exceeds theta = {theta}")
    if l1_norm > s * theta * (1 + _SLACK):
        raise HypothesisViolation(f"||v||_1 = {l1_norm} exceeds s*theta = {s * theta}")

    if np.count_nonzero(v) <= s:
        return DecompositionCertificate(np.ones(1), v[None, :].copy(), s, float(theta), v.copy())

    supp = np.flatnonzero(v)
    atoms, weights = _peel(np.minimum(np.abs(v[supp]) / theta, 1.0))
    full = np.zeros((len(atoms), v.size))
    full[:, supp] = np.asarray(atoms) * (theta * np.sign(v[supp]))
    return DecompositionCertificate(np.asarray(weights), full, s, float(theta), v.copy())


def verify_certificate(cert: DecompositionCertificate) -> tuple[bool, str | None]:
    """Check every certificate clause; return ``(ok, first violated clause)``."""
    lam = np.asarray(cert.weights, dtype=np.float64)
    U = np.asarray(cert.atoms, dtype=np.float64)
    v = np.asarray(cert.source, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != lam.size or U.shape[1] != v.size:
        return False, "shape mismatch"
    if np.any(lam < 0) or np.any(lam > 1):
        return False, "weight out of [0,1]"
    if abs(lam.sum() - 1.0) > 1e-10:
        return False, "weights do not sum to 1"
    off = v == 0
    tol = 1e-10 * max(1.0, cert.theta)  # absolute for theta <= 1, relative above
    l1 = float(np.abs(v).sum())
    for i, u in enumerate(U):
        if np.count_nonzero(u) > cert.s:
            return False, f"atom {i} is not {cert.s}-sparse"
        if np.any(u[off] != 0):
            return False, f"atom {i} leaves the support of v"
        if np.abs(u).sum() > l1 + tol:
            return False, f"atom {i} l1 norm exceeds ||v||_1"
        if np.max(np.abs(u), initial=0.0) > cert.theta + tol:
            return False, f"atom {i} exceeds theta"
    if np.max(np.abs(lam @ U - v), initial=0.0) > 1e-9 * max(1.0, float(np.max(np.abs(v), initial=0.0))):
        return False, "reconstruction mismatch"
    return True, None


def strip_phase(x) -> tuple[np.ndarray, np.ndarray]:
    """Split complex ``x`` into moduli and unit phases (phase 1 where x = 0)."""
    x = np.asarray(x, dtype=np.complex128)
    mag = np.abs(x)
    phase = np.where(mag > 0, x / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
    return mag, phase
