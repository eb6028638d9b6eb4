"""Empirical restricted-isometry checks over rank-2, row-sparse Hermitian matrices.

The constraint set is the unit-Frobenius, rank <= 2, k-row-sparse Hermitian
matrices, parametrised as ``X = lam1 u1 u1* + lam2 u2 u2*`` with
``lam1^2 + lam2^2 = 1`` and orthonormal ``u1, u2`` supported on at most k
coordinates. Sampling it only ever gives a necessary-condition check on the
isometry constants: extremes over samples, never a certificate over the set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import subseed
from .measure import MeasurementEnsemble

PAPER_LOWER = 0.12
PAPER_UPPER = 2.45
EXPECTATION_BAND = (0.57, 2.0)
_MAX_COND = 1e8


@dataclass(frozen=True, eq=False)
class LowRankSparseHermitian:
    """``lam1 u1 u1* + lam2 u2 u2*`` with both vectors living on ``support``.

    ``u1``/``u2`` are full length-``n`` vectors. A rank-one element
    (``lam2 == 0``, forced when k = 1) may carry ``u2 = 0``.
    """

    lambda1: float
    lambda2: float
    u1: np.ndarray
    u2: np.ndarray
    support: np.ndarray
    n: int
    label: str = "random"

    def validate(self) -> None:
        if abs(self.lambda1**2 + self.lambda2**2 - 1.0) > 1e-12:
            raise ValueError("lambda1^2 + lambda2^2 must equal 1")
        if abs(np.linalg.norm(self.u1) - 1.0) > 1e-10:
            raise ValueError("u1 is not unit norm")
        rank_one = self.lambda2 == 0.0 and not np.any(self.u2)
        if not rank_one:
            if abs(np.linalg.norm(self.u2) - 1.0) > 1e-10:
                raise ValueError("u2 is not unit norm")
            if abs(np.vdot(self.u1, self.u2)) > 1e-10:
                raise ValueError("u1 and u2 are not orthogonal")
        off = np.ones(self.n, dtype=bool)
        off[self.support] = False
        if np.any(self.u1[off]) or np.any(self.u2[off]):
            raise ValueError("vectors leak outside the support")

    @property
    def k(self) -> int:
        return int(self.support.size)

    def summary(self) -> dict:
        return {
            "label": self.label,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "support": [int(i) for i in self.support],
        }


def realize(Xp: LowRankSparseHermitian) -> np.ndarray:
    """Dense Hermitian matrix of an element of the constraint set."""
    X = Xp.lambda1 * np.outer(Xp.u1, Xp.u1.conj()) + Xp.lambda2 * np.outer(Xp.u2, Xp.u2.conj())
    return 0.5 * (X + X.conj().T)


def _orthonormal_pair(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # modified Gram-Schmidt, second pass for orthogonality at ~1e-16
    q1 = G[:, 0] / np.linalg.norm(G[:, 0])
    q2 = G[:, 1].copy()
    for _ in range(2):
        q2 -= np.vdot(q1, q2) * q1
    q2 /= np.linalg.norm(q2)
    return q1, q2


def sample_X(n: int, k: int, seed) -> LowRankSparseHermitian:
    """Random element with support of size ``k``.

    The support is a uniform k-subset; the vectors orthonormalise a k x 2
    complex Gaussian block (redrawn if its condition number exceeds 1e8) and
    ``(lam1, lam2)`` is uniform on the unit circle. ``k = 1`` yields the
    rank-one element ``+-e_T e_T*`` up to phase. ``seed`` may be an int,
    a ``SeedSequence`` or a ``Generator``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    rng = np.random.default_rng(seed)
    supp = np.sort(rng.choice(n, size=k, replace=False))
    u1 = np.zeros(n, dtype=np.complex128)
    u2 = np.zeros(n, dtype=np.complex128)
    if k == 1:
        u1[supp] = np.exp(2j * np.pi * rng.random())
        lam1 = 1.0 if rng.random() < 0.5 else -1.0
        return LowRankSparseHermitian(lam1, 0.0, u1, u2, supp, n)
    while True:
        G = (rng.standard_normal((k, 2)) + 1j * rng.standard_normal((k, 2))) / np.sqrt(2)
        if np.linalg.cond(G) <= _MAX_COND:
            break
    q1, q2 = _orthonormal_pair(G)
    u1[supp], u2[supp] = q1, q2
    phi = 2.0 * np.pi * rng.random()
    return LowRankSparseHermitian(math.cos(phi), math.sin(phi), u1, u2, supp, n)


def forced_probes(n: int, k: int, seed) -> list[LowRankSparseHermitian]:
    """Deterministic edge cases added to every RIP estimate.

    Rank-one (both signs), trace-zero ``lam2 = -lam1`` on the first k
    coordinates and on a random support, and the balanced ``lam1 = lam2``
    case. The trace-zero family sits where the expectation of the ratio is
    smallest.
    """
    rng = np.random.default_rng(seed)
    first = np.arange(min(k, n))
    probes = []
    e = np.zeros(n, dtype=np.complex128)
    e[0] = 1.0
    zero = np.zeros(n, dtype=np.complex128)
    probes.append(LowRankSparseHermitian(1.0, 0.0, e, zero, first[:1], n, "rank1_pos"))
    probes.append(LowRankSparseHermitian(-1.0, 0.0, e, zero, first[:1], n, "rank1_neg"))
    if k >= 2:
        h = math.sqrt(0.5)
        for lam2, label, supp in (
            (-h, "trace_zero_first_k", first),
            (h, "balanced_first_k", first),
            (-h, "trace_zero_random", np.sort(rng.choice(n, size=k, replace=False))),
        ):
            G = (rng.standard_normal((k, 2)) + 1j * rng.standard_normal((k, 2))) / np.sqrt(2)
            q1, q2 = _orthonormal_pair(G)
            u1 = np.zeros(n, dtype=np.complex128)
            u2 = np.zeros(n, dtype=np.complex128)
            u1[supp], u2[supp] = q1, q2
            probes.append(LowRankSparseHermitian(h, lam2, u1, u2, supp, n, label))
    return probes


def _pack(samples: list[LowRankSparseHermitian]):
    k = max(s.k for s in samples)
    S = len(samples)
    supports = np.zeros((S, k), dtype=np.int64)
    U1 = np.zeros((S, k), dtype=np.complex128)
    U2 = np.zeros((S, k), dtype=np.complex128)
    for i, s in enumerate(samples):
        # pad short supports by repeating index 0 with zero weight
        supports[i, : s.k] = s.support
        U1[i, : s.k] = s.u1[s.support]
        U2[i, : s.k] = s.u2[s.support]
    lam1 = np.array([s.lambda1 for s in samples])
    lam2 = np.array([s.lambda2 for s in samples])
    return supports, U1, U2, lam1, lam2


def l1_ratio(E: MeasurementEnsemble, Xs) -> np.ndarray | float:
    """``(1/m)||A(X)||_1`` for one element or a list of elements."""
    single = isinstance(Xs, LowRankSparseHermitian)
    samples = [Xs] if single else list(Xs)
    for s in samples:
        if s.n != E.n:
            raise ValueError(f"element has n={s.n}, ensemble has n={E.n}")
    r = _kernels.l1_ratios(E.vectors, *_pack(samples))
    return float(r[0]) if single else r


@dataclass
class RipEstimate:
    lower_ratio: float
    upper_ratio: float
    num_samples: int
    worst_low: LowRankSparseHermitian
    worst_high: LowRankSparseHermitian
    n: int
    m: int
    k: int
    seed: int
    ratios: np.ndarray = field(repr=False)

    @property
    def spread(self) -> float:
        return self.upper_ratio - self.lower_ratio

    def inside(self, lower: float = PAPER_LOWER, upper: float = PAPER_UPPER) -> bool:
        return lower <= self.lower_ratio and self.upper_ratio <= upper

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "seed": self.seed,
            "num_samples": self.num_samples,
            "lower_ratio": self.lower_ratio,
            "upper_ratio": self.upper_ratio,
            "witness_summaries": {
                "low": self.worst_low.summary(),
                "high": self.worst_high.summary(),
            },
            "note": "extremes over sampled elements; a necessary-condition check, not a certificate",
        }


def draw_samples(n: int, k: int, num_samples: int, seed: int, probes: bool = True) -> list[LowRankSparseHermitian]:
    out = forced_probes(n, k, subseed(seed, 1)) if probes else []
    out.extend(sample_X(n, k, subseed(seed, 0, i)) for i in range(num_samples))
    return out


def estimate_rip(
    E: MeasurementEnsemble,
    k: int,
    num_samples: int,
    seed: int,
    probes: bool = True,
    samples: list[LowRankSparseHermitian] | None = None,
) -> RipEstimate:
    """Extremes of ``(1/m)||A(X)||_1`` over sampled unit-norm elements.

    ``num_samples`` random elements are drawn, plus the forced probes unless
    ``probes`` is false. A precomputed ``samples`` list overrides both.
    """
    if k > E.n:
        raise ValueError(f"k={k} exceeds n={E.n}")
    if samples is None:
        if num_samples < 1:
            raise ValueError("num_samples must be at least 1")
        samples = draw_samples(E.n, k, num_samples, seed, probes)
    ratios = l1_ratio(E, samples)
    lo, hi = int(np.argmin(ratios)), int(np.argmax(ratios))
    return RipEstimate(
        lower_ratio=float(ratios[lo]),
        upper_ratio=float(ratios[hi]),
        num_samples=len(samples),
        worst_low=samples[lo],
        worst_high=samples[hi],
        n=E.n,
        m=E.m,
        k=k,
        seed=seed,
        ratios=ratios,
    )


def measurements_for(n: int, k: int, multiplier: float) -> int:
    """``ceil(multiplier * k * ln(n / k))``, at least 1."""
    return max(1, math.ceil(multiplier * k * math.log(n / k)))


# ------------------------------------------------------- expectation checks
def lemma22_closed_form(t: float) -> float:
    """``E|z1^2 + z2^2 + t z3^2 + t z4^2| = 2 (1 + t^2) / (1 - t)`` for standard normals."""
    if not -1.0 <= t <= 0.0:
        raise ValueError(f"t must lie in [-1, 0], got {t}")
    return 2.0 * (1.0 + t * t) / (1.0 - t)


def _abs_quadratic_mc(coeffs, variance: float, num_samples: int, seed: int) -> tuple[float, float]:
    rng = np.random.default_rng(subseed(seed, 22))
    z = rng.standard_normal((num_samples, len(coeffs))) * math.sqrt(variance)
    mean, std = _kernels.abs_quadratic_moments(z, np.asarray(coeffs, dtype=np.float64))
    return mean, std / math.sqrt(num_samples)


def lemma22_monte_carlo(t: float, num_samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``|z1^2 + z2^2 + t z3^2 + t z4^2|``, z ~ N(0, 1)."""
    if num_samples < 1000:
        raise ValueError("use at least 1000 samples")
    return _abs_quadratic_mc((1.0, 1.0, t, t), 1.0, num_samples, seed)


@dataclass(frozen=True)
class ExpectationCase:
    t: float
    lambda1_abs: float

    def __post_init__(self):
        if abs(self.t) > 1.0:
            raise ValueError("|t| must be at most 1")
        if not math.sqrt(0.5) - 1e-12 <= self.lambda1_abs <= 1.0 + 1e-12:
            raise ValueError("|lambda1| must lie in [sqrt(2)/2, 1]")
        if abs(self.lambda1_abs**2 * (1.0 + self.t**2) - 1.0) > 1e-9:
            raise ValueError("lambda1^2 (1 + t^2) must equal 1")

    @classmethod
    def from_t(cls, t: float) -> "ExpectationCase":
        return cls(t, 1.0 / math.sqrt(1.0 + t * t))


def xi_closed_form(case: ExpectationCase) -> float | None:
    """Exact ``E(xi)`` where it is known: t in [-1, 0] (via the closed form) and t = 1."""
    if case.t <= 0:
        return case.lambda1_abs * 0.5 * lemma22_closed_form(case.t)
    if case.t == 1.0:
        return 2.0 * case.lambda1_abs
    return None


def xi_expectation_bounds(case: ExpectationCase, num_samples: int, seed: int) -> tuple[float, float, bool]:
    """Monte Carlo ``E(xi)``, ``xi = |lam1| |z1^2 + z2^2 + t z3^2 + t z4^2|``, z ~ N(0, 1/2).

    Returns ``(mean, stderr, in_bounds)`` with ``in_bounds`` testing the
    band [0.57, 2] widened by three standard errors.
    """
    mean, se = _abs_quadratic_mc((1.0, 1.0, case.t, case.t), 0.5, num_samples, seed)
    mean *= case.lambda1_abs
    se *= case.lambda1_abs
    lo, hi = EXPECTATION_BAND
    return mean, se, bool(lo - 3 * se <= mean <= hi + 3 * se)


def expectation_grid(num: int = 21) -> list[ExpectationCase]:
    return [ExpectationCase.from_t(round(float(t), 12)) for t in np.linspace(-1.0, 1.0, num)]
