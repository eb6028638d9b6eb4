"""Stability-bound formulas for l1 recovery under the rank-2 isometry property.

With isometry constants ``c <= C`` of order ``(2, 2ak)``, recovery is stable
when ``c - 4C/sqrt(a) - C/a > 0``; the error constant is

    C1 = (1/a + 4/sqrt(a) + 1) / (c - 4C/sqrt(a) - C/a)

and a minimiser ``x#`` under noise level ``eps`` obeys
``||x# x#* - x0 x0*||_F <= 2 C1 eps / sqrt(m)`` and

    min_c ||c x# - x0|| <= min(2 sqrt(2) C1 eps / (sqrt(m) ||x0||),
                               2 sqrt(2 sqrt(2) C1) sqrt(eps) (n/m)^(1/4)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PAPER_C = 0.12
PAPER_CU = 2.45


class ConditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class RipConstants:
    c: float
    C: float
    a: float
    k: int = 1

    def __post_init__(self):
        if not (0 < self.c <= self.C):
            raise ValueError(f"need 0 < c <= C, got c={self.c}, C={self.C}")
        if not self.a > 0:
            raise ValueError(f"oversampling factor must be positive, got {self.a}")

    @classmethod
    def paper(cls, a: float | None = None, k: int = 1) -> "RipConstants":
        return cls(PAPER_C, PAPER_CU, sufficient_a(PAPER_C, PAPER_CU) * 2 if a is None else a, k)


def sufficient_a(c: float, C: float) -> float:
    """``(8C/c)^2``: beyond it, ``4C/sqrt(a) = c/2`` at most and the condition holds."""
    return (8.0 * C / c) ** 2


def critical_a(c: float, C: float) -> float:
    """The root of ``c - 4C/sqrt(a) - C/a = 0``; the condition holds exactly for larger a."""
    s = -2.0 + math.sqrt(4.0 + c / C)  # s = 1/sqrt(a) solves C s^2 + 4C s - c = 0
    return 1.0 / (s * s)


def condition_margin(rc: RipConstants) -> float:
    return rc.c - 4.0 * rc.C / math.sqrt(rc.a) - rc.C / rc.a


def check_condition(rc: RipConstants) -> tuple[bool, float]:
    margin = condition_margin(rc)
    return margin > 0, margin


def c1(rc: RipConstants) -> float:
    ok, margin = check_condition(rc)
    if not ok:
        raise ConditionViolated(f"c - 4C/sqrt(a) - C/a = {margin:.6g} <= 0")
    return (1.0 / rc.a + 4.0 / math.sqrt(rc.a) + 1.0) / margin


@dataclass(frozen=True)
class StabilityBound:
    C1: float
    matrix_bound: float
    vector_bound: float
    vector_bound_first: float | None
    vector_bound_second: float
    epsilon: float
    m: int
    n: int
    norm_x0: float


def stability_bounds(rc: RipConstants, epsilon: float, m: int, n: int, norm_x0: float) -> StabilityBound:
    """Matrix and vector error bounds; the first vector branch needs ``norm_x0 > 0``."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    K = c1(rc)
    matrix = 2.0 * K * epsilon / math.sqrt(m)
    second = 2.0 * math.sqrt(2.0 * math.sqrt(2.0) * K) * math.sqrt(epsilon) * (n / m) ** 0.25
    if norm_x0 > 0:
        first = 2.0 * math.sqrt(2.0) * K * epsilon / (math.sqrt(m) * norm_x0)
        vector = min(first, second)
    elif epsilon == 0:
        first, vector = 0.0, 0.0
    else:
        first, vector = None, second
    return StabilityBound(K, matrix, vector, first, second, float(epsilon), m, n, float(norm_x0))


def lemma32_check(x, y, slack: float = 1e-10):
    """Check ``||xx* - yy*||_F^2 >= 1/2 max(||x||^2, ||y||^2) ||x - y||^2``.

    Requires ``<x, y>`` real and non-negative (phase-align first). Leading
    axes are a batch; returns ``(lhs, rhs, holds)``.
    """
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    ip = np.sum(x.conj() * y, axis=-1)
    nx = np.sum(np.abs(x) ** 2, axis=-1)
    ny = np.sum(np.abs(y) ** 2, axis=-1)
    scale = 1.0 + np.sqrt(nx * ny)
    if np.any(np.abs(ip.imag) > 1e-10 * scale) or np.any(ip.real < -1e-12 * scale):
        raise ValueError("<x, y> must be real and non-negative; phase-align the pair first")
    D = x[..., :, None] * x[..., None, :].conj() - y[..., :, None] * y[..., None, :].conj()
    lhs = np.sum(np.abs(D) ** 2, axis=(-2, -1))
    rhs = 0.5 * np.maximum(nx, ny) * np.sum(np.abs(x - y) ** 2, axis=-1)
    holds = lhs >= rhs - slack
    if x.ndim == 1:
        return float(lhs), float(rhs), bool(holds)
    return lhs, rhs, holds


def h_function(a_val, b_val, t_val):
    """``a^4 + b^4 - 2(ab)^2 t^2 - a^2 (a^2 + b^2 - 2abt) / 2`` on a, b >= 0, t in [0, 1]."""
    a = np.asarray(a_val, dtype=np.float64)
    b = np.asarray(b_val, dtype=np.float64)
    t = np.asarray(t_val, dtype=np.float64)
    if np.any(a < 0) or np.any(b < 0) or np.any(t < 0) or np.any(t > 1):
        raise ValueError("h is defined for a, b >= 0 and t in [0, 1]")
    h = a**4 + b**4 - 2.0 * (a * b) ** 2 * t**2 - 0.5 * a**2 * (a**2 + b**2 - 2.0 * a * b * t)
    return float(h) if h.ndim == 0 else h


def h_endpoint_zero(a, b):
    return 0.5 * (a**2 - 0.5 * b**2) ** 2 + 0.875 * b**4


def h_endpoint_one(a, b):
    return (a - b) ** 2 * (0.5 * a**2 + b**2 + 2.0 * a * b)
