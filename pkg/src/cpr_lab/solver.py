"""Recovery of k-sparse complex signals from phaseless measurements.

The l1-constrained program has no off-the-shelf solver, so we use a sparse
surrogate: gradient descent on the intensity loss

    f(x) = (1/m) sum_j (|<a_j, x>|^2 - y_j)^2

followed by hard thresholding to the k largest moduli after every step,
started from a sparse spectral estimate. Nothing here claims to find the
global l1 minimiser; downstream experiments check the properties of the
returned point instead (residual, distance to the truth).

Starting points are tried in order until one reaches a point consistent
with the data (residual at most ``epsilon``, or an exact fit when
``epsilon = 0``): spectral estimates on widening candidate pools
``k, 2k, 3k, 4k, 6k, 8k, n``, then seeded random restarts around the
spectral estimate. The best point over all starts is returned.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import as_vector, subseed
from .measure import MeasurementEnsemble, apply_map_signal

log = logging.getLogger(__name__)

POOL_FACTORS = (1, 2, 3, 4, 6, 8)
_EXACT_FLOOR = 1e-26  # loss / mean(y)^2 regarded as an exact fit


class InitKind(str, enum.Enum):
    SPECTRAL_SPARSE = "spectral_sparse"
    GROUND_TRUTH_PERTURBED = "ground_truth_perturbed"
    RANDOM = "random"


class SolverDivergence(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class SolverConfig:
    k: int
    max_iters: int = 2000
    step_size: float | None = None  # None: 0.05 / mean(y)
    tol: float = 1e-12
    init_kind: InitKind = InitKind.SPECTRAL_SPARSE
    seed: int = 0
    restarts: int = 40
    epsilon: float = 0.0
    x_true: np.ndarray | None = None  # ground_truth_perturbed only
    perturbation: float = 0.0

    def __post_init__(self):
        self.init_kind = InitKind(self.init_kind)
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")
        if self.init_kind is InitKind.GROUND_TRUTH_PERTURBED and self.x_true is None:
            raise ValueError("ground_truth_perturbed needs x_true")


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    objective_trace: list[float]
    residual: float
    iterations: int
    converged: bool
    starts: int = 1
    init_used: str = ""
    l1_norm: float = field(init=False)

    def __post_init__(self):
        self.l1_norm = float(np.abs(self.x_hat).sum())


def hard_threshold(x: np.ndarray, k: int) -> np.ndarray:
    """Keep the ``k`` largest-modulus entries (ties to the lower index)."""
    if k >= x.size:
        return x.copy()
    keep = np.argsort(-np.abs(x), kind="stable")[:k]
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out


def intensity_loss(E: MeasurementEnsemble, x, y) -> float:
    r = apply_map_signal(E, x) - np.asarray(y, dtype=np.float64)
    return float(r @ r) / E.m


def intensity_grad(E: MeasurementEnsemble, x, y) -> np.ndarray:
    """Gradient of :func:`intensity_loss` as ``d/dRe(x) + i d/dIm(x)``."""
    x = as_vector(x)
    _, g = _kernels.loss_grad(E.vectors, x, np.asarray(y, dtype=np.float64), np.arange(x.size))
    return g


def spectral_scores(E: MeasurementEnsemble, y) -> np.ndarray:
    A = E.vectors
    return (np.asarray(y) @ (A.real**2 + A.imag**2)) / E.m


def spectral_init(E: MeasurementEnsemble, y, k: int, pool: int | None = None, power_iters: int = 200):
    """Sparse spectral estimate of the signal.

    Picks the ``pool`` (default ``k``) coordinates with the largest scores
    ``(1/m) sum_j y_j |a_ji|^2``, takes the leading eigenvector of
    ``(1/m) sum_j y_j a_jS a_jS*`` by power iteration, scales it by
    ``sqrt(mean(y))`` and hard-thresholds to ``k`` entries.

    Returns:
        tuple: ``(x0, ok)``; ``ok`` is false (and ``x0 = 0``) when ``y`` is all zero.
    """
    y = np.asarray(y, dtype=np.float64)
    n = E.n
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    pool = min(n, k if pool is None else max(pool, k))
    if not np.any(y):
        log.warning("all-zero measurements; spectral estimate is zero")
        return np.zeros(n, dtype=np.complex128), False
    S = np.sort(np.argsort(-spectral_scores(E, y), kind="stable")[:pool])
    As = E.vectors[:, S]
    M = (As.T * y) @ As.conj() / E.m
    # power iteration from a fixed start; M is PSD so it converges to the top eigenvector
    v = np.ones(pool, dtype=np.complex128) / math.sqrt(pool)
    for _ in range(power_iters):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        w /= nw
        if np.linalg.norm(w - v) < 1e-13:
            v = w
            break
        v = w
    x = np.zeros(n, dtype=np.complex128)
    x[S] = v * math.sqrt(y.mean())
    return hard_threshold(x, k), True


def residual_check(E: MeasurementEnsemble, x, y, epsilon: float) -> bool:
    return float(np.linalg.norm(apply_map_signal(E, x) - np.asarray(y))) <= epsilon + 1e-10


def _descend(E, y, x, cfg: SolverConfig, scale: float):
    A = E.vectors
    mu = cfg.step_size if cfg.step_size is not None else 0.05 / scale
    x = hard_threshold(x, cfg.k)
    f, g = _kernels.loss_grad(A, x, y, np.flatnonzero(x))
    f0 = f
    trace = [f]
    converged = False
    it = 0
    floor = _EXACT_FLOOR * scale * scale
    for it in range(1, cfg.max_iters + 1):
        if f <= floor:
            converged = True
            break
        for _ in range(21):
            xn = hard_threshold(x - mu * g, cfg.k)
            fn, gn = _kernels.loss_grad(A, xn, y, np.flatnonzero(xn))
            if fn <= f:
                break
            mu *= 0.5
        else:
            # no descent after 20 halvings: stationary for this support
            converged = True
            break
        if fn > 1e6 * max(f0, floor):
            raise SolverDivergence(f"objective grew to {fn:.3e}", trace + [fn])
        rel = (f - fn) / f if f > 0 else 0.0
        x, f, g = xn, fn, gn
        trace.append(f)
        mu *= 1.1
        if rel < cfg.tol:
            converged = True
            break
    return x, trace, it, converged


def _starts(E, y, cfg: SolverConfig, scale: float):
    n, k = E.n, cfg.k
    rng = np.random.default_rng(subseed(cfg.seed, 7))
    if cfg.init_kind is InitKind.GROUND_TRUTH_PERTURBED:
        xt = as_vector(cfg.x_true)
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        yield "ground_truth_perturbed", xt + cfg.perturbation * z / np.linalg.norm(z)
        return
    if cfg.init_kind is InitKind.SPECTRAL_SPARSE:
        for p in sorted({min(n, f * k) for f in POOL_FACTORS} | {n}):
            x0, ok = spectral_init(E, y, k, pool=p)
            if not ok:
                yield "spectral_sparse", x0
                return
            yield f"spectral_pool{p}", x0
    base = spectral_init(E, y, k, pool=2 * k)[0] if cfg.init_kind is InitKind.SPECTRAL_SPARSE else 0
    for r in range(cfg.restarts + (1 if cfg.init_kind is InitKind.RANDOM else 0)):
        z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(scale / n)
        yield f"restart{r}", hard_threshold(0.5 * base + z, k)


def recover(E: MeasurementEnsemble, y, cfg: SolverConfig) -> RecoveryResult:
    """Best k-sparse fit to ``y`` over the configured starting points."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (E.m,):
        raise ValueError(f"y has shape {y.shape}, expected ({E.m},)")
    if cfg.k > E.n:
        raise ValueError(f"k={cfg.k} exceeds n={E.n}")
    scale = float(y.mean()) if np.any(y) else 1.0
    target = max(cfg.epsilon, 0.0) ** 2 / E.m
    best = None
    starts = 0
    for label, x0 in _starts(E, y, cfg, scale):
        starts += 1
        x, trace, it, conv = _descend(E, y, x0, cfg, scale)
        if best is None or trace[-1] < best[1][-1]:
            best = (x, trace, it, conv, label)
        if trace[-1] <= max(target * (1 + 1e-9), _EXACT_FLOOR * scale * scale):
            break
    x, trace, it, conv, label = best
    res = float(np.linalg.norm(apply_map_signal(E, x) - y))
    return RecoveryResult(x, trace, res, it, conv, starts, label)
