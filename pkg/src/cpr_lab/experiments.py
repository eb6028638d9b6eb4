"""Experiment drivers behind the command line.

Each ``run_*`` function takes a resolved :class:`ExperimentConfig` and
returns a list of flat row dicts; :mod:`cpr_lab.cli` handles parsing and
report files. Every random quantity is derived from ``(seed, logical
index)`` so results do not depend on the number of workers.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds, decompose, ripcheck
from .core import aligned_distance, derive_int, dist_matrix, phase_align, subseed
from .measure import NoiseKind, add_noise, apply_map_signal, sample_ensemble
from .solver import SolverConfig, recover, residual_check

COMMANDS = ("ripcheck", "lemmas", "recover", "sweep-pt", "sweep-noise")
SUCCESS_RTOL = 1e-5


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    n: int = 64
    k: list = field(default_factory=lambda: [4])
    m: list | None = None
    multiplier: list = field(default_factory=lambda: [6.0])
    a: float | None = None
    epsilon: list = field(default_factory=lambda: [0.0])
    trials: int = 20
    samples: int = 10_000
    seed: int = 0
    noise: str = "gaussian_rescaled"
    paper_constants: bool = True
    constants_from: str | None = None
    max_iters: int = 2000
    restarts: int = 40
    out: str | None = None
    format: str = "csv"
    timestamp: bool = True
    svg: str | None = None
    break_tolerance: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        for name in ("k", "multiplier", "epsilon"):
            if not getattr(self, name):
                raise ConfigError(f"{name} grid is empty")
        if self.m is not None and (not self.m or any(v < 1 for v in self.m)):
            raise ConfigError("m values must be positive")
        if any(k < 1 or k > self.n for k in self.k):
            raise ConfigError(f"k must lie in [1, n={self.n}]")
        if any(v <= 0 for v in self.multiplier):
            raise ConfigError("multipliers must be positive")
        if any(e < 0 for e in self.epsilon):
            raise ConfigError("epsilon must be non-negative")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.command == "lemmas" and self.samples < 1000:
            raise ConfigError("lemmas needs at least 1000 Monte Carlo samples")
        if self.a is not None and self.a <= 0:
            raise ConfigError("a must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        try:
            NoiseKind(self.noise)
        except ValueError:
            raise ConfigError(f"unknown noise kind {self.noise!r}") from None
        if self.max_iters < 1 or self.restarts < 0:
            raise ConfigError("max_iters must be >= 1 and restarts >= 0")
        return self

    def m_grid(self, k: int) -> list[tuple[int, float | None]]:
        if self.m is not None:
            return [(int(m), None) for m in self.m]
        return [(ripcheck.measurements_for(self.n, k, mult), float(mult)) for mult in self.multiplier]

    def provenance(self) -> dict:
        d = asdict(self)
        for key in ("out", "svg", "break_tolerance"):
            d.pop(key)
        return d


def workers() -> int:
    cap = os.environ.get("CPR_LAB_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"CPR_LAB_THREADS must be an integer, got {cap!r}") from None
    return n


def _pmap(fn, tasks: list) -> list:
    # results come back in task order whatever the worker count
    nw = min(workers(), len(tasks))
    if nw <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * nw))))


# ------------------------------------------------------------------ helpers
def random_sparse_signal(n: int, k: int, seed) -> np.ndarray:
    """Unit-norm signal on a uniform k-subset with complex Gaussian entries."""
    rng = np.random.default_rng(seed)
    x = np.zeros(n, dtype=np.complex128)
    supp = rng.choice(n, size=k, replace=False)
    x[supp] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return x / np.linalg.norm(x)


def resolve_constants(cfg: ExperimentConfig) -> tuple[bounds.RipConstants, str]:
    if cfg.constants_from:
        c, C, src = _constants_from_report(cfg.constants_from)
    else:
        c, C, src = bounds.PAPER_C, bounds.PAPER_CU, "paper"
    a = cfg.a if cfg.a is not None else 2.0 * bounds.sufficient_a(c, C)
    return bounds.RipConstants(c, C, a, cfg.k[0]), src


def _constants_from_report(path: str) -> tuple[float, float, str]:
    try:
        text = open(path).read()
    except OSError as exc:
        raise ConfigError(f"cannot read constants report {path}: {exc}") from None
    if text.lstrip().startswith("["):
        row = json.loads(text)[0]
    else:
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        row = next(csv.DictReader(lines))
    try:
        c, C = float(row["lower_ratio"]), float(row["upper_ratio"])
    except (KeyError, ValueError):
        raise ConfigError(f"{path} has no lower_ratio/upper_ratio columns") from None
    return c, C, f"ripcheck:{path}"


# ------------------------------------------------------------------ ripcheck
def run_ripcheck(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for k in cfg.k:
        samples = ripcheck.draw_samples(cfg.n, k, cfg.samples, cfg.seed)
        for m, mult in cfg.m_grid(k):
            E = sample_ensemble(cfg.n, m, cfg.seed)
            est = ripcheck.estimate_rip(E, k, cfg.samples, cfg.seed, samples=samples)
            rows.append(
                {
                    "n": cfg.n,
                    "m": m,
                    "k": k,
                    "multiplier": mult,
                    "samples": est.num_samples,
                    "lower_ratio": est.lower_ratio,
                    "upper_ratio": est.upper_ratio,
                    "spread": est.spread,
                    "inside_paper_band": est.inside(),
                    "witness_summaries": est.to_record()["witness_summaries"],
                }
            )
    return rows


# ------------------------------------------------------------------ lemmas
def lemma31_instance(seed) -> tuple[np.ndarray, int, float]:
    """Random ``(v, s, theta)`` meeting the decomposition hypotheses.

    About a fifth of the instances sit exactly on ``||v||_1 = s*theta``.
    """
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(1, 51))
    s = int(rng.integers(1, dim + 1))
    theta = float(10.0 ** rng.uniform(-2, 2))
    v = rng.uniform(-theta, theta, dim)
    v[rng.random(dim) < rng.uniform(0, 0.6)] = 0.0
    if rng.random() < 0.3:
        # saturated entries
        hit = rng.random(dim) < 0.3
        v[hit] = theta * np.sign(rng.standard_normal(hit.sum()))
    l1 = np.abs(v).sum()
    if l1 > s * theta:
        v *= s * theta / l1
    elif l1 > 0 and rng.random() < 0.2 and np.count_nonzero(v) >= s:
        # push onto the boundary ||v||_1 = s*theta while staying inside the box
        gap = s * theta - l1
        room = theta - np.abs(v)
        room[v == 0] = 0.0
        if room.sum() > 0 and room.sum() >= gap:
            v += np.sign(v) * room * (gap / room.sum())
    return v, s, theta


def lemma32_pairs(count: int, seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random phase-aligned complex pairs, dimensions 1-20, norms in [0, 10]."""
    rng = np.random.default_rng(seed)
    dims = rng.integers(1, 21, size=count)
    out = []
    for d in range(1, 21):
        cnt = int(np.sum(dims == d))
        if not cnt:
            continue
        X = rng.standard_normal((cnt, d)) + 1j * rng.standard_normal((cnt, d))
        Y = rng.standard_normal((cnt, d)) + 1j * rng.standard_normal((cnt, d))
        X *= (rng.uniform(0, 10, cnt) / np.linalg.norm(X, axis=1))[:, None]
        Y *= (rng.uniform(0, 10, cnt) / np.linalg.norm(Y, axis=1))[:, None]
        # a quarter of the pairs are near-equal, where both sides of the inequality vanish
        near = rng.random(cnt) < 0.25
        jitter = 10.0 ** rng.uniform(-6, 0, (near.sum(), 1))
        Y[near] = X[near] * (1.0 + jitter) + jitter * Y[near] / 10.0
        X, _ = phase_align(X, Y)
        out.append((X, Y))
    return out


def run_lemmas(cfg: ExperimentConfig) -> tuple[list[dict], bool]:
    rows = []
    factor = -1.0 if cfg.break_tolerance else 1.0

    def row(check, param, samples, estimate, closed_form, deviation, tolerance, passed):
        rows.append(
            {
                "check": check,
                "param": param,
                "samples": samples,
                "estimate": estimate,
                "closed_form": closed_form,
                "deviation": deviation,
                "tolerance": tolerance,
                "passed": bool(passed),
            }
        )

    for i, t in enumerate(np.round(np.linspace(0.0, -1.0, 11), 12)):
        t = float(t)
        mean, se = ripcheck.lemma22_monte_carlo(t, cfg.samples, derive_int(cfg.seed, 22, i))
        exact = ripcheck.lemma22_closed_form(t)
        tol = factor * 3.0 * se
        row("lemma22_expectation", t, cfg.samples, mean, exact, abs(mean - exact), tol, abs(mean - exact) <= tol)

    lo, hi = ripcheck.EXPECTATION_BAND
    for i, case in enumerate(ripcheck.expectation_grid(21)):
        mean, se, ok = ripcheck.xi_expectation_bounds(case, cfg.samples, derive_int(cfg.seed, 23, i))
        exact = ripcheck.xi_closed_form(case)
        outside = max(lo - mean, mean - hi, 0.0)
        row("xi_expectation_band", case.t, cfg.samples, mean, exact, outside, 3.0 * se, ok)

    worst_rec, failures, max_atoms = 0.0, 0, 0
    for i in range(cfg.trials):
        v, s, theta = lemma31_instance(subseed(cfg.seed, 31, i))
        try:
            cert = decompose.decompose(v, s, theta)
            ok, _ = decompose.verify_certificate(cert)
        except (ValueError, RuntimeError):
            ok, cert = False, None
        failures += not ok
        if cert is not None:
            err = float(np.max(np.abs(cert.weights @ cert.atoms - v), initial=0.0))
            worst_rec = max(worst_rec, err / max(1.0, float(np.max(np.abs(v), initial=0.0))))
            max_atoms = max(max_atoms, cert.N)
    row("lemma31_certificates", "random", cfg.trials, failures, None, worst_rec, 1e-9, failures == 0 and worst_rec <= 1e-9)

    min_slack, total = math.inf, 0
    for X, Y in lemma32_pairs(100 * cfg.trials, subseed(cfg.seed, 32)):
        for P, Q in ((X, Y), (Y, X)):
            lhs, rhs, _ = bounds.lemma32_check(P, Q)
            min_slack = min(min_slack, float(np.min(lhs - rhs)))
            total += len(P)
    row("lemma32_inequality", "both_branches", total, min_slack, None, max(-min_slack, 0.0), 1e-10, min_slack >= -1e-10)

    a, b, t = np.meshgrid(np.linspace(0, 3, 200), np.linspace(0, 3, 200), np.linspace(0, 1, 50), indexing="ij")
    h = bounds.h_function(a, b, t)
    row("h_nonnegative_grid", "200x200x50", h.size, float(h.min()), None, max(-float(h.min()), 0.0), 1e-12, h.min() >= -1e-12)
    a2, b2 = a[..., 0], b[..., 0]
    e0 = np.max(np.abs(bounds.h_function(a2, b2, 0.0) - bounds.h_endpoint_zero(a2, b2)) / np.maximum(1.0, np.abs(bounds.h_endpoint_zero(a2, b2))))
    e1 = np.max(np.abs(bounds.h_function(a2, b2, 1.0) - bounds.h_endpoint_one(a2, b2)) / np.maximum(1.0, np.abs(bounds.h_endpoint_one(a2, b2))))
    row("h_endpoint_identities", "t=0,t=1", a2.size, float(max(e0, e1)), None, float(max(e0, e1)), 1e-10, max(e0, e1) <= 1e-10)
    return rows, all(r["passed"] for r in rows)


# ------------------------------------------------------------------ recovery
def recovery_trial(task: dict) -> dict:
    n, k, m, trial, seed = task["n"], task["k"], task["m"], task["trial"], task["seed"]
    E = sample_ensemble(n, m, derive_int(seed, 100, k, m, trial))
    x0 = random_sparse_signal(n, k, subseed(seed, 101, k, m, trial))
    clean = apply_map_signal(E, x0)
    eps = task["epsilon"]
    noisy = add_noise(clean, eps, task["noise"] if eps > 0 else NoiseKind.NONE, derive_int(seed, 102, k, m, trial))
    scfg = SolverConfig(
        k=k,
        seed=derive_int(seed, 103, k, m, trial),
        epsilon=eps,
        max_iters=task["max_iters"],
        restarts=task["restarts"],
    )
    res = recover(E, noisy.y, scfg)
    verr = aligned_distance(res.x_hat, x0)
    return {
        "trial": trial,
        "n": n,
        "k": k,
        "m": m,
        "epsilon": eps,
        "dist_matrix": dist_matrix(res.x_hat, x0),
        "vector_error": verr,
        "relative_error": verr / float(np.linalg.norm(x0)),
        "residual": res.residual,
        "residual_ok": residual_check(E, res.x_hat, noisy.y, eps),
        "iterations": res.iterations,
        "starts": res.starts,
        "converged": res.converged,
        "success": verr <= SUCCESS_RTOL * float(np.linalg.norm(x0)),
    }


def _tasks(cfg, k, m, eps, trials):
    return [
        {
            "n": cfg.n,
            "k": k,
            "m": m,
            "trial": t,
            "seed": cfg.seed,
            "epsilon": float(eps),
            "noise": cfg.noise,
            "max_iters": cfg.max_iters,
            "restarts": cfg.restarts,
        }
        for t in range(trials)
    ]


def run_recover(cfg: ExperimentConfig) -> list[dict]:
    k = cfg.k[0]
    m, _ = cfg.m_grid(k)[0]
    return _pmap(recovery_trial, _tasks(cfg, k, m, cfg.epsilon[0], cfg.trials))


def run_phase_transition(cfg: ExperimentConfig) -> list[dict]:
    cells = []
    for k in cfg.k:
        for m, mult in cfg.m_grid(k):
            cells.append((k, m, mult))
    cells.sort(key=lambda c: (c[0], c[1]))
    tasks = [t for k, m, _ in cells for t in _tasks(cfg, k, m, 0.0, cfg.trials)]
    results = _pmap(recovery_trial, tasks)
    rows = []
    for i, (k, m, mult) in enumerate(cells):
        chunk = results[i * cfg.trials:(i + 1) * cfg.trials]
        wins = sum(r["success"] for r in chunk)
        rows.append(
            {
                "n": cfg.n,
                "k": k,
                "m": m,
                "multiplier": mult,
                "trials": cfg.trials,
                "successes": wins,
                "success_rate": wins / cfg.trials,
            }
        )
    return rows


def run_noise_sweep(cfg: ExperimentConfig) -> list[dict]:
    k = cfg.k[0]
    m, mult = cfg.m_grid(k)[0]
    rc, source = resolve_constants(cfg)
    ok, margin = bounds.check_condition(rc)
    if not ok:
        raise ConfigError(f"constants (c={rc.c}, C={rc.C}, a={rc.a}) violate the stability condition (margin {margin:.4g})")
    eps_grid = sorted(float(e) for e in cfg.epsilon)
    tasks = [t for eps in eps_grid for t in _tasks(cfg, k, m, eps, cfg.trials)]
    results = _pmap(recovery_trial, tasks)
    rows = []
    for i, eps in enumerate(eps_grid):
        chunk = results[i * cfg.trials:(i + 1) * cfg.trials]
        dm = np.array([r["dist_matrix"] for r in chunk])
        ve = np.array([r["vector_error"] for r in chunk])
        sb = bounds.stability_bounds(rc, eps, m, cfg.n, 1.0)
        rows.append(
            {
                "n": cfg.n,
                "k": k,
                "m": m,
                "multiplier": mult,
                "epsilon": eps,
                "trials": cfg.trials,
                "mean_dist_matrix": float(dm.mean()),
                "max_dist_matrix": float(dm.max()),
                "mean_vector_error": float(ve.mean()),
                "max_vector_error": float(ve.max()),
                "residual_ok_rate": sum(r["residual_ok"] for r in chunk) / cfg.trials,
                "c": rc.c,
                "C": rc.C,
                "a": rc.a,
                "C1": sb.C1,
                "matrix_bound": sb.matrix_bound,
                "vector_bound": sb.vector_bound,
                "matrix_bound_satisfied": bool(dm.max() <= sb.matrix_bound + 1e-12),
                "vector_bound_satisfied": bool(ve.max() <= sb.vector_bound + 1e-12),
                "constants_source": source,
            }
        )
    return rows


def loglog_slope(eps, err) -> float:
    """Least-squares slope of log(err) against log(eps) over positive entries."""
    eps = np.asarray(eps, dtype=np.float64)
    err = np.asarray(err, dtype=np.float64)
    keep = (eps > 0) & (err > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points")
    return float(np.polyfit(np.log(eps[keep]), np.log(err[keep]), 1)[0])
