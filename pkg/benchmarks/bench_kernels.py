"""Time the numba and pure-numpy flavours of the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]

Each kernel is called once per backend before timing so JIT compilation
is excluded. Reports the best of R runs and checks that both backends
return the same numbers.
"""
import argparse
import timeit

import numpy as np

from cpr_lab import _kernels as K
from cpr_lab.measure import sample_ensemble


def _rip_inputs(n=64, k=4, m=67, S=10_000, seed=0):
    rng = np.random.default_rng(seed)
    A = sample_ensemble(n, m, seed).vectors
    supports = np.sort(np.argsort(rng.random((S, n)), axis=1)[:, :k], axis=1).astype(np.int64)
    u1 = rng.standard_normal((S, k)) + 1j * rng.standard_normal((S, k))
    u2 = rng.standard_normal((S, k)) + 1j * rng.standard_normal((S, k))
    phi = rng.uniform(0, 2 * np.pi, S)
    return A, supports, u1, u2, np.cos(phi), np.sin(phi)


def _moment_inputs(N=1_000_000, seed=0):
    z = np.random.default_rng(seed).standard_normal((N, 4))
    return z, np.array([1.0, 1.0, -0.5, -0.5])


def _grad_inputs(n=128, k=5, m=130, seed=0):
    rng = np.random.default_rng(seed)
    A = sample_ensemble(n, m, seed).vectors
    supp = np.sort(rng.choice(n, k, replace=False)).astype(np.int64)
    x = np.zeros(n, dtype=complex)
    x[supp] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    y = np.abs(A.conj() @ x) ** 2 * rng.uniform(0.9, 1.1, m)
    return A, x, y, supp


CASES = {
    "l1_ratios (S=10000, n=64, m=67)": (K.l1_ratios_numpy, K.l1_ratios_numba, _rip_inputs),
    "abs_quadratic_moments (N=1e6)": (K.abs_quadratic_moments_numpy, K.abs_quadratic_moments_numba, _moment_inputs),
    "loss_grad (n=128, k=5, m=130)": (K.loss_grad_numpy, K.loss_grad_numba, _grad_inputs),
}


def _best(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def _close(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=1e-9, atol=1e-12) for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'kernel':36s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}  agree")
    for name, (np_fn, nb_fn, make) in CASES.items():
        inputs = make()
        ref, got = np_fn(*inputs), nb_fn(*inputs)  # warm up / compile
        t_np = _best(np_fn, inputs, args.repeat)
        t_nb = _best(nb_fn, inputs, args.repeat)
        print(f"{name:36s} {t_np * 1e3:11.3f} {t_nb * 1e3:11.3f} {t_np / t_nb:8.2f}  {_close(ref, got)}")


if __name__ == "__main__":
    main()
