"""Complex Gaussian measurement ensembles and the quadratic measurement map.

Rows of the ensemble are the vectors ``a_j``; the map sends a Hermitian ``X``
to ``(a_j* X a_j)_j`` and a signal ``x`` to ``(|<a_j, x>|^2)_j``.

Sampling: rows are generated in fixed blocks of ``BLOCK`` rows. Block ``b``
draws from a PCG64 stream seeded by ``SeedSequence(seed, spawn_key=(b,))``,
using numpy's ziggurat normal sampler, so row ``j`` depends only on
``(seed, n, j)``. A longer ensemble with the same seed therefore extends a
shorter one row-for-row.
"""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DimensionMismatch, as_vector, hermitian, subseed

BLOCK = 256
GENERATOR_ID = "pcg64-ziggurat-block256-v1"
_MAGIC = b"CPRENS01"


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """``m`` measurement vectors of length ``n`` stored row-wise in ``vectors``."""

    vectors: np.ndarray
    seed: int | None = None
    generator: str = "custom"

    def __post_init__(self):
        V = np.array(self.vectors, dtype=np.complex128, order="C")
        if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] < 1:
            raise ValueError(f"ensemble must be a non-empty (m, n) array, got {V.shape}")
        V.flags.writeable = False
        object.__setattr__(self, "vectors", V)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MeasurementEnsemble):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.generator == other.generator
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )

    __hash__ = None


def sample_ensemble(n: int, m: int, seed: int) -> MeasurementEnsemble:
    """Draw ``m`` i.i.d. vectors with entries ``N(0, 1/2) + i N(0, 1/2)``."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    nblocks = -(-m // BLOCK)
    out = np.empty((nblocks * BLOCK, n), dtype=np.complex128)
    for b in range(nblocks):
        rng = np.random.Generator(np.random.PCG64(subseed(seed, b)))
        z = rng.standard_normal((BLOCK, n, 2))
        out[b * BLOCK:(b + 1) * BLOCK] = z.view(np.complex128)[..., 0]
    out *= np.sqrt(0.5)
    return MeasurementEnsemble(out[:m], seed=seed, generator=GENERATOR_ID)


def apply_map_matrix(E: MeasurementEnsemble, X) -> np.ndarray:
    """``(a_j* X a_j)_j`` for Hermitian ``X``."""
    X = hermitian(X)
    if X.shape[0] != E.n:
        raise DimensionMismatch(f"matrix is {X.shape[0]}x{X.shape[0]}, ensemble has n={E.n}")
    A = E.vectors
    vals = np.einsum("ji,ji->j", A.conj(), A @ X.T)
    if np.any(np.abs(vals.imag) > 1e-10 * (1.0 + np.abs(vals.real))):
        raise ArithmeticError("quadratic form has a non-negligible imaginary part")
    return vals.real.copy()


def apply_map_signal(E: MeasurementEnsemble, x) -> np.ndarray:
    """``(|<a_j, x>|^2)_j``."""
    x = as_vector(x)
    if x.size != E.n:
        raise DimensionMismatch(f"signal has length {x.size}, ensemble has n={E.n}")
    p = E.vectors.conj() @ x
    return p.real**2 + p.imag**2


class NoiseKind(str, enum.Enum):
    NONE = "none"
    GAUSSIAN_RESCALED = "gaussian_rescaled"
    ADVERSARIAL_SPHERE = "adversarial_sphere"


@dataclass(frozen=True)
class NoisyMeasurements:
    y: np.ndarray
    epsilon: float
    noise_kind: NoiseKind


def add_noise(clean, epsilon: float, noise_kind=NoiseKind.GAUSSIAN_RESCALED, seed: int = 0) -> NoisyMeasurements:
    """Add noise ``w`` with ``||w||_2 = epsilon`` (``w = 0`` for kind ``none``).

    ``gaussian_rescaled`` draws a standard Gaussian direction;
    ``adversarial_sphere`` points ``w`` along ``clean`` (uniform direction if
    ``clean`` is zero).
    """
    clean = np.asarray(clean, dtype=np.float64)
    kind = NoiseKind(noise_kind)
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    if kind is NoiseKind.NONE or epsilon == 0:
        return NoisyMeasurements(clean.copy(), float(epsilon), kind)
    if kind is NoiseKind.GAUSSIAN_RESCALED:
        w = np.random.default_rng(subseed(seed, 0)).standard_normal(clean.size)
    else:
        w = clean.copy() if np.any(clean) else np.ones_like(clean)
    w *= epsilon / np.linalg.norm(w)
    return NoisyMeasurements(clean + w, float(epsilon), kind)


# ------------------------------------------------------------------ file I/O
def save_ensemble(E: MeasurementEnsemble, path) -> None:
    """Write ``E`` as JSON (``.json`` suffix) or the binary format otherwise.

    Binary layout, little endian: 8-byte magic, u64 n, u64 m, u64 seed
    (all ones when absent), u32 length + utf-8 generator id, then ``m*n``
    interleaved re/im float64 pairs in row-major order.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = {
            "n": E.n,
            "m": E.m,
            "seed": E.seed,
            "generator": E.generator,
            "data": E.vectors.view(np.float64).ravel().tolist(),
        }
        path.write_text(json.dumps(doc))
        return
    gen = E.generator.encode()
    seed = 0xFFFFFFFFFFFFFFFF if E.seed is None else E.seed
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQQI", E.n, E.m, seed, len(gen)))
        fh.write(gen)
        fh.write(E.vectors.astype("<c16").tobytes())


def load_ensemble(path) -> MeasurementEnsemble:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        data = np.asarray(doc["data"], dtype=np.float64)
        V = data.view(np.complex128).reshape(doc["m"], doc["n"])
        return MeasurementEnsemble(V, seed=doc["seed"], generator=doc["generator"])
    raw = path.read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path} is not an ensemble file")
    n, m, seed, glen = struct.unpack_from("<QQQI", raw, 8)
    off = 8 + struct.calcsize("<QQQI")
    gen = raw[off:off + glen].decode()
    off += glen
    V = np.frombuffer(raw, dtype="<c16", count=n * m, offset=off).reshape(m, n)
    return MeasurementEnsemble(V, seed=None if seed == 0xFFFFFFFFFFFFFFFF else seed, generator=gen)
