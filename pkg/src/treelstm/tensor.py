"""Dense numeric substrate.

Vectors and matrices are plain float64 numpy arrays. The helpers here add the
dimension checks and seeded initialization the rest of the package relies on.

Randomness comes from :class:`Rng`, a thin wrapper over numpy's PCG64 bit
generator (PCG-XSL-RR 128/64). PCG64's output stream for a given seed is
fixed by numpy's documented stream-compatibility policy and does not depend on
platform or byte order, so seeded test vectors are portable.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

DTYPE = np.float64


class DimensionError(ValueError):
    """Raised when operand shapes are inconsistent."""


class Rng:
    """Seeded random stream (PCG64)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, salt: int) -> "Rng":
        """Derive an independent stream; deterministic in (seed, salt)."""
        return Rng(int(np.random.SeedSequence([self.seed, salt]).generate_state(1, np.uint64)[0]))


def vec(values) -> np.ndarray:
    v = np.asarray(values, dtype=DTYPE)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    return v


def affine_combine(
    W: Optional[np.ndarray],
    x: Optional[np.ndarray],
    U_terms: Sequence[Tuple[np.ndarray, np.ndarray]],
    b: np.ndarray,
) -> np.ndarray:
    """Return ``W @ x + sum(U_k @ h_k) + b``.

    ``W`` and ``x`` may both be ``None`` (no input contribution). Every operand
    is checked against the bias length ``d`` and a :class:`DimensionError`
    names the first one that does not fit.
    """
    if (W is None) != (x is None):
        raise DimensionError("W and x must be given together")
    d = b.shape[0]
    out = np.array(b, dtype=DTYPE, copy=True)
    if W is not None:
        if W.ndim != 2 or W.shape[0] != d:
            raise DimensionError(f"W has shape {W.shape}, expected ({d}, e)")
        if x.shape != (W.shape[1],):
            raise DimensionError(f"x has shape {x.shape}, expected ({W.shape[1]},)")
        out += W @ x
    for k, (U, h) in enumerate(U_terms):
        if U.shape != (d, d):
            raise DimensionError(f"U[{k}] has shape {U.shape}, expected ({d}, {d})")
        if h.shape != (d,):
            raise DimensionError(f"h[{k}] has shape {h.shape}, expected ({d},)")
        out += U @ h
    return out


def sigmoid(v):
    return expit(v)


def elementwise(v: np.ndarray, kind: str) -> np.ndarray:
    if kind == "sigmoid":
        return expit(v)
    if kind == "tanh":
        return np.tanh(v)
    raise ValueError(f"unknown nonlinearity {kind!r}")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(f"hadamard operands differ: {a.shape} vs {b.shape}")
    return a * b


def init_mat(rows: int, cols: int, scale: float, rng: Rng) -> np.ndarray:
    """Entries i.i.d. uniform on ``[-scale, scale]``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return rng.uniform(-scale, scale, (rows, cols))


def init_array(shape, scale: float, rng: Rng) -> np.ndarray:
    if scale <= 0:
        raise ValueError("scale must be positive")
    return rng.uniform(-scale, scale, tuple(shape))


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def log_softmax(z: np.ndarray) -> np.ndarray:
    s = z - np.max(z)
    return s - np.log(np.exp(s).sum())


def dropout_mask(n: int, rate: float, rng: Rng) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability ``rate``, survivors ``1/(1-rate)``."""
    return (rng.random(n) >= rate) / (1.0 - rate)
