"""Dense float64 numerics, activations and the seeded RNG contract.

Matrices and vectors are plain ``numpy.ndarray`` objects of dtype float64.
Randomness always flows through an explicit :class:`numpy.random.Generator`
built on the PCG64 bit generator, so a seed plus a call sequence pins every
sampled value.
"""

import numpy as np

DTYPE = np.float64


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or Inf."""


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` (a 64-bit unsigned integer)."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, index: int) -> int:
    """Seed for the ``index``-th independent job derived from ``seed``."""
    return (seed + index) % 2**64


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=DTYPE)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    arr = np.asarray(a, dtype=DTYPE)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def check_finite(a: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} contains non-finite values")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product of ``a`` (m x n) and ``b`` (n x k)."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return check_finite(a @ b, "matmul")


def sigmoid(x):
    """Logistic function ``1 / (1 + exp(-x))``, overflow-free for any finite input.

    Accepts scalars or arrays; returns the same kind.
    """
    x = np.asarray(x, dtype=DTYPE)
    # exp is only ever taken of -|x|
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return out[()] if out.ndim == 0 else out


def bernoulli_sample(p, rng: np.random.Generator) -> np.ndarray:
    """Independent 0/1 draws with success probabilities ``p`` (any shape)."""
    p = np.asarray(p, dtype=DTYPE)
    if np.any(~(p >= 0.0) | ~(p <= 1.0)):
        raise ValueError("bernoulli probabilities must lie in [0, 1]")
    return (rng.random(p.shape) < p).astype(DTYPE)


def gaussian_init(rows: int, cols: int, std: float, rng: np.random.Generator) -> np.ndarray:
    """``rows x cols`` matrix with i.i.d. Normal(0, std**2) entries."""
    if std < 0:
        raise ValueError(f"std must be non-negative, got {std}")
    if std == 0:
        return np.zeros((rows, cols), dtype=DTYPE)
    return rng.normal(0.0, std, size=(rows, cols))
