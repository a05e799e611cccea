"""Binary restricted Boltzmann machine trained with contrastive divergence.

Parameters are stored in the usual sign convention::

    E(v, h) = -(v^T W h + b^T v + c^T h)
    P(h_j = 1 | v) = sigmoid(c_j + W[:, j] . v)
    P(v_i = 1 | h) = sigmoid(b_i + W[i, :] . h)

Writing the energy as ``v^T W h + b^T v + c^T h`` (all signs positive) gives
the same distributions with every parameter negated; :meth:`RbmParams.from_positive_form`
and :meth:`RbmParams.to_positive_form` convert between the two. Under the stored
convention the update ``dW = lr * (<v h^T>_data - <v' h'^T>_recon)`` climbs the
log-likelihood.

Real-valued visibles in [0, 1] are accepted everywhere and treated as Bernoulli
means.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    DTYPE,
    NonFiniteError,
    as_matrix,
    as_vector,
    bernoulli_sample,
    gaussian_init,
    sigmoid,
)

logger = logging.getLogger(__name__)

#: Largest n_visible + n_hidden accepted by the enumeration routines.
MAX_ENUMERATION_UNITS = 24

INIT_WEIGHT_STD = 0.01


class TrainingDivergedError(RuntimeError):
    """A training step produced non-finite parameters or loss."""


@dataclass
class RbmParams:
    """Weights ``W`` (n_visible x n_hidden), visible bias ``b``, hidden bias ``c``."""

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.W = as_matrix(self.W, "W")
        self.b = as_vector(self.b, "b")
        self.c = as_vector(self.c, "c")
        if self.W.shape != (self.b.size, self.c.size):
            raise ValueError(
                f"W has shape {self.W.shape} but b, c imply "
                f"({self.b.size}, {self.c.size})"
            )

    @property
    def n_visible(self) -> int:
        return self.b.size

    @property
    def n_hidden(self) -> int:
        return self.c.size

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmParams":
        return cls(
            np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden)
        )

    @classmethod
    def from_positive_form(cls, W, b, c) -> "RbmParams":
        """Build from parameters written for the all-positive energy form."""
        return cls(-as_matrix(W, "W"), -as_vector(b, "b"), -as_vector(c, "c"))

    def to_positive_form(self):
        """Return ``(W, b, c)`` for the all-positive energy form."""
        return -self.W, -self.b, -self.c

    def copy(self) -> "RbmParams":
        return RbmParams(self.W.copy(), self.b.copy(), self.c.copy())

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.W))
            and np.all(np.isfinite(self.b))
            and np.all(np.isfinite(self.c))
        )


def init_rbm(n_visible: int, n_hidden: int, rng: np.random.Generator) -> RbmParams:
    """Normal(0, 0.01**2) weights and zero biases."""
    W = gaussian_init(n_visible, n_hidden, INIT_WEIGHT_STD, rng)
    return RbmParams(W, np.zeros(n_visible), np.zeros(n_hidden))


@dataclass
class CdConfig:
    """Contrastive-divergence settings.

    ``learning_rate`` may be 0, which turns training into the identity.

    The Gibbs chain itself is always driven by sampled hidden states. The
    three flags choose what enters the gradient statistics:

    * ``positive_hidden_as_probability``: P(h|v) instead of the sampled h;
    * ``reconstruction_as_probability``: P(v'|h) instead of a sampled v';
    * ``final_hidden_as_probability``: P(h'|v') instead of a sampled h'.

    With all three off every statistic comes from samples.
    """

    learning_rate: float = 0.90
    momentum: float = 0.05
    epochs: int = 100
    batch_size: int = 100
    k: int = 1
    positive_hidden_as_probability: bool = True
    reconstruction_as_probability: bool = True
    final_hidden_as_probability: bool = True

    def __post_init__(self):
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in [0, 1], got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class Velocity:
    """Momentum accumulator matching an :class:`RbmParams` shape."""

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros_like(cls, params: RbmParams) -> "Velocity":
        return cls(
            np.zeros_like(params.W), np.zeros_like(params.b), np.zeros_like(params.c)
        )


def _binary_vector(x, n: int, name: str) -> np.ndarray:
    x = as_vector(x, name)
    if x.size != n:
        raise ValueError(f"{name} has length {x.size}, expected {n}")
    return x


def energy(params: RbmParams, v, h) -> float:
    """Energy of the joint configuration ``(v, h)``."""
    v = _binary_vector(v, params.n_visible, "v")
    h = _binary_vector(h, params.n_hidden, "h")
    return float(-(v @ params.W @ h + params.b @ v + params.c @ h))


def _check_enumerable(params: RbmParams):
    n = params.n_visible + params.n_hidden
    if n > MAX_ENUMERATION_UNITS:
        raise ValueError(
            f"exact enumeration needs n_visible + n_hidden <= {MAX_ENUMERATION_UNITS}, got {n}"
        )


def binary_states(n: int) -> np.ndarray:
    """All ``2**n`` binary vectors of length ``n`` as rows, in counting order."""
    if n == 0:
        return np.zeros((1, 0), dtype=DTYPE)
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)), dtype=DTYPE)


def _energy_table(params: RbmParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    V = binary_states(params.n_visible)
    H = binary_states(params.n_hidden)
    E = -(V @ params.W @ H.T + (V @ params.b)[:, None] + (H @ params.c)[None, :])
    return V, H, E


def partition_function(params: RbmParams) -> float:
    """Sum of ``exp(-E)`` over every binary ``(v, h)``. Small instances only."""
    _check_enumerable(params)
    _, _, E = _energy_table(params)
    return float(np.exp(-E).sum())


def joint_probability(params: RbmParams, v, h) -> float:
    """``exp(-E(v, h)) / Z`` by exhaustive enumeration."""
    _check_enumerable(params)
    return float(np.exp(-energy(params, v, h)) / partition_function(params))


def joint_table(params: RbmParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(V, H, P)`` with ``P[i, j] = P(V[i], H[j])``."""
    _check_enumerable(params)
    V, H, E = _energy_table(params)
    # shift by the minimum energy before exponentiating
    w = np.exp(-(E - E.min()))
    return V, H, w / w.sum()


def hidden_given_visible(params: RbmParams, v) -> np.ndarray:
    """P(h_j = 1 | v) for each hidden unit. ``v`` may be a vector or a batch of rows."""
    v = np.asarray(v, dtype=DTYPE)
    if v.shape[-1] != params.n_visible:
        raise ValueError(f"visible input has width {v.shape[-1]}, expected {params.n_visible}")
    return sigmoid(v @ params.W + params.c)


def visible_given_hidden(params: RbmParams, h) -> np.ndarray:
    """P(v_i = 1 | h) for each visible unit. ``h`` may be a vector or a batch of rows."""
    h = np.asarray(h, dtype=DTYPE)
    if h.shape[-1] != params.n_hidden:
        raise ValueError(f"hidden input has width {h.shape[-1]}, expected {params.n_hidden}")
    return sigmoid(h @ params.W.T + params.b)


def _check_visible_data(x: np.ndarray, n_visible: int, what: str):
    if x.ndim != 2 or x.shape[1] != n_visible:
        raise ValueError(f"{what} must have shape (n, {n_visible}), got {x.shape}")
    if x.shape[0] == 0:
        raise ValueError(f"{what} is empty")
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise ValueError(f"{what} entries must lie in [0, 1]")


def cd_update(
    params: RbmParams,
    batch,
    cfg: CdConfig,
    rng: np.random.Generator,
    velocity: Velocity,
    *,
    where: str = "",
) -> tuple[RbmParams, float]:
    """One CD-k step on ``batch``.

    ``velocity`` is updated in place. Returns the new parameters and the mean
    squared reconstruction error per visible unit, measured on the first
    reconstruction's visible probabilities.
    """
    v0 = np.asarray(batch, dtype=DTYPE)
    _check_visible_data(v0, params.n_visible, "batch")
    n = v0.shape[0]

    h0_prob = hidden_given_visible(params, v0)
    h0 = bernoulli_sample(h0_prob, rng)
    h_pos = h0_prob if cfg.positive_hidden_as_probability else h0
    h_drive = h0
    recon = None
    for step in range(cfg.k):
        vk_prob = visible_given_hidden(params, h_drive)
        if recon is None:
            recon = vk_prob
        vk = vk_prob if cfg.reconstruction_as_probability else bernoulli_sample(vk_prob, rng)
        hk_prob = hidden_given_visible(params, vk)
        hk_sample = bernoulli_sample(hk_prob, rng)
        h_drive = hk_sample
        last = step == cfg.k - 1
        hk = hk_prob if last and cfg.final_hidden_as_probability else hk_sample

    lr = cfg.learning_rate
    dW = lr * (v0.T @ h_pos - vk.T @ hk) / n
    db = lr * (v0 - vk).mean(axis=0)
    dc = lr * (h_pos - hk).mean(axis=0)

    velocity.W = cfg.momentum * velocity.W + dW
    velocity.b = cfg.momentum * velocity.b + db
    velocity.c = cfg.momentum * velocity.c + dc
    updated = RbmParams(params.W + velocity.W, params.b + velocity.b, params.c + velocity.c)
    if not updated.is_finite():
        raise TrainingDivergedError(f"CD update diverged{where}")

    error = float(((v0 - recon) ** 2).sum(axis=1).mean() / params.n_visible)
    return updated, error


@dataclass
class RbmTrainResult:
    params: RbmParams
    errors: list = field(default_factory=list)


def train_rbm(
    data,
    n_hidden: int,
    cfg: CdConfig,
    rng: np.random.Generator,
    init: RbmParams | None = None,
) -> RbmTrainResult:
    """Train an RBM on ``data`` (rows in [0, 1]) for ``cfg.epochs`` epochs.

    Each epoch visits the rows in a fresh random order in mini-batches of
    ``cfg.batch_size``; a short final batch is kept. ``errors`` holds the mean
    reconstruction error of every epoch.
    """
    data = np.asarray(data, dtype=DTYPE)
    if init is None:
        params = init_rbm(data.shape[1] if data.ndim == 2 else 0, n_hidden, rng)
    else:
        if init.n_hidden != n_hidden:
            raise ValueError(f"init has {init.n_hidden} hidden units, expected {n_hidden}")
        params = init.copy()
    _check_visible_data(data, params.n_visible, "data")

    velocity = Velocity.zeros_like(params)
    n = data.shape[0]
    errors = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            params, err = cd_update(
                params, data[idx], cfg, rng, velocity,
                where=f" at epoch {epoch + 1}, batch {start // cfg.batch_size + 1}",
            )
            total += err * idx.size
        errors.append(total / n)
        logger.debug("rbm %dx%d epoch %d recon %.6f",
                     params.n_visible, params.n_hidden, epoch + 1, errors[-1])
    return RbmTrainResult(params, errors)


def log_likelihood_gradient(params: RbmParams, data) -> RbmParams:
    """Exact gradient of the mean log-likelihood of binary ``data``.

    Computed by enumeration; returned as an :class:`RbmParams` holding the
    gradient components.
    """
    data = np.asarray(data, dtype=DTYPE)
    V, H, P = joint_table(params)
    hd = hidden_given_visible(params, data)
    pv = P.sum(axis=1)
    model_vh = V.T @ P @ H
    gW = data.T @ hd / data.shape[0] - model_vh
    gb = data.mean(axis=0) - pv @ V
    gc = hd.mean(axis=0) - P.sum(axis=0) @ H
    return RbmParams(gW, gb, gc)


def free_energy(params: RbmParams, v) -> np.ndarray:
    """``-log sum_h exp(-E(v, h))`` for each row of ``v``."""
    v = np.atleast_2d(np.asarray(v, dtype=DTYPE))
    pre = v @ params.W + params.c
    return -(v @ params.b) - np.logaddexp(0.0, pre).sum(axis=1)


__all__ = [
    "CdConfig",
    "NonFiniteError",
    "RbmParams",
    "RbmTrainResult",
    "TrainingDivergedError",
    "Velocity",
    "binary_states",
    "cd_update",
    "energy",
    "free_energy",
    "hidden_given_visible",
    "init_rbm",
    "joint_probability",
    "joint_table",
    "log_likelihood_gradient",
    "partition_function",
    "train_rbm",
    "visible_given_hidden",
]
