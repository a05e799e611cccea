"""Deep belief network regressor.

A stack of RBMs is pretrained greedily, each on the mean hidden activations
of the one below. The stack is then read as a feedforward net of sigmoid
layers (``sigmoid(x @ W + c)``; visible biases are kept but unused) topped by
one linear output neuron, and the whole net is fine-tuned by mini-batch
gradient descent with momentum on half the mean squared error (the reported
loss traces are the plain MSE).
"""

import hashlib
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import Normalization, SampleSet
from .numerics import DTYPE, gaussian_init, sigmoid
from .rbm import CdConfig, RbmParams, TrainingDivergedError, hidden_given_visible, train_rbm

logger = logging.getLogger(__name__)

HEAD_INIT_STD = 0.01


@dataclass(frozen=True)
class DbnArchitecture:
    input_dim: int
    hidden_sizes: tuple
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(s) for s in self.hidden_sizes))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ValueError(f"hidden_sizes must be a nonempty list of positive sizes, got {self.hidden_sizes}")
        if self.output_dim != 1:
            raise ValueError("only a single regression output is supported")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = (self.input_dim,) + self.hidden_sizes
        return list(zip(dims[:-1], dims[1:]))


DBN1_HIDDEN = (100, 80, 50, 5)
DBN2_HIDDEN = (80, 50, 5)


@dataclass
class FineTuneConfig:
    learning_rate: float = 0.90
    momentum: float = 0.05
    epochs: int = 100
    batch_size: int = 100

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class DbnModel:
    architecture: DbnArchitecture
    rbm_stack: list
    head_weights: np.ndarray
    head_bias: float
    normalization: Normalization | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.head_weights = np.asarray(self.head_weights, dtype=DTYPE)
        self.head_bias = float(self.head_bias)
        shapes = [rbm.W.shape for rbm in self.rbm_stack]
        if shapes != self.architecture.layer_shapes:
            raise ValueError(f"RBM stack shapes {shapes} do not match architecture {self.architecture.layer_shapes}")
        if self.head_weights.shape != (self.architecture.hidden_sizes[-1],):
            raise ValueError(
                f"head has {self.head_weights.size} weights, last hidden layer has "
                f"{self.architecture.hidden_sizes[-1]} units"
            )
        if self.normalization is not None and self.normalization.n_features != self.architecture.input_dim:
            raise ValueError(
                f"normalization covers {self.normalization.n_features} features, "
                f"model expects {self.architecture.input_dim}"
            )

    def copy(self) -> "DbnModel":
        return DbnModel(
            self.architecture,
            [rbm.copy() for rbm in self.rbm_stack],
            self.head_weights.copy(),
            self.head_bias,
            self.normalization,
            dict(self.provenance),
        )

    def predict(self, raw_features):
        """Shortcut for :func:`predict`."""
        return predict(self, raw_features)

    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order: W1, c1, W2, c2, ..., head w."""
        out = []
        for rbm in self.rbm_stack:
            out += [rbm.W, rbm.c]
        out.append(self.head_weights)
        return out


@dataclass
class PretrainResult:
    stack: list
    errors: list


def pretrain(arch: DbnArchitecture, inputs, cfg: CdConfig, rng: np.random.Generator) -> PretrainResult:
    """Greedy layer-wise CD training of the RBM stack on ``inputs`` in [0, 1]."""
    x = np.asarray(inputs, dtype=DTYPE)
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ValueError(f"inputs have shape {x.shape}, architecture expects width {arch.input_dim}")
    stack, errors = [], []
    for depth, n_hidden in enumerate(arch.hidden_sizes):
        logger.info("pretraining layer %d: %d -> %d", depth + 1, x.shape[1], n_hidden)
        result = train_rbm(x, n_hidden, cfg, rng)
        stack.append(result.params)
        errors.append(result.errors)
        x = hidden_given_visible(result.params, x)
    return PretrainResult(stack, errors)


def random_stack(arch: DbnArchitecture, rng: np.random.Generator, std=None) -> list:
    """Untrained stack; ``std=None`` scales each layer by ``1/sqrt(fan_in)``."""
    stack = []
    for n_in, n_out in arch.layer_shapes:
        s = 1.0 / np.sqrt(n_in) if std is None else std
        stack.append(RbmParams(gaussian_init(n_in, n_out, s, rng), np.zeros(n_in), np.zeros(n_out)))
    return stack


def assemble(arch: DbnArchitecture, stack: list, rng: np.random.Generator,
             normalization: Normalization | None = None, provenance: dict | None = None) -> DbnModel:
    """Put a regression head on ``stack``."""
    head = gaussian_init(1, arch.hidden_sizes[-1], HEAD_INIT_STD, rng)[0]
    return DbnModel(arch, stack, head, 0.0, normalization, provenance or {})


def forward(model: DbnModel, features) -> tuple:
    """Deterministic pass on normalized ``features`` (a vector or rows).

    Returns ``(prediction, activations)`` where ``activations[0]`` is the
    input and ``activations[i]`` the output of hidden layer ``i``.
    """
    x = np.asarray(features, dtype=DTYPE)
    if x.shape[-1] != model.architecture.input_dim:
        raise ValueError(f"feature width {x.shape[-1]} does not match model input {model.architecture.input_dim}")
    acts = [x]
    for rbm in model.rbm_stack:
        acts.append(sigmoid(acts[-1] @ rbm.W + rbm.c))
    pred = acts[-1] @ model.head_weights + model.head_bias
    return pred, acts


def mse_loss(model: DbnModel, features, targets) -> float:
    pred, _ = forward(model, features)
    return float(np.mean((pred - np.asarray(targets, dtype=DTYPE)) ** 2))


def objective(model: DbnModel, features, targets) -> float:
    """Fine-tuning objective: half the mean squared error."""
    return 0.5 * mse_loss(model, features, targets)


def loss_gradients(model: DbnModel, features, targets):
    """:func:`objective` and its gradient by backpropagation.

    Returns ``(loss, grads)``; ``grads`` is a list of ``(dW, dc)`` per hidden
    layer followed by ``(dw_head, db_head)``.
    """
    y = np.asarray(targets, dtype=DTYPE)
    pred, acts = forward(model, features)
    err = pred - y
    n = y.shape[0]
    loss = float(0.5 * np.mean(err**2))
    delta_out = err / n
    grads = [(acts[-1].T @ delta_out, float(delta_out.sum()))]
    delta = np.outer(delta_out, model.head_weights)
    for i in range(len(model.rbm_stack) - 1, -1, -1):
        a = acts[i + 1]
        delta = delta * a * (1.0 - a)
        grads.append((acts[i].T @ delta, delta.sum(axis=0)))
        if i:
            delta = delta @ model.rbm_stack[i].W.T
    grads.reverse()
    return loss, grads


@dataclass
class FineTuneResult:
    initial_loss: float
    losses: list


def finetune(model: DbnModel, data: SampleSet, cfg: FineTuneConfig, rng: np.random.Generator) -> FineTuneResult:
    """Train every layer of ``model`` in place on normalized ``data``.

    ``losses[e]`` is the full-data MSE after epoch ``e + 1``.
    """
    x, y = data.features, data.targets
    if len(data) == 0:
        raise ValueError("fine-tuning data is empty")
    n_layers = len(model.rbm_stack)
    vel = [(np.zeros_like(r.W), np.zeros_like(r.c)) for r in model.rbm_stack]
    vel.append((np.zeros_like(model.head_weights), 0.0))

    initial = mse_loss(model, x, y)
    losses = []
    n = len(data)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = loss_gradients(model, x[idx], y[idx])
            for i, (gw, gb) in enumerate(grads):
                vw = cfg.momentum * vel[i][0] - cfg.learning_rate * gw
                vb = cfg.momentum * vel[i][1] - cfg.learning_rate * gb
                vel[i] = (vw, vb)
                if i < n_layers:
                    rbm = model.rbm_stack[i]
                    rbm.W = rbm.W + vw
                    rbm.c = rbm.c + vb
                else:
                    model.head_weights = model.head_weights + vw
                    model.head_bias = float(model.head_bias + vb)
        loss = mse_loss(model, x, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"fine-tuning loss became non-finite at epoch {epoch + 1}")
        losses.append(loss)
        logger.debug("finetune epoch %d loss %.6g", epoch + 1, loss)
    return FineTuneResult(initial, losses)


def predict(model: DbnModel, raw_features) -> np.ndarray | float:
    """Power forecast in original units, clamped to [0, 1].

    ``raw_features`` is a vector or rows in original units. A
    :class:`~dbnwp.dataset.FeatureRangeWarning` is issued for values far
    outside the training range; they are clipped before the pass.
    """
    if model.normalization is None:
        raise ValueError("model has no normalization metadata")
    x = model.normalization.transform_features(raw_features)
    pred, _ = forward(model, x)
    out = np.clip(model.normalization.inverse_targets(pred), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def fingerprint(samples: SampleSet) -> str:
    """Digest of the timestamps and targets of ``samples``."""
    h = hashlib.sha256()
    h.update("|".join(str(t) for t in samples.timestamps).encode())
    h.update(np.ascontiguousarray(samples.targets, dtype=DTYPE).tobytes())
    return h.hexdigest()


@dataclass
class TrainedDbn:
    model: DbnModel
    pretrain_errors: list
    finetune: FineTuneResult
    pretrain_seconds: float = 0.0
    finetune_seconds: float = 0.0


def fit(samples: SampleSet, arch: DbnArchitecture, cd_cfg: CdConfig | None, ft_cfg: FineTuneConfig,
        rng: np.random.Generator, *, provenance: dict | None = None) -> TrainedDbn:
    """Normalize raw ``samples``, pretrain (skipped when ``cd_cfg`` is None) and fine-tune."""
    if samples.normalization is not None:
        raise ValueError("fit expects samples in original units")
    norm = Normalization.fit(samples.features, samples.targets)
    scaled = SampleSet(norm.transform_features(samples.features),
                       norm.transform_targets(samples.targets), samples.timestamps, norm)
    t0 = time.perf_counter()
    if cd_cfg is None:
        stack, pre_errors = random_stack(arch, rng), []
    else:
        pre = pretrain(arch, scaled.features, cd_cfg, rng)
        stack, pre_errors = pre.stack, pre.errors
    prov = {
        "cd_config": asdict(cd_cfg) if cd_cfg is not None else None,
        "finetune_config": asdict(ft_cfg),
        "training_start": str(samples.timestamps[0]) if len(samples) else None,
        "training_end": str(samples.timestamps[-1]) if len(samples) else None,
        "n_samples": len(samples),
        "training_fingerprint": fingerprint(samples),
    }
    prov.update(provenance or {})
    model = assemble(arch, stack, rng, norm, prov)
    model.head_bias = float(np.mean(scaled.targets))
    t1 = time.perf_counter()
    result = finetune(model, scaled, ft_cfg, rng)
    t2 = time.perf_counter()
    return TrainedDbn(model, pre_errors, result, t1 - t0, t2 - t1)
