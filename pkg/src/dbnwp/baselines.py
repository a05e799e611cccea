"""Reference predictors: persistence and a plain two-hidden-layer network."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dbn
from .dataset import LAST_POWER_COLUMN, SampleSet
from .evaluation import ErrorTriple, metrics
from .numerics import DTYPE, make_rng

NN_DEFAULT_SIZES = (20, 10)


def _last_power(features: np.ndarray) -> np.ndarray:
    if features.shape[-1] <= LAST_POWER_COLUMN:
        raise ValueError(f"feature rows of width {features.shape[-1]} carry no kp(t-1) column")
    out = features[..., LAST_POWER_COLUMN]
    if np.any(np.isnan(out)):
        raise ValueError("kp(t-1) lag is missing")
    return out


def persistence_predict(samples: SampleSet, row: int) -> float:
    """Last observed power ``kp(t-1)`` of sample ``row``, in original units."""
    value = float(_last_power(samples.features[row]))
    norm = samples.normalization
    if norm is not None:
        lo, hi = norm.feature_min[LAST_POWER_COLUMN], norm.feature_max[LAST_POWER_COLUMN]
        value = float(lo + value * (hi - lo))
    return value


@dataclass
class BaselineModel:
    """``kind`` is ``"persistence"`` or ``"two-layer-nn"``.

    The network kind wraps a :class:`~dbnwp.dbn.DbnModel` whose stack was
    randomly initialized instead of pretrained.
    """

    kind: str
    network: dbn.DbnModel | None = None
    sizes: tuple = ()
    ft_config: dbn.FineTuneConfig | None = None

    def __post_init__(self):
        if self.kind == "persistence":
            if self.network is not None:
                raise ValueError("persistence has no parameters")
        elif self.kind == "two-layer-nn":
            if self.network is None:
                raise ValueError("two-layer-nn needs a network")
        else:
            raise ValueError(f"unknown baseline kind {self.kind!r}")

    @property
    def provenance(self) -> dict:
        return {} if self.network is None else self.network.provenance

    def predict(self, raw_features):
        """Same contract as :func:`dbnwp.dbn.predict`."""
        if self.network is not None:
            return self.network.predict(raw_features)
        out = _last_power(np.asarray(raw_features, dtype=DTYPE))
        return float(out) if np.ndim(out) == 0 else out.copy()


PERSISTENCE = BaselineModel("persistence")


def train_two_layer_nn(samples: SampleSet, sizes=NN_DEFAULT_SIZES, ft_cfg: dbn.FineTuneConfig | None = None,
                       seed: int = 0) -> BaselineModel:
    """Fit a randomly initialized network with hidden ``sizes`` on raw ``samples``."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 2 or min(sizes) < 1:
        raise ValueError(f"sizes must be two positive layer widths, got {sizes}")
    ft_cfg = ft_cfg or dbn.FineTuneConfig()
    arch = dbn.DbnArchitecture(samples.n_features, sizes)
    trained = dbn.fit(samples, arch, None, ft_cfg, make_rng(seed),
                      provenance={"seed": seed, "kind": "two-layer-nn"})
    return BaselineModel("two-layer-nn", trained.model, sizes, ft_cfg)


def nn_fitter(sizes=NN_DEFAULT_SIZES, ft_cfg: dbn.FineTuneConfig | None = None):
    """Evaluation fitter for :func:`train_two_layer_nn`."""
    return lambda train, seed: train_two_layer_nn(train, sizes, ft_cfg, seed)


def persistence_fitter(train, seed):
    """Evaluation fitter for persistence; ignores its arguments."""
    return PERSISTENCE


@dataclass
class ComparisonTable:
    rows: list

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "rmse", "mae", "sde"])
            for name, errs in self.rows:
                w.writerow([name, *map(repr, errs.as_tuple())])

    def as_dict(self) -> dict[str, ErrorTriple]:
        return dict(self.rows)


def read_comparison(path) -> list[tuple[str, ErrorTriple]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        if next(reader) != ["model", "rmse", "mae", "sde"]:
            raise ValueError(f"{path}: not a comparison table")
        return [(r[0], ErrorTriple(*map(float, r[1:]))) for r in reader]


def compare(models, test: SampleSet) -> ComparisonTable:
    """Score ``(name, model)`` pairs on the raw ``test`` rows; rows sorted by name.

    Every model must accept the test feature width, and models that record a
    training fingerprint must share it, so all rows refer to one split.
    """
    models = list(models)
    if not models:
        raise ValueError("nothing to compare")
    if test.normalization is not None:
        raise ValueError("compare expects test samples in original units")
    prints = {m.provenance.get("training_fingerprint") for _, m in models} - {None}
    if len(prints) > 1:
        raise ValueError("models were trained on different training sets")
    test_start = min(test.timestamps) if len(test) else None
    rows = []
    for name, model in models:
        net = getattr(model, "network", model)
        if isinstance(net, dbn.DbnModel) and net.architecture.input_dim != test.n_features:
            raise ValueError(
                f"model {name!r} expects {net.architecture.input_dim} features, test set has {test.n_features}"
            )
        end = model.provenance.get("training_end")
        if end is not None and test_start is not None and str(test_start) <= end:
            raise ValueError(f"test set overlaps the training period of model {name!r}")
        rows.append((name, metrics(test.targets, model.predict(test.features))))
    rows.sort(key=lambda r: r[0])
    return ComparisonTable(rows)


__all__ = [
    "BaselineModel",
    "ComparisonTable",
    "NN_DEFAULT_SIZES",
    "PERSISTENCE",
    "compare",
    "nn_fitter",
    "persistence_fitter",
    "persistence_predict",
    "read_comparison",
    "train_two_layer_nn",
]
