"""Error measures and the validation protocols.

All three measures are computed on the error ``e = actual - predicted``::

    RMSE = sqrt(mean(e**2))
    MAE  = mean(|e|)
    SDE  = sqrt(mean((e - mean(e))**2))      # population form

so ``RMSE**2 = mean(e)**2 + SDE**2``.

The protocols take a *fitter*, a callable ``fitter(train, seed)`` that receives
a raw :class:`~dbnwp.dataset.SampleSet` and returns an object with a
``predict(raw_features)`` method. :func:`dbn_fitter` builds the default one.
"""

import csv
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dbn
from .dataset import FeatureRangeWarning, SampleSet, chronological_split, fraction_boundary
from .numerics import DTYPE, derive_seed, make_rng

logger = logging.getLogger(__name__)

METRICS = ("rmse", "mae", "sde")


@dataclass(frozen=True)
class ErrorTriple:
    rmse: float
    mae: float
    sde: float

    def as_tuple(self) -> tuple:
        return (self.rmse, self.mae, self.sde)


def metrics(actual, predicted) -> ErrorTriple:
    """RMSE, MAE and SDE of ``predicted`` against ``actual``."""
    a = np.asarray(actual, dtype=DTYPE).ravel()
    p = np.asarray(predicted, dtype=DTYPE).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ValueError("cannot score empty vectors")
    e = a - p
    rmse = math.sqrt(float(np.mean(e**2)))
    mae = float(np.mean(np.abs(e)))
    sde = math.sqrt(float(np.mean((e - e.mean()) ** 2)))
    return ErrorTriple(rmse, mae, sde)


def kfold_indices(n: int, k: int, rng: np.random.Generator, blocked: bool = False) -> list[np.ndarray]:
    """Partition ``range(n)`` into ``k`` folds whose sizes differ by at most one.

    Folds are random (the default) or, with ``blocked=True``, contiguous runs
    of indices in order, which keeps neighbouring hours out of each other's
    test folds.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    order = np.arange(n) if blocked else rng.permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


@dataclass
class UnitResult:
    """Outcome of one fold or run."""

    unit: int
    errors: ErrorTriple
    train_seconds: float = math.nan
    test_seconds: float = math.nan
    seed: int | None = None


@dataclass
class EvalReport:
    units: list
    config: dict = field(default_factory=dict)

    def values(self, metric: str) -> np.ndarray:
        if metric not in METRICS:
            raise KeyError(metric)
        return np.array([getattr(u.errors, metric) for u in self.units], dtype=DTYPE)

    def mean(self, metric: str) -> float:
        return float(np.mean(self.values(metric)))

    def std(self, metric: str) -> float:
        """Population standard deviation over units."""
        return float(np.std(self.values(metric)))

    def write_csv(self, path, include_timing: bool = False):
        """One row per unit, then ``mean`` and ``std`` rows.

        Timings are left out by default so that equal inputs give equal files.
        """
        header = ["unit", *METRICS] + (["train_seconds", "test_seconds"] if include_timing else [])
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for u in self.units:
                row = [u.unit, *map(repr, u.errors.as_tuple())]
                if include_timing:
                    row += [repr(u.train_seconds), repr(u.test_seconds)]
                w.writerow(row)
            for name, stat in (("mean", self.mean), ("std", self.std)):
                row = [name] + [repr(stat(m)) for m in METRICS]
                if include_timing:
                    row += ["", ""]
                w.writerow(row)

    def write_timings(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["unit", "train_seconds", "test_seconds"])
            for u in self.units:
                w.writerow([u.unit, f"{u.train_seconds:.6f}", f"{u.test_seconds:.6f}"])


def read_report(path) -> tuple[list[tuple], dict]:
    """Parse a file written by :meth:`EvalReport.write_csv`.

    Returns ``(unit_rows, aggregates)``; each unit row is
    ``(unit, rmse, mae, sde)`` and ``aggregates`` maps ``"mean"``/``"std"`` to
    a metric tuple.
    """
    units, agg = [], {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["unit", *METRICS]:
            raise ValueError(f"{path}: not an evaluation report")
        for row in reader:
            vals = tuple(float(x) for x in row[1:4])
            if row[0] in ("mean", "std"):
                agg[row[0]] = vals
            else:
                units.append((int(row[0]), *vals))
    return units, agg


def dbn_fitter(arch_sizes, cd_cfg, ft_cfg):
    """Fitter that trains a DBN with hidden sizes ``arch_sizes`` on each train set.

    ``cd_cfg=None`` skips pretraining.
    """
    sizes = tuple(arch_sizes)

    def fit(train: SampleSet, seed: int):
        arch = dbn.DbnArchitecture(train.n_features, sizes)
        return dbn.fit(train, arch, cd_cfg, ft_cfg, make_rng(seed), provenance={"seed": seed}).model

    return fit


def _score(model, test: SampleSet) -> tuple[ErrorTriple, float]:
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FeatureRangeWarning)
        pred = model.predict(test.features)
    elapsed = time.perf_counter() - start
    if caught:
        logger.info("%d feature-range warnings while scoring %d rows", len(caught), len(test))
    return metrics(test.targets, pred), elapsed


def _train(fitter, train: SampleSet, seed: int):
    start = time.perf_counter()
    model = fitter(train, seed)
    return model, time.perf_counter() - start


def _require_raw(samples: SampleSet):
    if samples.normalization is not None:
        raise ValueError("evaluation expects samples in original units")


def run_kfold(samples: SampleSet, fitter, k: int = 5, seed: int = 0, *, blocked: bool = False,
              config: dict | None = None) -> EvalReport:
    """k-fold cross-validation.

    The partition is drawn from ``seed``; fold ``i`` trains with
    ``derive_seed(seed, i + 1)``.
    """
    _require_raw(samples)
    folds = kfold_indices(len(samples), k, make_rng(seed), blocked=blocked)
    units = []
    for i, test_idx in enumerate(folds):
        train_idx = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        fold_seed = derive_seed(seed, i + 1)
        model, t_train = _train(fitter, samples.subset(train_idx), fold_seed)
        errs, t_test = _score(model, samples.subset(test_idx))
        logger.info("fold %d/%d rmse %.5f", i + 1, k, errs.rmse)
        units.append(UnitResult(i + 1, errs, t_train, t_test, fold_seed))
    cfg = {"mode": "kfold", "k": k, "seed": seed, "blocked": blocked}
    cfg.update(config or {})
    return EvalReport(units, cfg)


def holdout_split(samples: SampleSet, train_fraction: float = 0.7) -> tuple[SampleSet, SampleSet]:
    """Chronological split putting the first ``train_fraction`` of samples in train."""
    return chronological_split(samples, fraction_boundary(samples, train_fraction))


def run_holdout(samples: SampleSet, fitter, train_fraction: float = 0.7, seed: int = 0, *,
                config: dict | None = None) -> EvalReport:
    """Train on the chronologically first ``train_fraction`` and test on the rest."""
    _require_raw(samples)
    train, test = holdout_split(samples, train_fraction)
    model, t_train = _train(fitter, train, seed)
    errs, t_test = _score(model, test)
    cfg = {"mode": "holdout", "train_fraction": train_fraction, "seed": seed,
           "n_train": len(train), "n_test": len(test)}
    cfg.update(config or {})
    return EvalReport([UnitResult(1, errs, t_train, t_test, seed)], cfg)


@dataclass
class StabilityResult:
    report: EvalReport
    curves: dict
    mean: dict
    std: dict
    cv: dict

    def write_curves(self, path):
        """Each metric sorted ascending, one row per rank."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", *METRICS])
            for r in range(len(self.report.units)):
                w.writerow([r + 1] + [repr(float(self.curves[m][r])) for m in METRICS])

    def write_summary(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "mean", "std", "cv"])
            for m in METRICS:
                w.writerow([m, repr(self.mean[m]), repr(self.std[m]), repr(self.cv[m])])


def stability_runs(samples: SampleSet, fitter, n_runs: int, base_seed: int = 0, *,
                   train_fraction: float = 0.7, seeds=None, config: dict | None = None) -> StabilityResult:
    """Repeat the hold-out protocol with seeds ``base_seed .. base_seed + n_runs - 1``.

    ``seeds`` overrides the seed list. The split is the same for every run;
    only the training randomness changes. ``cv`` is std / mean with the
    population std.
    """
    if n_runs < 2:
        raise ValueError(f"n_runs must be >= 2, got {n_runs}")
    seeds = [derive_seed(base_seed, i) for i in range(n_runs)] if seeds is None else list(seeds)
    if len(seeds) != n_runs:
        raise ValueError(f"got {len(seeds)} seeds for {n_runs} runs")
    _require_raw(samples)
    train, test = holdout_split(samples, train_fraction)
    units = []
    for i, s in enumerate(seeds):
        model, t_train = _train(fitter, train, s)
        errs, t_test = _score(model, test)
        logger.info("run %d/%d seed %d rmse %.5f", i + 1, n_runs, s, errs.rmse)
        units.append(UnitResult(i + 1, errs, t_train, t_test, s))
    cfg = {"mode": "stability", "runs": n_runs, "base_seed": base_seed, "train_fraction": train_fraction}
    cfg.update(config or {})
    report = EvalReport(units, cfg)
    curves = {m: np.sort(report.values(m)) for m in METRICS}
    mean = {m: report.mean(m) for m in METRICS}
    std = {m: report.std(m) for m in METRICS}
    cv = {m: std[m] / mean[m] if mean[m] > 0 else 0.0 for m in METRICS}
    return StabilityResult(report, curves, mean, std, cv)

