"""Wind-farm ingestion, lagged feature windows, scaling and splits.

A farm series is hourly: wind speed ``ks``, direction ``kd`` (degrees),
zonal ``kz`` and meridional ``km`` components, and measured power ``kp``
(already a fraction of capacity). Each sample anchored at hour ``t`` holds
124 features in this fixed order::

    ks(t) .. ks(t-24)     columns   0 - 24
    kd(t) .. kd(t-24)     columns  25 - 49
    kz(t) .. kz(t-24)     columns  50 - 74
    km(t) .. km(t-24)     columns  75 - 99
    kp(t-1) .. kp(t-24)   columns 100 - 123

and its target is ``kp(t+1)``.
"""

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .numerics import DTYPE, make_rng

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("timestamp", "ks", "kd", "kz", "km", "kp")
WEATHER_VARIABLES = ("ks", "kd", "kz", "km")
N_LAGS = 24
HOUR = timedelta(hours=1)

FEATURE_LAYOUT = tuple(
    [(var, lag) for var in WEATHER_VARIABLES for lag in range(N_LAGS + 1)]
    + [("kp", lag) for lag in range(1, N_LAGS + 1)]
)
N_FEATURES = len(FEATURE_LAYOUT)
FEATURE_NAMES = tuple(f"{var}_lag{lag}" for var, lag in FEATURE_LAYOUT)
#: Column holding kp(t-1), the most recent observed power.
LAST_POWER_COLUMN = FEATURE_LAYOUT.index(("kp", 1))

#: Fraction of the fitted range a value may stray before a warning.
RANGE_TOLERANCE = 0.20


class DataFormatError(ValueError):
    """Malformed input file; the message carries the line number."""


class FeatureRangeWarning(UserWarning):
    """Input feature far outside the range seen during fitting."""


@dataclass(frozen=True)
class WindRecord:
    timestamp: datetime
    ks: float
    kd: float
    kz: float
    km: float
    kp: float = math.nan

    def values(self) -> tuple:
        return (self.ks, self.kd, self.kz, self.km, self.kp)


def _parse_number(text: str) -> float:
    text = text.strip()
    return math.nan if text == "" else float(text)


def parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.strip())
    if ts.tzinfo is not None:
        ts = ts.replace(tzinfo=None) - ts.utcoffset()
    return ts


def format_timestamp(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%S")


def parse_csv(path) -> list[WindRecord]:
    """Read a ``timestamp,ks,kd,kz,km,kp`` file. Empty cells become NaN."""
    path = Path(path)
    records: list[WindRecord] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: missing header row") from None
        if tuple(h.strip().lower() for h in header) != CSV_COLUMNS:
            raise DataFormatError(
                f"{path}:1: expected header {','.join(CSV_COLUMNS)}, got {','.join(header)}"
            )
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(CSV_COLUMNS):
                raise DataFormatError(
                    f"{path}:{line}: expected {len(CSV_COLUMNS)} fields, got {len(row)}"
                )
            try:
                ts = parse_timestamp(row[0])
                values = [_parse_number(cell) for cell in row[1:]]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line}: {exc}") from None
            if any(math.isinf(x) for x in values):
                raise DataFormatError(f"{path}:{line}: infinite value")
            if records and ts <= records[-1].timestamp:
                raise DataFormatError(
                    f"{path}:{line}: timestamp {row[0].strip()} not after "
                    f"{format_timestamp(records[-1].timestamp)}"
                )
            records.append(WindRecord(ts, *values))
    return records


def _format_number(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_csv(records, path):
    """Write records in the ``parse_csv`` format. Floats keep full precision."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([format_timestamp(rec.timestamp)]
                            + [_format_number(x) for x in rec.values()])


def collapse_releases(releases, policy: str = "latest") -> dict[datetime, tuple]:
    """Reduce several forecast releases per valid hour to one value each.

    ``releases`` yields ``(valid_time, issue_time, (ks, kd, kz, km))``.
    ``policy="latest"`` keeps the most recently issued forecast,
    ``policy="mean"`` averages all releases for that hour.
    """
    if policy not in ("latest", "mean"):
        raise ValueError(f"unknown release policy {policy!r}")
    grouped: dict[datetime, list] = {}
    for valid, issued, values in releases:
        grouped.setdefault(valid, []).append((issued, tuple(values)))
    out = {}
    for valid, items in grouped.items():
        if policy == "latest":
            out[valid] = max(items, key=lambda item: item[0])[1]
        else:
            out[valid] = tuple(np.mean([vals for _, vals in items], axis=0).tolist())
    return out


def records_to_array(records) -> tuple[np.ndarray, np.ndarray]:
    """Place records on a contiguous hourly grid.

    Returns ``(timestamps, values)`` where ``values`` has columns
    ks, kd, kz, km, kp and hours absent from ``records`` are NaN rows.
    """
    if not records:
        return np.array([], dtype=object), np.zeros((0, 5))
    start = records[0].timestamp
    n_hours = int((records[-1].timestamp - start) / HOUR) + 1
    values = np.full((n_hours, 5), np.nan)
    for rec in records:
        offset = (rec.timestamp - start) / HOUR
        if offset != int(offset):
            raise DataFormatError(f"timestamp {format_timestamp(rec.timestamp)} is off the hourly grid")
        values[int(offset)] = rec.values()
    timestamps = np.array([start + i * HOUR for i in range(n_hours)], dtype=object)
    return timestamps, values


def _window(values: np.ndarray, t: int) -> np.ndarray:
    blocks = [values[t - np.arange(N_LAGS + 1), j] for j in range(4)]
    blocks.append(values[t - np.arange(1, N_LAGS + 1), 4])
    return np.concatenate(blocks)


def build_features(records, t: int):
    """Feature vector anchored at index ``t`` of a contiguous hourly series.

    Returns ``(features, target)`` or ``None`` when any value of the window or
    the target ``kp(t+1)`` is missing.
    """
    n = len(records)
    if t < N_LAGS or t + 1 >= n:
        raise IndexError(f"anchor {t} needs {N_LAGS} <= t < {n - 1}")
    values = np.array([rec.values() for rec in records[t - N_LAGS:t + 2]], dtype=DTYPE)
    local = N_LAGS
    feats = _window(values, local)
    target = values[local + 1, 4]
    if np.isnan(feats).any() or np.isnan(target):
        return None
    return feats, float(target)


@dataclass
class SampleSet:
    """Aligned feature rows, targets and target timestamps.

    ``normalization`` is set when ``features`` and ``targets`` are scaled.
    """

    features: np.ndarray
    targets: np.ndarray
    timestamps: np.ndarray
    normalization: "Normalization | None" = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=DTYPE)
        self.targets = np.asarray(self.targets, dtype=DTYPE)
        self.timestamps = np.asarray(self.timestamps, dtype=object)
        n = self.targets.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != n or self.timestamps.shape[0] != n:
            raise ValueError(
                f"misaligned sample set: features {self.features.shape}, "
                f"targets {self.targets.shape}, timestamps {self.timestamps.shape}"
            )

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "SampleSet":
        rows = np.asarray(rows)
        return replace(
            self,
            features=self.features[rows],
            targets=self.targets[rows],
            timestamps=self.timestamps[rows],
        )

    def raw(self) -> "SampleSet":
        """The same samples in original units."""
        if self.normalization is None:
            return self
        norm = self.normalization
        return SampleSet(
            norm.inverse_features(self.features),
            norm.inverse_targets(self.targets),
            self.timestamps,
        )


def build_samples(records) -> SampleSet:
    """Every complete window of ``records`` as a :class:`SampleSet`."""
    timestamps, values = records_to_array(records)
    n = values.shape[0]
    anchors = np.arange(N_LAGS, n - 1)
    if anchors.size == 0:
        return SampleSet(np.zeros((0, N_FEATURES)), np.zeros(0), np.array([], dtype=object))
    lag_idx = anchors[:, None] - np.arange(N_LAGS + 1)[None, :]
    blocks = [values[lag_idx, j] for j in range(4)]
    blocks.append(values[lag_idx[:, 1:], 4])
    feats = np.concatenate(blocks, axis=1)
    targets = values[anchors + 1, 4]
    keep = ~(np.isnan(feats).any(axis=1) | np.isnan(targets))
    skipped = int((~keep).sum())
    if skipped:
        logger.info("skipped %d windows with missing values", skipped)
    return SampleSet(feats[keep], targets[keep], timestamps[anchors + 1][keep])


def _scale(x, lo, span):
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)


@dataclass
class Normalization:
    """Per-column min/max scaling to [0, 1]; constant columns map to 0."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def __post_init__(self):
        self.feature_min = np.asarray(self.feature_min, dtype=DTYPE)
        self.feature_max = np.asarray(self.feature_max, dtype=DTYPE)
        self.target_min = float(self.target_min)
        self.target_max = float(self.target_max)

    @classmethod
    def fit(cls, features, targets) -> "Normalization":
        features = np.asarray(features, dtype=DTYPE)
        targets = np.asarray(targets, dtype=DTYPE)
        if features.shape[0] == 0:
            raise ValueError("cannot fit normalization on zero rows")
        return cls(features.min(axis=0), features.max(axis=0),
                   targets.min(), targets.max())

    @property
    def n_features(self) -> int:
        return self.feature_min.size

    def transform_features(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        if x.shape[-1] != self.n_features:
            raise ValueError(f"feature width {x.shape[-1]} does not match normalization width {self.n_features}")
        span = self.feature_max - self.feature_min
        slack = RANGE_TOLERANCE * span
        outside = (x < self.feature_min - slack) | (x > self.feature_max + slack)
        if np.any(outside):
            cols = np.unique(np.nonzero(outside)[-1])
            warnings.warn(
                f"{int(outside.sum())} feature value(s) beyond the fitted range in columns "
                f"{[FEATURE_NAMES[c] if self.n_features == N_FEATURES else int(c) for c in cols[:5]]}",
                FeatureRangeWarning,
                stacklevel=2,
            )
        return np.clip(_scale(x, self.feature_min, span), 0.0, 1.0)

    def inverse_features(self, x) -> np.ndarray:
        return self.feature_min + np.asarray(x, dtype=DTYPE) * (self.feature_max - self.feature_min)

    def transform_targets(self, y) -> np.ndarray:
        span = np.float64(self.target_max - self.target_min)
        return _scale(np.asarray(y, dtype=DTYPE), self.target_min, span)

    def inverse_targets(self, y) -> np.ndarray:
        return self.target_min + np.asarray(y, dtype=DTYPE) * (self.target_max - self.target_min)

    def to_dict(self) -> dict:
        return {
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "target_min": self.target_min,
            "target_max": self.target_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(d["feature_min"], d["feature_max"], d["target_min"], d["target_max"])


def normalize(samples: SampleSet, fit_on=None) -> tuple[SampleSet, Normalization]:
    """Scale ``samples`` with statistics from the rows ``fit_on`` (all rows by default).

    Rows outside the fitted range are clipped to [0, 1].
    """
    if samples.normalization is not None:
        raise ValueError("samples are already normalized")
    rows = np.arange(len(samples)) if fit_on is None else np.arange(len(samples))[fit_on]
    if rows.size == 0:
        raise ValueError("normalization fit range is empty")
    norm = Normalization.fit(samples.features[rows], samples.targets[rows])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FeatureRangeWarning)
        feats = norm.transform_features(samples.features)
    targets = np.clip(norm.transform_targets(samples.targets), 0.0, 1.0)
    return SampleSet(feats, targets, samples.timestamps, norm), norm


def chronological_split(samples: SampleSet, boundary: datetime) -> tuple[SampleSet, SampleSet]:
    """Targets strictly before ``boundary`` train; the rest test."""
    is_train = np.array([ts < boundary for ts in samples.timestamps], dtype=bool)
    if not is_train.any():
        raise ValueError(f"no training samples before {format_timestamp(boundary)}")
    if is_train.all():
        raise ValueError(f"no test samples at or after {format_timestamp(boundary)}")
    return samples.subset(np.nonzero(is_train)[0]), samples.subset(np.nonzero(~is_train)[0])


def fraction_boundary(samples: SampleSet, train_fraction: float) -> datetime:
    """Timestamp that puts ``round(n * train_fraction)`` samples ahead of it."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(samples)
    cut = min(max(int(round(n * train_fraction)), 1), n - 1)
    return samples.timestamps[cut]


@dataclass
class SynthesisParams:
    """Knobs of the synthetic farm generator."""

    mean_speed: float = 7.0
    ar_coefficient: float = 0.95
    speed_noise: float = 0.8
    diurnal_amplitude: float = 1.5
    direction_step: float = 8.0
    direction_sector: tuple = (180.0, 300.0)
    rated_speed: float = 9.0
    curve_width: float = 2.0
    power_noise: float = 0.03
    lead_hours: int = 1
    start: datetime = field(default_factory=lambda: datetime(2007, 1, 1))


def _reflected_walk(rng, n, step, lo, hi):
    x = np.empty(n)
    x[0] = rng.uniform(lo, hi)
    steps = rng.normal(0.0, step, n)
    width = hi - lo
    for i in range(1, n):
        y = np.mod(x[i - 1] + steps[i] - lo, 2 * width)
        x[i] = lo + (y if y <= width else 2 * width - y)
    return x


def synthesize(series_length: int, seed: int, params: SynthesisParams | None = None) -> list[WindRecord]:
    """Synthetic hourly farm series with a learnable speed-to-power mapping.

    Speed is an AR(1) anomaly on top of a diurnal sinusoid; direction is a
    random walk reflected at the edges of a prevailing sector; the components
    are speed times the cosine and sine of direction. Power is a logistic
    power curve of speed plus Gaussian noise, clipped to [0, 1]. The weather
    logged at hour ``t`` is the value valid ``lead_hours`` later, the way a
    forecast for the production hour would be.
    """
    if series_length < 100:
        raise ValueError("series_length must be at least 100")
    p = params or SynthesisParams()
    rng = make_rng(seed)
    hours = np.arange(series_length)
    anomaly = np.empty(series_length)
    anomaly[0] = rng.normal(0.0, p.speed_noise / math.sqrt(1 - p.ar_coefficient**2))
    eps = rng.normal(0.0, p.speed_noise, series_length)
    for i in range(1, series_length):
        anomaly[i] = p.ar_coefficient * anomaly[i - 1] + eps[i]
    speed = np.maximum(
        p.mean_speed + p.diurnal_amplitude * np.sin(2 * np.pi * hours / 24.0) + anomaly, 0.0
    )
    direction = _reflected_walk(rng, series_length, p.direction_step, *p.direction_sector)
    rad = np.deg2rad(direction)
    zonal = speed * np.cos(rad)
    meridional = speed * np.sin(rad)
    curve = 1.0 / (1.0 + np.exp(-(speed - p.rated_speed) / p.curve_width))
    # weather logged at hour t is the forecast valid at t + lead_hours
    curve = np.concatenate([curve[:p.lead_hours], curve[:series_length - p.lead_hours]])
    power = np.clip(curve + rng.normal(0.0, p.power_noise, series_length), 0.0, 1.0)
    return [
        WindRecord(p.start + int(i) * HOUR, float(speed[i]), float(direction[i]),
                   float(zonal[i]), float(meridional[i]), float(power[i]))
        for i in hours
    ]
