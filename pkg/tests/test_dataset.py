import math
import warnings
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbnwp import dataset as ds

T0 = datetime(2010, 1, 1)


def ramp_records(n, start=T0):
    # every variable encodes its own hour so feature columns are easy to read
    return [ds.WindRecord(start + i * ds.HOUR, 1000 + i, 2000 + i, 3000 + i, 4000 + i, i / 1000)
            for i in range(n)]


def test_feature_layout():
    assert ds.N_FEATURES == 124
    assert ds.FEATURE_NAMES[0] == "ks_lag0"
    assert ds.FEATURE_NAMES[24] == "ks_lag24"
    assert ds.FEATURE_NAMES[25] == "kd_lag0"
    assert ds.FEATURE_NAMES[100] == "kp_lag1"
    assert ds.FEATURE_NAMES[123] == "kp_lag24"
    assert ds.LAST_POWER_COLUMN == 100


def test_build_features_against_hand_assembly():
    recs = ramp_records(60)
    t = 30
    feats, target = ds.build_features(recs, t)
    expected = []
    for name in ("ks", "kd", "kz", "km"):
        expected += [getattr(recs[t - lag], name) for lag in range(25)]
    expected += [recs[t - lag].kp for lag in range(1, 25)]
    assert feats.tolist() == expected
    assert target == recs[t + 1].kp


def test_build_features_range_and_missing():
    recs = ramp_records(30)
    with pytest.raises(IndexError):
        ds.build_features(recs, 23)
    with pytest.raises(IndexError):
        ds.build_features(recs, 29)
    assert ds.build_features(recs, 24) is not None
    recs[10] = ds.WindRecord(recs[10].timestamp, math.nan, 1, 1, 1, 0.5)
    assert ds.build_features(recs, 24) is None


def test_build_samples_matches_build_features():
    recs = ramp_records(80)
    s = ds.build_samples(recs)
    assert len(s) == 80 - 25
    for row, t in ((0, 24), (17, 41), (len(s) - 1, 78)):
        feats, target = ds.build_features(recs, t)
        assert np.array_equal(s.features[row], feats)
        assert s.targets[row] == target
        assert s.timestamps[row] == recs[t + 1].timestamp


def test_gaps_skip_windows():
    recs = ramp_records(100)
    del recs[50]
    s = ds.build_samples(recs)
    # windows touching hour 50 as a lag (t = 50..74) or as the target (t = 49) are gone
    assert len(s) == 75 - 26
    assert all(ts != T0 + 50 * ds.HOUR for ts in s.timestamps)


def test_short_series_has_no_windows():
    assert len(ds.build_samples(ramp_records(25))) == 0
    assert len(ds.build_samples(ramp_records(26))) == 1
    assert len(ds.build_samples([])) == 0


def test_csv_round_trip(tmp_path):
    recs = ds.synthesize(150, 4)
    path = tmp_path / "farm.csv"
    ds.write_csv(recs, path)
    assert ds.parse_csv(path) == recs


def test_csv_missing_cells_and_offsets(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("timestamp,ks,kd,kz,km,kp\n"
                    "2010-01-01T00:00:00,1,2,3,4,\n"
                    "2010-01-01T02:00:00+01:00,1,2,3,4,0.5\n")
    recs = ds.parse_csv(path)
    assert math.isnan(recs[0].kp)
    assert recs[1].timestamp == datetime(2010, 1, 1, 1)


@pytest.mark.parametrize("body, line", [
    ("2010-01-01T00:00:00,1,2,3,4\n", 2),
    ("2010-01-01T00:00:00,1,2,3,4,0.1\n2010-01-01T01:00:00,1,x,3,4,0.1\n", 3),
    ("2010-01-01T00:00:00,1,2,3,4,0.1\n2010-01-01T00:00:00,1,2,3,4,0.1\n", 3),
    ("not-a-date,1,2,3,4,0.1\n", 2),
    ("2010-01-01T00:00:00,1,inf,3,4,0.1\n", 2),
])
def test_csv_errors_carry_line_numbers(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,ks,kd,kz,km,kp\n" + body)
    with pytest.raises(ds.DataFormatError, match=f":{line}:"):
        ds.parse_csv(path)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,a,b\n")
    with pytest.raises(ds.DataFormatError, match=":1:"):
        ds.parse_csv(path)


def test_collapse_releases():
    t = datetime(2010, 1, 1, 5)
    releases = [(t, t - timedelta(hours=12), (1, 2, 3, 4)),
                (t, t - timedelta(hours=1), (5, 6, 7, 8)),
                (t, t - timedelta(hours=6), (3, 4, 5, 6))]
    assert ds.collapse_releases(releases)[t] == (5, 6, 7, 8)
    assert ds.collapse_releases(releases, "mean")[t] == (3.0, 4.0, 5.0, 6.0)
    with pytest.raises(ValueError):
        ds.collapse_releases(releases, "first")


def test_normalization_fit_on_train_rows_only():
    s = ds.build_samples(ramp_records(200))
    scaled, norm = ds.normalize(s, fit_on=slice(0, 100))
    assert np.array_equal(norm.feature_min, s.features[:100].min(axis=0))
    assert np.array_equal(norm.feature_max, s.features[:100].max(axis=0))
    assert scaled.features.min() >= 0 and scaled.features.max() <= 1
    # later rows lie above the fitted range and are clipped
    assert np.all(scaled.features[150:, 0] == 1.0)


def test_constant_column_maps_to_zero():
    norm = ds.Normalization.fit([[1.0, 5.0], [2.0, 5.0]], [0.2, 0.4])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        x = norm.transform_features([[1.5, 5.0]])
    assert x.tolist() == [[0.5, 0.0]]


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30, unique=True))
def test_normalization_round_trip(values):
    x = np.array(values).reshape(-1, 1)
    norm = ds.Normalization.fit(x, np.array(values))
    back = norm.inverse_features(norm.transform_features(x))
    assert np.allclose(back, x, atol=1e-9 * (1 + np.abs(x).max()))
    assert np.allclose(norm.inverse_targets(norm.transform_targets(values)), values, atol=1e-9 * 1e3)


def test_far_out_of_range_warns_and_clips():
    norm = ds.Normalization.fit([[0.0], [10.0]], [0.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert norm.transform_features([[11.5]]).tolist() == [[1.0]]
    with pytest.warns(ds.FeatureRangeWarning):
        assert norm.transform_features([[12.5]]).tolist() == [[1.0]]
    with pytest.warns(ds.FeatureRangeWarning):
        assert norm.transform_features([[-3.0]]).tolist() == [[0.0]]


def test_sample_set_raw_inverts_normalize():
    s = ds.build_samples(ds.synthesize(300, 2))
    scaled, _ = ds.normalize(s)
    raw = scaled.raw()
    assert np.allclose(raw.features, s.features, rtol=0, atol=1e-9)
    assert np.allclose(raw.targets, s.targets, rtol=0, atol=1e-12)


def test_chronological_split():
    s = ds.build_samples(ramp_records(125))
    boundary = s.timestamps[70]
    train, test = ds.chronological_split(s, boundary)
    assert len(train) == 70 and len(test) == 30
    assert max(train.timestamps) < boundary <= min(test.timestamps)
    with pytest.raises(ValueError):
        ds.chronological_split(s, s.timestamps[0])
    with pytest.raises(ValueError):
        ds.chronological_split(s, s.timestamps[-1] + ds.HOUR)


def test_fraction_boundary():
    s = ds.build_samples(ramp_records(1025))
    train, test = ds.chronological_split(s, ds.fraction_boundary(s, 0.7))
    assert (len(train), len(test)) == (700, 300)
    with pytest.raises(ValueError):
        ds.fraction_boundary(s, 1.0)


def test_synthesize_frozen_and_deterministic():
    recs = ds.synthesize(200, 1)
    assert recs[0].timestamp == datetime(2007, 1, 1)
    assert recs[0].ks == 7.885404138552909
    assert recs[199].kp == 0.2924544867321863
    assert recs == ds.synthesize(200, 1)
    assert recs != ds.synthesize(200, 2)


def test_synthetic_series_looks_like_a_farm():
    recs = ds.synthesize(5000, 1)
    ks = np.array([r.ks for r in recs])
    kd = np.array([r.kd for r in recs])
    kp = np.array([r.kp for r in recs])
    kz = np.array([r.kz for r in recs])
    km = np.array([r.km for r in recs])
    assert kp.min() >= 0 and kp.max() <= 1
    assert ks.min() >= 0
    assert np.allclose(np.hypot(kz, km), ks)
    assert np.all((kd >= 180) & (kd <= 300))
    assert np.corrcoef(ks, kp)[0, 1] > 0.5
    assert len(ds.build_samples(recs)) == 5000 - 25
    with pytest.raises(ValueError):
        ds.synthesize(10, 1)
