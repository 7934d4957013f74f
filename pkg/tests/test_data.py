import numpy as np
import pytest
from numpy.testing import assert_allclose

from hbnode.data import (
    IrregularSeries,
    LabeledPointSet,
    SinusoidForcing,
    gen_oscillator_series,
    load_csv_series,
    sample_point_cloud,
    split_series,
    window_series,
    windowed_splits,
)
from hbnode.nn import split_rngs


# ---------------------------------------------------------------------------
# independent oracles, written before the assertions that use them

OMEGA = np.sqrt(0.99)


def damped_free_response(t):
    """Closed-form solution of x'' + 0.2 x' + x = 0 from x(0)=1, x'(0)=0,
    via the characteristic roots -0.1 +- i*sqrt(0.99)."""
    return np.exp(-0.1 * t) * (np.cos(OMEGA * t)
                               + (0.1 / OMEGA) * np.sin(OMEGA * t))


def damped_free_velocity(t):
    return -np.exp(-0.1 * t) * np.sin(OMEGA * t) / OMEGA


# ---------------------------------------------------------------------------
# point cloud

def test_point_cloud_counts():
    for seed in (0, 1, 999):
        cloud = sample_point_cloud(seed)
        assert len(cloud) == 120
        assert int(np.sum(cloud.mask("inner"))) == 40
        assert int(np.sum(cloud.mask("outer"))) == 80


def test_point_cloud_radial_bounds():
    cloud = sample_point_cloud(7)
    radii = np.hypot(cloud.points[:, 0], cloud.points[:, 1])
    inner = radii[cloud.mask("inner")]
    outer = radii[cloud.mask("outer")]
    assert np.all(inner < 0.5)
    assert np.all((outer > 0.85) & (outer < 1.0))


def test_point_cloud_area_uniform_moments():
    # uniform over a disk of radius R has E[r^2] = R^2/2; over the annulus,
    # (a^2 + b^2)/2
    inner_sq = []
    outer_sq = []
    seed = 0
    while len(inner_sq) < 100000:
        cloud = sample_point_cloud(seed)
        radii_sq = cloud.points[:, 0] ** 2 + cloud.points[:, 1] ** 2
        inner_sq.extend(radii_sq[cloud.mask("inner")])
        outer_sq.extend(radii_sq[cloud.mask("outer")])
        seed += 1
    inner_mean = np.mean(inner_sq)
    outer_mean = np.mean(outer_sq)
    assert abs(inner_mean - 0.125) <= 0.01 * 0.125
    want_outer = (0.85 ** 2 + 1.0) / 2.0
    assert abs(outer_mean - want_outer) <= 0.01 * want_outer


def test_point_cloud_deterministic():
    a = sample_point_cloud(42)
    b = sample_point_cloud(42)
    assert np.array_equal(a.points, b.points)
    assert a.labels == b.labels
    c = sample_point_cloud(43)
    assert not np.array_equal(a.points, c.points)


def test_point_set_validates_radii():
    with pytest.raises(ValueError):
        LabeledPointSet([[0.6, 0.0]], ["inner"])
    with pytest.raises(ValueError):
        LabeledPointSet([[0.5, 0.0]], ["outer"])
    with pytest.raises(ValueError):
        LabeledPointSet([[0.1, 0.0]], ["edge"])


# ---------------------------------------------------------------------------
# oscillator generator

def test_oscillator_zero_forcing_matches_closed_form():
    quiet = SinusoidForcing(amplitude=0.0, harmonics=0)
    series = gen_oscillator_series(0, length=200, drop_fraction=0.0,
                                   forcing=quiet)
    assert_allclose(series.attribute("x"), damped_free_response(series.times),
                    atol=1e-6)
    assert_allclose(series.attribute("xdot"),
                    damped_free_velocity(series.times), atol=1e-6)
    assert np.all(series.attribute("u") == 0.0)


def test_oscillator_drop_counts():
    series = gen_oscillator_series(3, length=1000, drop_fraction=0.1)
    assert len(series) == 900
    full = gen_oscillator_series(3, length=1000, drop_fraction=0.0)
    assert len(full) == 1000
    assert_allclose(full.times, np.arange(1000) * 0.1, atol=0.0)


def test_oscillator_keeps_endpoints():
    series = gen_oscillator_series(11, length=50, drop_fraction=0.3)
    assert series.times[0] == 0.0
    assert series.times[-1] == pytest.approx(49 * 0.1)


def test_oscillator_attributes_and_determinism():
    a = gen_oscillator_series(5, length=120, drop_fraction=0.1)
    assert a.attribute_names == ("u", "x", "xdot")
    assert np.all(np.diff(a.times) > 0.0)
    b = gen_oscillator_series(5, length=120, drop_fraction=0.1)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.values, b.values)
    c = gen_oscillator_series(6, length=120, drop_fraction=0.1)
    assert not np.array_equal(a.values, c.values)


def test_oscillator_forcing_column_matches_the_drive():
    series = gen_oscillator_series(9, length=80, drop_fraction=0.0)
    u = SinusoidForcing().build(split_rngs(9, 2)[0])
    assert_allclose(series.attribute("u"),
                    np.array([u(t) for t in series.times]), atol=1e-12)


def test_oscillator_validates_drop_fraction():
    with pytest.raises(ValueError):
        gen_oscillator_series(0, length=100, drop_fraction=1.0)
    with pytest.raises(ValueError):
        gen_oscillator_series(0, length=100, drop_fraction=-0.1)


# ---------------------------------------------------------------------------
# CSV ingestion

def test_csv_two_row_file(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("t,v\n0,1\n1,2\n", encoding="utf-8")
    series = load_csv_series(p, "t", ["v"])
    assert_allclose(series.times, [0.0, 1.0])
    assert_allclose(series.values, [[1.0], [2.0]])
    assert series.attribute_names == ("v",)


def test_csv_sorts_out_of_order_rows(tmp_path):
    p = tmp_path / "shuffled.csv"
    p.write_text("t,a,b\n2,20,200\n0,0,0\n1,10,100\n", encoding="utf-8")
    series = load_csv_series(p, "t", ["b", "a"])
    assert_allclose(series.times, [0.0, 1.0, 2.0])
    assert_allclose(series.values, [[0.0, 0.0], [100.0, 10.0],
                                    [200.0, 20.0]])


def test_csv_missing_column(tmp_path):
    p = tmp_path / "short.csv"
    p.write_text("t,v\n0,1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="missing columns"):
        load_csv_series(p, "t", ["w"])


def test_csv_parse_error_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,v\n0,1\nnope,2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 3"):
        load_csv_series(p, "t", ["v"])


def test_csv_duplicate_time_names_line(tmp_path):
    p = tmp_path / "dup.csv"
    p.write_text("t,v\n0,1\n1,2\n0,3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="duplicate time"):
        load_csv_series(p, "t", ["v"])


# ---------------------------------------------------------------------------
# windowing and splits

def _series(n):
    times = np.arange(n, dtype=float)
    values = np.column_stack([times * 10.0])
    return IrregularSeries(times, values, ("v",))


def test_window_single_segment():
    windows = window_series(_series(130), 64, 8, 65)
    assert len(windows) == 1
    window, target = windows[0]
    assert_allclose(window.times, np.arange(64.0))
    assert_allclose(target.times, np.arange(64.0, 72.0))


def test_window_zero_forecast_gives_empty_targets():
    windows = window_series(_series(10), 4, 0, 4)
    assert len(windows) == 2
    for _, target in windows:
        assert len(target) == 0


def test_window_stride_one_count():
    assert len(window_series(_series(10), 4, 1, 1)) == 6


def test_window_rejects_short_series():
    with pytest.raises(ValueError):
        window_series(_series(5), 4, 2, 1)


def test_split_fractions():
    train, validation, test = split_series(_series(100))
    assert (len(train), len(validation), len(test)) == (50, 25, 25)
    joined = np.concatenate([train.times, validation.times, test.times])
    assert_allclose(joined, np.arange(100.0))


def test_windows_never_cross_split_boundaries():
    series = _series(40)
    splits = windowed_splits(series, 4, 2, 3)
    boundaries = (series.times[19], series.times[29])
    ranges = {"train": (0.0, 19.0), "validation": (20.0, 29.0),
              "test": (30.0, 39.0)}
    for name, windows in splits.items():
        lo, hi = ranges[name]
        assert windows, "split %s produced no windows" % name
        for window, target in windows:
            span = np.concatenate([window.times, target.times])
            assert span.min() >= lo and span.max() <= hi
    assert boundaries == (19.0, 29.0)


def test_series_validation():
    with pytest.raises(ValueError):
        IrregularSeries([0.0, 0.0], [[1.0], [2.0]], ("v",))
    with pytest.raises(ValueError):
        IrregularSeries([0.0, 1.0], [[1.0], [np.nan]], ("v",))
    with pytest.raises(ValueError):
        IrregularSeries([0.0, 1.0], [[1.0], [2.0]], ("v", "w"))
