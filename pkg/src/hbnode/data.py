"""Dataset construction: annulus point cloud, forced damped oscillator
sequences, CSV ingestion, and window segmentation for forecasting.

Everything here is a pure function of seed and configuration. The
oscillator generator stands in for proprietary vibration recordings; the
CSV loader accepts real recordings with the same shape.
"""

import csv

import numpy as np

from .nn import split_rngs
from .odeint import SolverConfig, integrate

INNER_RADIUS = 0.5
OUTER_RADIUS_LO = 0.85
OUTER_RADIUS_HI = 1.0


class LabeledPointSet:
    """2-d points tagged inner/outer, with the radial bounds enforced."""

    def __init__(self, points, labels):
        points = np.asarray(points, dtype=np.float64)
        labels = list(labels)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError("points must be n x 2")
        if len(labels) != points.shape[0]:
            raise ValueError("one label per point required")
        radii = np.hypot(points[:, 0], points[:, 1])
        for r, label in zip(radii, labels):
            if label == "inner":
                if not r < INNER_RADIUS:
                    raise ValueError("inner point at radius %g" % r)
            elif label == "outer":
                if not OUTER_RADIUS_LO < r < OUTER_RADIUS_HI:
                    raise ValueError("outer point at radius %g" % r)
            else:
                raise ValueError("unknown label %r" % (label,))
        self.points = points
        self.labels = labels

    def __len__(self):
        return self.points.shape[0]

    def mask(self, label):
        return np.array([lab == label for lab in self.labels])


def sample_point_cloud(seed):
    """40 inner-disk points and 80 annulus points, area-uniform in each.

    Radii use the square-root transform of a uniform draw so density is
    uniform over the region, not over the radius.
    """
    rng_inner, rng_outer = split_rngs(seed, 2)
    u = rng_inner.uniform(0.0, 1.0, 40)
    theta = rng_inner.uniform(0.0, 2.0 * np.pi, 40)
    r = INNER_RADIUS * np.sqrt(u)
    inner = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    u = rng_outer.uniform(0.0, 1.0, 80)
    theta = rng_outer.uniform(0.0, 2.0 * np.pi, 80)
    r = np.sqrt(OUTER_RADIUS_LO ** 2
                + u * (OUTER_RADIUS_HI ** 2 - OUTER_RADIUS_LO ** 2))
    outer = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    points = np.concatenate([inner, outer])
    labels = ["inner"] * 40 + ["outer"] * 80
    return LabeledPointSet(points, labels)


class IrregularSeries:
    """Strictly increasing times with one row of attribute values each."""

    def __init__(self, times, values, attribute_names):
        times = np.asarray(times, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        attribute_names = tuple(attribute_names)
        if times.ndim != 1:
            raise ValueError("times must be 1-d")
        if values.ndim != 2 or values.shape[0] != times.size:
            raise ValueError("values must be (time x attribute)")
        if values.shape[1] != len(attribute_names):
            raise ValueError("attribute names do not match value columns")
        if times.size > 1 and not np.all(np.diff(times) > 0.0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("times and values must be finite")
        self.times = times
        self.values = values
        self.attribute_names = attribute_names

    def __len__(self):
        return self.times.size

    def attribute(self, name):
        return self.values[:, self.attribute_names.index(name)]

    def slice(self, start, stop):
        return IrregularSeries(self.times[start:stop].copy(),
                               self.values[start:stop].copy(),
                               self.attribute_names)

    def __repr__(self):
        return ("IrregularSeries(%d samples, attributes=%s)"
                % (len(self), list(self.attribute_names)))


class SinusoidForcing:
    """A primary sinusoid plus a few seeded low-amplitude harmonics.

    Smooth everywhere, so the adaptive solver under the generator never
    fights discontinuities.
    """

    def __init__(self, amplitude=1.0, frequency=1.3, harmonics=3,
                 harmonic_scale=0.1):
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.harmonics = int(harmonics)
        self.harmonic_scale = float(harmonic_scale)

    def build(self, rng):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        mults = rng.uniform(1.5, 5.0, self.harmonics)
        phases = rng.uniform(0.0, 2.0 * np.pi, self.harmonics)
        amps = (self.harmonic_scale * self.amplitude
                * rng.uniform(0.5, 1.0, self.harmonics))

        def u(t):
            drive = self.amplitude * np.sin(self.frequency * t + phase)
            for a, m, ph in zip(amps, mults, phases):
                drive += a * np.sin(self.frequency * m * t + ph)
            return drive

        return u


def gen_oscillator_series(seed, length=1000, drop_fraction=0.1,
                          forcing=None, damping=0.2, stiffness=1.0,
                          dt=0.1, x0=1.0, v0=0.0):
    """Simulate x'' + damping*x' + stiffness*x = u(t) on a uniform grid,
    then discard a seeded fraction of interior samples.

    Records attributes (u, x, xdot) at the retained times. The number of
    dropped samples is ceil(drop_fraction * length); the first and last
    samples always survive, keeping the span intact.
    """
    if not 0.0 <= drop_fraction < 1.0:
        raise ValueError("drop_fraction must be in [0, 1)")
    if length < 2:
        raise ValueError("length must be at least 2")
    if forcing is None:
        forcing = SinusoidForcing()
    rng_force, rng_drop = split_rngs(seed, 2)
    u = forcing.build(rng_force)
    grid = np.arange(length) * float(dt)

    def rhs(t, y):
        return np.array([y[1], u(t) - damping * y[1] - stiffness * y[0]])

    res = integrate(rhs, np.array([float(x0), float(v0)]), grid,
                    SolverConfig.dopri45(1e-10, 1e-12))
    states = res.states
    values = np.column_stack([np.array([u(t) for t in grid]),
                              states[:, 0], states[:, 1]])
    n_drop = int(np.ceil(drop_fraction * length))
    if n_drop > length - 2:
        raise ValueError("drop_fraction leaves fewer than two samples")
    keep = np.ones(length, dtype=bool)
    if n_drop > 0:
        interior = np.arange(1, length - 1)
        keep[rng_drop.choice(interior, size=n_drop, replace=False)] = False
    return IrregularSeries(grid[keep], values[keep], ("u", "x", "xdot"))


def load_csv_series(path, time_column, value_columns):
    """Read an IrregularSeries from a comma-separated UTF-8 file.

    The first row must name the columns. Rows arrive in any order and are
    sorted by time; parse failures and duplicate times are reported with
    the file line they came from (the header is line 1).
    """
    value_columns = list(value_columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError("%s: empty file, expected a header row" % path)
        header = [h.strip() for h in header]
        missing = [c for c in [time_column] + value_columns
                   if c not in header]
        if missing:
            raise ValueError("%s: missing columns %s (header has %s)"
                             % (path, missing, header))
        t_at = header.index(time_column)
        v_at = [header.index(c) for c in value_columns]
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = float(row[t_at])
                vals = [float(row[i]) for i in v_at]
            except (ValueError, IndexError):
                raise ValueError("%s: cannot parse line %d: %r"
                                 % (path, line, row))
            rows.append((t, vals, line))
    rows.sort(key=lambda r: r[0])
    for before, after in zip(rows, rows[1:]):
        if after[0] == before[0]:
            raise ValueError("%s: duplicate time %g at line %d"
                             % (path, after[0], after[2]))
    return IrregularSeries([r[0] for r in rows], [r[1] for r in rows],
                           value_columns)


def window_series(series, window_len, forecast_len, stride):
    """Cut (input, target) window pairs at a fixed stride.

    A window starts at every index i = 0, stride, 2*stride, ... for which
    input [i, i+window_len) and target [i+window_len, i+window_len
    +forecast_len) both fit. Returns IrregularSeries pairs.
    """
    if window_len < 1 or forecast_len < 0 or stride < 1:
        raise ValueError("window_len >= 1, forecast_len >= 0, stride >= 1")
    total = window_len + forecast_len
    if total > len(series):
        raise ValueError("series of length %d too short for window %d + "
                         "forecast %d" % (len(series), window_len,
                                          forecast_len))
    out = []
    i = 0
    while i + total <= len(series):
        out.append((series.slice(i, i + window_len),
                    series.slice(i + window_len, i + total)))
        i += stride
    return out


def split_series(series, fractions=(0.5, 0.25, 0.25)):
    """Split by sample index into len(fractions) consecutive pieces."""
    fractions = [float(f) for f in fractions]
    if any(f <= 0.0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be positive and sum to 1")
    n = len(series)
    pieces = []
    at = 0
    for f in fractions[:-1]:
        nxt = at + int(f * n)
        pieces.append(series.slice(at, nxt))
        at = nxt
    pieces.append(series.slice(at, n))
    return pieces


def windowed_splits(series, window_len, forecast_len, stride,
                    fractions=(0.5, 0.25, 0.25)):
    """Split first, window second, so no window crosses a split boundary."""
    if len(fractions) != 3:
        raise ValueError("expected train/validation/test fractions")
    train, validation, test = split_series(series, fractions)
    return {"train": window_series(train, window_len, forecast_len, stride),
            "validation": window_series(validation, window_len,
                                        forecast_len, stride),
            "test": window_series(test, window_len, forecast_len, stride)}
