"""Measurements, CSV I/O and the benchmark target generators."""

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .model import augment


@dataclass(frozen=True)
class Measurement:
    x: np.ndarray  # augmented, x[0] == 1
    y: float
    alpha: float = 1.0


class Dataset:
    """Static batch of measurements stored as arrays.

    ``X`` is ``(M, N+1)`` with the bias column first, ``y`` and ``alpha``
    are length ``M``.
    """

    def __init__(self, X, y, alpha=None, static=True):
        X = np.array(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-D (augmented inputs as rows)")
        y = np.array(y, dtype=np.float64).ravel()
        if alpha is None:
            alpha = np.ones(len(y))
        alpha = np.array(alpha, dtype=np.float64).ravel()
        if not (len(X) == len(y) == len(alpha)):
            raise ValueError("X, y and alpha lengths differ")
        if len(y) == 0:
            raise ValueError("no measurements")
        if not np.all(X[:, 0] == 1.0):
            raise ValueError("inputs must be augmented with a leading 1")
        for name, arr in (("X", X), ("y", y), ("alpha", alpha)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite values")
        if np.any(alpha < 0):
            raise ValueError("alpha must be non-negative")
        self.X, self.y, self.alpha = X, y, alpha
        self.static = static
        for arr in (self.X, self.y, self.alpha):
            arr.flags.writeable = False

    @classmethod
    def from_raw(cls, x_raw, y, alpha=None):
        x_raw = np.asarray(x_raw, dtype=np.float64)
        if x_raw.ndim == 1:
            x_raw = x_raw.reshape(-1, 1)
        return cls(augment(x_raw), y, alpha)

    @property
    def input_dim(self):
        return self.X.shape[1] - 1

    def __len__(self):
        return len(self.y)

    def __getitem__(self, m):
        return Measurement(self.X[m].copy(), float(self.y[m]), float(self.alpha[m]))

    def __iter__(self):
        return (self[m] for m in range(len(self)))

    def with_alpha(self, alpha):
        return Dataset(self.X, self.y, alpha, self.static)


def load_csv(path, alpha_default=1.0):
    """Read ``x1,...,xN,y[,alpha]`` rows into a dataset."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: no measurements") from None
        has_alpha = bool(header) and header[-1] == "alpha"
        n_x = len(header) - (2 if has_alpha else 1)
        if n_x < 0 or "y" not in header:
            raise ValueError(f"{path}: header must be x1,...,xN,y[,alpha]")
        rows, ys, alphas = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number in {row!r}") from None
            if not all(np.isfinite(vals)):
                raise ValueError(f"{path}:{lineno}: non-finite value in {row!r}")
            rows.append(vals[:n_x])
            ys.append(vals[n_x])
            alphas.append(vals[n_x + 1] if has_alpha else alpha_default)
    if not ys:
        raise ValueError(f"{path}: no measurements")
    return Dataset(augment(np.array(rows).reshape(len(ys), n_x)), ys, alphas)


def write_csv(dataset, path, with_alpha=True):
    n = dataset.input_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n)] + ["y"] + (["alpha"] if with_alpha else []))
        for m in range(len(dataset)):
            row = [repr(float(v)) for v in dataset.X[m, 1:]] + [repr(float(dataset.y[m]))]
            if with_alpha:
                row.append(repr(float(dataset.alpha[m])))
            w.writerow(row)


# -- benchmark targets --------------------------------------------------


def pyramid_target(x1, x2):
    return np.maximum(0.0, np.minimum.reduce([x1 + 1, x2 + 1, -x1 + 1, -x2 + 1]))


def gen_pyramid(grid_half_width=2.0, points_per_axis=41):
    if points_per_axis < 2:
        raise ValueError("points_per_axis must be at least 2")
    t = np.linspace(-grid_half_width, grid_half_width, points_per_axis)
    x1, x2 = np.meshgrid(t, t, indexing="ij")
    raw = np.column_stack([x1.ravel(), x2.ravel()])
    return Dataset.from_raw(raw, pyramid_target(raw[:, 0], raw[:, 1]))


POLYGON_RANGE = (-4.0, 4.0)
# min(0.5x+2, -0.5x+2) + max(-x-1, 0.2x, x-2)
POLYGON_MIN_PIECES = ((2.0, 0.5), (2.0, -0.5))  # (intercept, slope)
POLYGON_MAX_PIECES = ((-1.0, -1.0), (0.0, 0.2), (-2.0, 1.0))


def polygon_target(x):
    x = np.asarray(x, dtype=np.float64)
    lo = np.minimum.reduce([b + s * x for b, s in POLYGON_MIN_PIECES])
    hi = np.maximum.reduce([b + s * x for b, s in POLYGON_MAX_PIECES])
    return lo + hi


def polygon_kinks():
    """Interior kinks: x = -5/6 and 2.5 from the max part, 0 from the min part."""
    return np.array([-1.0 / 1.2, 0.0, 2.5])


def polygon_points():
    """The 8 sample abscissae: endpoints, kinks and three segment midpoints.

    The segments are [-4, -5/6], [-5/6, 0], [0, 2.5], [2.5, 4]; the short
    second one gets no midpoint.
    """
    lo, hi = POLYGON_RANGE
    k1, k2, k3 = polygon_kinks()
    mids = [(lo + k1) / 2, (k2 + k3) / 2, (k3 + hi) / 2]
    return np.sort(np.array([lo, k1, k2, k3, hi] + mids))


def gen_polygon():
    x = polygon_points()
    return Dataset.from_raw(x.reshape(-1, 1), polygon_target(x))


def corner_target(raw):
    return np.abs(np.asarray(raw, dtype=np.float64)).max(axis=-1)


def corner_surface(raw):
    """Signature of the dominating signed coordinate: 2*n for +x_n, 2*n+1 for -x_n."""
    raw = np.atleast_2d(raw)
    n = np.abs(raw).argmax(axis=1)
    neg = raw[np.arange(len(raw)), n] < 0
    return 2 * n + neg


def gen_corner(dim=8, samples_per_region=30, seed=0, margin=0.1):
    """Stratified samples of ``max_n |x_n|`` on ``[-1, 1]^dim``.

    Each of the ``2*dim`` linear surfaces gets ``samples_per_region``
    points whose dominating coordinate beats the runner-up by at least
    ``margin``, so every region is identifiable.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    rng = np.random.default_rng(seed)
    raws = []
    for n, sgn in itertools.product(range(dim), (1.0, -1.0)):
        pts = np.empty((samples_per_region, dim))
        for i in range(samples_per_region):
            lead = rng.uniform(margin + 0.2, 1.0)
            rest = rng.uniform(-(lead - margin), lead - margin, size=dim)
            rest[n] = sgn * lead
            pts[i] = rest
        raws.append(pts)
    raw = np.vstack(raws)
    return Dataset.from_raw(raw, corner_target(raw))
