"""Pose -> leg-length corpus: generation, statistics, min-max scaling, splits and CSV I/O."""
import csv
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    GenerationError,
    InvalidArgumentError,
    NormalizationError,
    ParseError,
    ShapeError,
    SingularConfigurationError,
    SplitError,
)
from .kinematics import DEFAULT_DOMAIN, inverse_kinematics_batch

INPUT_COLUMNS = ("theta", "psi", "c")
TARGET_COLUMNS = ("q1", "q2", "q3")
COLUMNS = INPUT_COLUMNS + TARGET_COLUMNS
SCHEMES = ("grid", "random")


def _fmt(x):
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float).reshape(-1, 3)
        Y = np.asarray(self.targets, dtype=float).reshape(-1, 3)
        if X.shape[0] != Y.shape[0]:
            raise ShapeError(f"{X.shape[0]} input rows but {Y.shape[0]} target rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidArgumentError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", Y)

    @property
    def n(self):
        return self.inputs.shape[0]

    def __len__(self):
        return self.n

    def columns(self):
        """All six columns side by side, ``(n, 6)``."""
        return np.hstack([self.inputs, self.targets])

    def subset(self, indices):
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.inputs[idx], self.targets[idx])

    def equals(self, other):
        return np.array_equal(self.inputs, other.inputs) and np.array_equal(
            self.targets, other.targets
        )


def _grid_axis(lo, hi, k):
    if k == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, k)


def grid_poses(domain, n):
    """First ``n`` points of a k x k x k lattice over ``domain`` (k^3 >= n).

    Rows run theta-slowest, c-fastest; a one-point axis sits at the range
    midpoint, so ``n == 1`` gives the domain centroid.
    """
    k = 1
    while k**3 < n:
        k += 1
    axes = [_grid_axis(lo, hi, k) for lo, hi in domain.bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return grid[:n]


def generate(geom, domain=DEFAULT_DOMAIN, scheme="grid", n=4818, seed=0):
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if scheme == "grid":
        poses = grid_poses(domain, n)
    elif scheme == "random":
        rng = np.random.default_rng(seed)
        lo, hi = domain.bounds.T
        poses = rng.uniform(lo, hi, size=(n, 3))
    else:
        raise InvalidArgumentError(f"unknown sampling scheme {scheme!r}; use one of {SCHEMES}")
    try:
        targets = inverse_kinematics_batch(geom, poses)
    except SingularConfigurationError as exc:
        raise GenerationError(str(exc)) from exc
    return Dataset(poses, targets)


@dataclass(frozen=True)
class ColumnStats:
    name: str
    min: float
    max: float
    mean: float
    median: float
    variance: float


def stats(ds):
    """Min, max, mean, median and population variance of every column."""
    if ds.n < 1:
        raise InvalidArgumentError("cannot summarise an empty dataset")
    data = ds.columns()
    return [
        ColumnStats(
            name,
            float(col.min()),
            float(col.max()),
            float(col.mean()),
            float(np.median(col)),
            float(col.var()),
        )
        for name, col in zip(COLUMNS, data.T)
    ]


def format_stats(column_stats, title=None):
    lines = [title] if title else []
    lines.append(f"{'':8s}{'Min':>14s}{'Max':>14s}{'Mean':>14s}{'Median':>14s}{'Variance':>14s}")
    for s in column_stats:
        lines.append(
            f"{s.name:8s}{s.min:14.6g}{s.max:14.6g}{s.mean:14.6g}{s.median:14.6g}{s.variance:14.6g}"
        )
    return "\n".join(lines) + "\n"


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Per-column affine map onto [0, 1]; constant columns are rejected."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        lo, hi = X.min(axis=0), X.max(axis=0)
        constant = np.flatnonzero(hi <= lo)
        if constant.size:
            raise NormalizationError(f"column(s) {constant.tolist()} are constant")
        self.data_min_ = lo
        self.data_max_ = hi
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return (X - self.data_min_) / (self.data_max_ - self.data_min_)

    def inverse_transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X * (self.data_max_ - self.data_min_) + self.data_min_


@dataclass(frozen=True, eq=False)
class NormalizationMap:
    """Per-column min and max for the three inputs followed by the three targets."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.mins, dtype=float).ravel()
        hi = np.asarray(self.maxs, dtype=float).ravel()
        if lo.shape != (6,) or hi.shape != (6,):
            raise ShapeError("normalization map needs 6 mins and 6 maxs")
        if np.any(hi <= lo):
            raise NormalizationError("normalization map has max <= min in some column")
        object.__setattr__(self, "mins", lo)
        object.__setattr__(self, "maxs", hi)

    @property
    def span(self):
        return self.maxs - self.mins

    def normalize_inputs(self, X):
        return (np.asarray(X, float) - self.mins[:3]) / self.span[:3]

    def normalize_targets(self, Y):
        return (np.asarray(Y, float) - self.mins[3:]) / self.span[3:]

    def denormalize_inputs(self, X):
        return np.asarray(X, float) * self.span[:3] + self.mins[:3]

    def denormalize_targets(self, Y):
        return np.asarray(Y, float) * self.span[3:] + self.mins[3:]

    def to_lines(self):
        return [
            "min " + " ".join(_fmt(v) for v in self.mins),
            "max " + " ".join(_fmt(v) for v in self.maxs),
        ]

    @classmethod
    def from_lines(cls, lines, first_line=1):
        values = {}
        for offset, line in enumerate(lines):
            parts = line.split()
            if len(parts) != 7 or parts[0] not in ("min", "max"):
                raise ParseError("expected 'min' or 'max' followed by 6 numbers", first_line + offset)
            try:
                values[parts[0]] = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), first_line + offset) from None
        if set(values) != {"min", "max"}:
            raise ParseError("normalization map needs one 'min' and one 'max' line", first_line)
        return cls(values["min"], values["max"])


def normalize(ds):
    scaler = MinMaxNormalizer().fit(ds.columns())
    scaled = scaler.transform(ds.columns())
    return Dataset(scaled[:, :3], scaled[:, 3:]), NormalizationMap(scaler.data_min_, scaler.data_max_)


def denormalize(ds, mapping):
    if not isinstance(mapping, NormalizationMap):
        raise ShapeError("denormalize needs a NormalizationMap")
    return Dataset(mapping.denormalize_inputs(ds.inputs), mapping.denormalize_targets(ds.targets))


def save_map(mapping, path):
    with open(path, "w") as fh:
        fh.write("\n".join(mapping.to_lines()) + "\n")


def load_map(path):
    with open(path) as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    return NormalizationMap.from_lines(lines)


@dataclass(frozen=True, eq=False)
class SplitIndices:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


def split(ds, ratios=(0.70, 0.15, 0.15), seed=0):
    """Seeded shuffle, then contiguous train/validation/test blocks.

    Train gets ``floor(n * r_train)`` rows, validation ``floor(n * r_val)``
    and test the remainder.
    """
    n = ds.n if isinstance(ds, Dataset) else int(ds)
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise SplitError("ratios must be three non-negative numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {sum(ratios)}")
    n_train = int(math.floor(n * ratios[0] + 1e-9))
    n_val = int(math.floor(n * ratios[1] + 1e-9))
    if ratios[2] == 0:
        n_val = n - n_train if ratios[1] > 0 else 0
        n_train = n - n_val
    sizes = (n_train, n_val, n - n_train - n_val)
    for name, size, r in zip(("train", "validation", "test"), sizes, ratios):
        if r > 0 and size == 0:
            raise SplitError(f"{name} partition is empty for n={n} and ratio {r}")
    order = np.random.default_rng(seed).permutation(n)
    return SplitIndices(
        order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]
    )


def save_csv(ds, path):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for row in ds.columns():
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(COLUMNS):
            raise ParseError(f"header must be {','.join(COLUMNS)}", 1)
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(COLUMNS):
                raise ParseError(f"expected {len(COLUMNS)} columns, got {len(record)}", lineno)
            try:
                values = [float(v) for v in record]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite value", lineno)
            rows.append(values)
    data = np.array(rows, dtype=float).reshape(-1, 6)
    return Dataset(data[:, :3], data[:, 3:])
