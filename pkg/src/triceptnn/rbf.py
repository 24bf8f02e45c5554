"""Gaussian radial-basis-function surrogate grown one neuron at a time.

Growth is greedy: every training input that is not yet a center is tried
as the next center, and the one whose addition leaves the smallest
least-squares training MSE wins (lowest sample index on ties).  Candidates
are scored through orthogonal projections: with ``Q`` an orthonormal basis
of the columns already in the model and ``r`` the current residual, adding
column ``g`` lowers the summed squared error by ``|g~' r|^2 / |g~|^2`` where
``g~ = g - Q Q' g``, which is exactly the drop a full refit would give.
After each pick the output weights are refit with
:func:`triceptnn.numerics.least_squares`.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import InvalidArgumentError, NotTrainedError, ParseError, ShapeError
from .mlp import _LineReader, _metadata_lines, read_metadata
from .numerics import least_squares

FORMAT_TAG = "triceptnn-rbf"
FORMAT_VERSION = 1
# A candidate must add a new direction of at least sqrt(eps) of its own norm.
ADMISSION_RATIO = 1e-16


def spread_to_beta(spread):
    """Gaussian exponent that puts the half-activation point at ``spread``."""
    if not (spread > 0 and math.isfinite(spread)):
        raise InvalidArgumentError(f"spread must be a positive finite number, got {spread}")
    return math.log(2.0) / spread**2


def gaussian(x, center, beta):
    """``exp(-beta * |x - center|^2)``; ``x`` may be a single vector or rows."""
    if not beta > 0:
        raise InvalidArgumentError("beta must be > 0")
    diff = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    return np.exp(-beta * np.sum(diff * diff, axis=-1))


def _sq_distances(X, C):
    # Exact per-pair sums; the dot-product expansion loses digits near the diagonal.
    out = np.zeros((X.shape[0], C.shape[0]))
    for k in range(X.shape[1]):
        out += (X[:, k, None] - C[None, :, k]) ** 2
    return out


@dataclass(eq=False)
class RbfModel:
    centers: np.ndarray
    out_weights: np.ndarray
    out_bias: np.ndarray
    spread: float
    beta: float = None
    normalization: object = None
    input_bounds: np.ndarray = field(default=None)
    center_indices: tuple = ()

    def __post_init__(self):
        if self.beta is None:
            self.beta = spread_to_beta(self.spread)
        if not (self.beta > 0 and self.spread > 0):
            raise InvalidArgumentError("beta and spread must be > 0")
        self.centers = np.asarray(self.centers, dtype=float)
        if self.centers.ndim != 2:
            raise ShapeError(f"centers must be 2-D, got shape {self.centers.shape}")
        self.out_bias = np.asarray(self.out_bias, dtype=float)
        self.out_weights = np.asarray(self.out_weights, dtype=float).reshape(
            self.centers.shape[0], self.out_bias.shape[0]
        )

    @property
    def n_neurons(self):
        return self.centers.shape[0]

    def predict(self, X):
        return forward(self, X)


def forward(model, X):
    """``y_k = bias_k + sum_i w_ik * exp(-beta |x - c_i|^2)``, summed neuron by neuron."""
    if model is None or model.centers is None:
        raise NotTrainedError("RBF model has not been trained")
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.centers.shape[1]:
        raise ShapeError(f"input must have {model.centers.shape[1]} columns, got {X.shape[1]}")
    y = np.tile(model.out_bias, (X.shape[0], 1))
    for center, w in zip(model.centers, model.out_weights):
        y += gaussian(X, center, model.beta)[:, None] * w[None, :]
    return y[0] if single else y


@dataclass(frozen=True)
class RbfTrainRecord:
    neurons: int
    mse_train: float


def _mse(model, X, Y):
    return float(np.mean((Y - forward(model, X)) ** 2))


def train_incremental(X, Y, max_neurons=20, spread=1.0, goal_mse=1e-3, fit_bias=True):
    """Grow up to ``max_neurons`` Gaussian neurons on the training set.

    Starts from the bias-only fit (target means; zero without a bias).  If
    that already meets ``goal_mse`` the history is the single record for 0
    neurons; otherwise it holds one record per added neuron.  Once no
    remaining candidate adds a numerically new direction, further neurons
    are appended with zero weight so the history shows the plateau.  Growth
    stops early only when the model has as many coefficients as samples.

    Holds an ``n x n`` float64 work matrix, so memory grows with n^2.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ShapeError(f"need matching 2-D inputs and targets, got {X.shape} and {Y.shape}")
    n = X.shape[0]
    if n == 0:
        raise InvalidArgumentError("training set is empty")
    if max_neurons < 1:
        raise InvalidArgumentError("max_neurons must be >= 1")
    beta = spread_to_beta(spread)
    n_out = Y.shape[1]

    bias = Y.mean(axis=0) if fit_bias else np.zeros(n_out)
    model = RbfModel(np.empty((0, X.shape[1])), np.empty((0, n_out)), bias, spread, beta)
    current_mse = _mse(model, X, Y)
    if current_mse <= goal_mse:
        return model, [RbfTrainRecord(0, current_mse)]

    # Gr holds every candidate column with the current basis projected out.
    Gr = np.exp(-beta * _sq_distances(X, X))
    own_norm = np.einsum("ij,ij->j", Gr, Gr)
    basis = []
    residual = Y.copy()
    if fit_bias:
        q = np.full(n, 1.0 / math.sqrt(n))
        basis.append(q)
        Gr -= np.outer(q, q @ Gr)
        residual -= np.outer(q, q @ residual)

    centers, history = [], []
    available = np.ones(n, dtype=bool)
    while len(centers) < max_neurons and len(centers) + int(fit_bias) < n:
        norms = np.einsum("ij,ij->j", Gr, Gr)
        admissible = available & (norms > ADMISSION_RATIO * own_norm)
        if not admissible.any():
            # Every remaining column is numerically inside the current span:
            # all candidates tie at zero improvement, so take the lowest index
            # and give it a zero output weight.
            j = int(np.flatnonzero(available)[0])
            available[j] = False
            centers.append(j)
            model = _padded(X, Y, centers, model)
            history.append(RbfTrainRecord(len(centers), current_mse))
            continue
        proj = Gr.T @ residual
        score = np.full(n, -np.inf)
        score[admissible] = np.einsum("ij,ij->i", proj[admissible], proj[admissible]) / norms[admissible]
        j = int(np.argmax(score))

        column = gaussian(X, X[j], beta)
        q = column.copy()
        for _ in range(2):
            for b in basis:
                q -= b * (b @ q)
        q /= np.linalg.norm(q)
        basis.append(q)
        Gr -= np.outer(q, q @ Gr)
        residual -= np.outer(q, q @ residual)
        available[j] = False
        centers.append(j)

        model = _refit(X, Y, centers, beta, spread, fit_bias, model, current_mse)
        current_mse = _mse(model, X, Y)
        history.append(RbfTrainRecord(len(centers), current_mse))
        if current_mse <= goal_mse:
            break
    return model, history


def _refit(X, Y, centers, beta, spread, fit_bias, previous, previous_mse):
    idx = list(centers)
    design = np.exp(-beta * _sq_distances(X, X[idx]))
    if fit_bias:
        design = np.hstack([design, np.ones((X.shape[0], 1))])
    coef = least_squares(design, Y)
    k = len(idx)
    bias = coef[k] if fit_bias else np.zeros(Y.shape[1])
    fresh = RbfModel(X[idx], coef[:k], bias, spread, beta, center_indices=tuple(idx))
    # The previous solution with a zero weight on the new neuron is feasible,
    # so never report a worse fit than it because of rounding in the solve.
    return fresh if _mse(fresh, X, Y) <= previous_mse else _padded(X, Y, centers, previous)


def _padded(X, Y, centers, previous):
    idx = list(centers)
    weights = np.vstack([previous.out_weights, np.zeros((1, Y.shape[1]))])
    return RbfModel(X[idx], weights, previous.out_bias, previous.spread, previous.beta,
                    center_indices=tuple(idx))


def _fmt(x):
    return format(float(x), ".17g")


def save_model(model, path):
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        f"spread {_fmt(model.spread)}",
        f"beta {_fmt(model.beta)}",
        "bias " + " ".join(_fmt(v) for v in model.out_bias),
        f"centers {model.n_neurons} {model.centers.shape[1]}",
    ]
    lines.extend(" ".join(_fmt(v) for v in row) for row in model.centers)
    lines.append(f"weights {model.n_neurons} {model.out_weights.shape[1]}")
    lines.extend(" ".join(_fmt(v) for v in row) for row in model.out_weights)
    lines.extend(_metadata_lines(model))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    reader = _LineReader(path)
    if reader.next().split() != [FORMAT_TAG, str(FORMAT_VERSION)]:
        raise ParseError(f"not a {FORMAT_TAG} v{FORMAT_VERSION} file", 1)
    try:
        spread = float(reader.keyed("spread", 1)[0])
        beta = float(reader.keyed("beta", 1)[0])
        lineno = reader.lineno
        bias = np.array([float(v) for v in reader.keyed("bias")])
        lineno = reader.lineno
        k, dim = (int(v) for v in reader.keyed("centers", 2))
        centers = np.vstack([reader.floats(dim) for _ in range(k)]) if k else np.empty((0, dim))
        lineno = reader.lineno
        k2, n_out = (int(v) for v in reader.keyed("weights", 2))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None
    if k2 != k or n_out != bias.size:
        raise ParseError("weight block does not match centers/bias", reader.lineno - 1)
    weights = np.vstack([reader.floats(n_out) for _ in range(k)]) if k else np.empty((0, n_out))
    bounds, normalization = read_metadata(reader)
    return RbfModel(centers, weights, bias, spread, beta, normalization, bounds)


class IncrementalRBF(RegressorMixin, BaseEstimator):
    """Greedy Gaussian RBF regressor (see :func:`train_incremental`)."""

    def __init__(self, spread=2.0, max_neurons=20, goal_mse=1e-3, fit_bias=True):
        self.spread = spread
        self.max_neurons = max_neurons
        self.goal_mse = goal_mse
        self.fit_bias = fit_bias

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, multi_output=True)
        Y = y.reshape(len(y), -1)
        model, self.history_ = train_incremental(
            X, Y, self.max_neurons, self.spread, self.goal_mse, self.fit_bias
        )
        model.input_bounds = np.vstack([X.min(axis=0), X.max(axis=0)])
        self.model_ = model
        self.n_features_in_ = X.shape[1]
        self._single_output = y.ndim == 1
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        y = forward(self.model_, X)
        return y[:, 0] if self._single_output else y
