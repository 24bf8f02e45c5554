"""Fully connected perceptron surrogate trained with Levenberg-Marquardt.

The functional core works on :class:`MlpModel` values (``init_model``,
``forward``, ``jacobian``, ``train_lm``); :class:`LevenbergMarquardtMLP`
wraps it in the scikit-learn estimator API.

Parameters are flattened layer by layer, each layer's weight matrix
row-major followed by its bias vector.  Jacobian rows are ordered
sample-major: row ``n * n_outputs + k`` is the error of output ``k`` on
sample ``n``.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import (
    InvalidArgumentError,
    NumericalError,
    ParseError,
    ShapeError,
    TrainingStalledError,
)
from .numerics import solve_spd

FORMAT_TAG = "triceptnn-mlp"
FORMAT_VERSION = 1


def tansig(v):
    return np.tanh(v)


def logsig(v):
    # Split by sign so exp never overflows.
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out if out.ndim else float(out)


def _linear(v):
    return np.asarray(v, dtype=float)


# activation -> (function, derivative expressed through the activation value)
ACTIVATIONS = {
    "tansig": (tansig, lambda a: 1.0 - a * a),
    "logsig": (logsig, lambda a: a * (1.0 - a)),
    "linear": (_linear, lambda a: np.ones_like(a)),
}
HIDDEN_ACTIVATIONS = ("tansig", "logsig")
OUTPUT_ACTIVATIONS = ("linear", "logsig")


@dataclass(eq=False)
class MlpModel:
    layer_sizes: tuple
    hidden_activation: str
    output_activation: str
    weights: list
    biases: list
    normalization: object = None  # NormalizationMap when trained in normalized space
    input_bounds: np.ndarray = field(default=None)  # (2, n_inputs) min/max seen in training

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise InvalidArgumentError(f"hidden activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise InvalidArgumentError(f"output activation must be one of {OUTPUT_ACTIVATIONS}")
        self.weights = [np.asarray(W, dtype=float) for W in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("need one weight matrix and bias per layer transition")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if W.shape != expected or b.shape != (expected[0],):
                raise ShapeError(f"layer {l + 1} has W{W.shape}, b{b.shape}; expected W{expected}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise NumericalError(f"layer {l + 1} has non-finite parameters")

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def activations(self):
        n_hidden = len(self.weights) - 1
        return [self.hidden_activation] * n_hidden + [self.output_activation]

    def get_flat_params(self):
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(self.weights, self.biases)])

    def with_flat_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got {theta.shape}")
        weights, biases, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            weights.append(theta[pos:pos + W.size].reshape(W.shape))
            pos += W.size
            biases.append(theta[pos:pos + b.size].copy())
            pos += b.size
        return replace(self, weights=weights, biases=biases)

    def predict(self, X):
        return forward(self, X)


def init_model(layer_sizes=(3, 5, 3), hidden_activation="tansig", seed=0,
               output_activation="linear"):
    """Weights uniform in [-0.5, 0.5] from ``default_rng(seed)``, biases zero."""
    sizes = tuple(layer_sizes)
    if len(sizes) < 2 or any(int(s) != s or s < 1 for s in sizes):
        raise InvalidArgumentError(f"layer sizes must be >= 2 positive integers, got {sizes}")
    rng = np.random.default_rng(seed)
    weights = [rng.uniform(-0.5, 0.5, size=(sizes[l + 1], sizes[l])) for l in range(len(sizes) - 1)]
    biases = [np.zeros(sizes[l + 1]) for l in range(len(sizes) - 1)]
    return MlpModel(sizes, hidden_activation, output_activation, weights, biases)


def _layer_outputs(model, X):
    outs = [X]
    for (W, b), act in zip(zip(model.weights, model.biases), model.activations()):
        outs.append(ACTIVATIONS[act][0](outs[-1] @ W.T + b))
    return outs


def _as_batch(model, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != model.layer_sizes[0]:
        raise ShapeError(f"input must have {model.layer_sizes[0]} columns, got shape {X.shape}")
    return X, single


def forward(model, X):
    """Network output for one input vector or an ``(N, n_inputs)`` batch."""
    X, single = _as_batch(model, X)
    y = _layer_outputs(model, X)[-1]
    return y[0] if single else y


def jacobian(model, X, Y, output_scale=None):
    """Analytic Jacobian of the errors ``(target - output) * output_scale``.

    Returns ``(J, e)`` with ``J[r, p] = d e_r / d theta_p`` (so ``J`` is the
    negated, scaled output Jacobian) and ``e`` the flattened error vector.
    """
    X, _ = _as_batch(model, X)
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    n_out = model.layer_sizes[-1]
    if Y.shape[1] != n_out:
        raise ShapeError(f"targets must have {n_out} columns, got {Y.shape[1]}")
    if X.shape[0] == 0:
        raise InvalidArgumentError("empty batch")
    scale = np.ones(n_out) if output_scale is None else np.asarray(output_scale, dtype=float)

    outs = _layer_outputs(model, X)
    if not all(np.all(np.isfinite(o)) for o in outs):
        raise NumericalError("non-finite activation in forward pass")
    derivs = [ACTIVATIONS[act][1](a) for act, a in zip(model.activations(), outs[1:])]
    N, L = X.shape[0], len(model.weights)

    J = np.empty((N, n_out, model.n_params))
    for k in range(n_out):
        delta = np.zeros((N, n_out))
        delta[:, k] = derivs[-1][:, k]
        blocks = [None] * L
        for l in range(L - 1, -1, -1):
            grad_W = delta[:, :, None] * outs[l][:, None, :]
            blocks[l] = np.hstack([grad_W.reshape(N, -1), delta])
            if l:
                delta = (delta @ model.weights[l]) * derivs[l - 1]
        J[:, k, :] = np.hstack(blocks)
    J *= -scale[None, :, None]
    e = ((Y - outs[-1]) * scale).ravel()
    return J.reshape(N * n_out, -1), e


def mse(outputs, targets):
    outputs = np.asarray(outputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if outputs.shape != targets.shape:
        raise ShapeError(f"outputs {outputs.shape} and targets {targets.shape} differ")
    if outputs.size == 0:
        raise InvalidArgumentError("mse of an empty array")
    return float(np.mean((targets - outputs) ** 2))


@dataclass(frozen=True)
class LmOptions:
    max_epochs: int = 222
    goal_mse: float = 1e-3
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    lambda_max: float = 1e10
    max_validation_failures: int = 6

    def __post_init__(self):
        if self.max_epochs < 1 or self.max_validation_failures < 1:
            raise InvalidArgumentError("max_epochs and max_validation_failures must be >= 1")
        if not (self.lambda_init > 0 and self.lambda_max > 0 and self.goal_mse >= 0):
            raise InvalidArgumentError("lambda_init, lambda_max must be > 0 and goal_mse >= 0")
        if not (self.lambda_up > 1 > self.lambda_down > 0):
            raise InvalidArgumentError("need lambda_up > 1 > lambda_down > 0")


@dataclass(frozen=True)
class TrainRecord:
    epoch: int
    mse_train: float
    mse_validation: float  # None without a validation set
    lam: float


def train_lm(model, X, Y, X_val=None, Y_val=None, opts=None, output_scale=None):
    """Full-batch Levenberg-Marquardt.

    Each epoch solves ``(J'J + lam I) delta = J'e`` and tries
    ``theta - delta``; the step is accepted when the training MSE strictly
    drops (then ``lam *= lambda_down``), otherwise ``lam *= lambda_up`` and
    the solve is retried until ``lam`` passes ``lambda_max``.

    Stops at ``max_epochs``, when the training MSE reaches ``goal_mse``, when
    no step can be accepted, or after ``max_validation_failures`` consecutive
    rises of the validation MSE.  Returns the parameters with the lowest
    validation MSE (lowest training MSE without validation data) and one
    :class:`TrainRecord` per completed epoch.  ``output_scale`` multiplies
    the errors per output column, e.g. to report MSE in original units while
    fitting rescaled targets.
    """
    opts = opts or LmOptions()
    X, _ = _as_batch(model, X)
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    if X.shape[0] == 0:
        raise InvalidArgumentError("training set is empty")
    has_val = X_val is not None and len(X_val) > 0
    if has_val:
        X_val, _ = _as_batch(model, X_val)
        Y_val = np.asarray(Y_val, dtype=float).reshape(X_val.shape[0], -1)
    scale = np.ones(model.layer_sizes[-1]) if output_scale is None else np.asarray(output_scale, float)

    def loss(m, A, B):
        return float(np.mean(((B - forward(m, A)) * scale) ** 2))

    theta = model.get_flat_params()
    current = model
    train_mse = loss(current, X, Y)
    lam = opts.lambda_init
    history = []
    best_score, best_model = math.inf, current
    prev_val, failures = None, 0

    for epoch in range(1, opts.max_epochs + 1):
        J, e = jacobian(current, X, Y, scale)
        JtJ = J.T @ J
        Jte = J.T @ e
        accepted = False
        while lam <= opts.lambda_max:
            delta = solve_spd(JtJ, Jte, jitter=lam)
            trial = current.with_flat_params(theta - delta)
            trial_mse = loss(trial, X, Y)
            if math.isfinite(trial_mse) and trial_mse < train_mse:
                theta, current, train_mse = theta - delta, trial, trial_mse
                lam *= opts.lambda_down
                accepted = True
                break
            lam *= opts.lambda_up
        if not accepted:
            if not history:
                raise TrainingStalledError(
                    f"no Levenberg-Marquardt step accepted before lambda exceeded {opts.lambda_max:g}"
                )
            break

        val_mse = loss(current, X_val, Y_val) if has_val else None
        history.append(TrainRecord(epoch, train_mse, val_mse, lam))
        score = val_mse if has_val else train_mse
        if score <= best_score:
            best_score, best_model = score, current

        if train_mse <= opts.goal_mse:
            break
        if has_val:
            failures = failures + 1 if prev_val is not None and val_mse > prev_val else 0
            prev_val = val_mse
            if failures >= opts.max_validation_failures:
                break
    return best_model, history


def fold_affine(model, in_offset, in_scale, out_offset=None, out_scale=None):
    """Express a network trained on ``(x - in_offset) / in_scale`` (and
    producing ``(y - out_offset) / out_scale``) directly in raw units.

    Output folding needs a linear output layer.
    """
    in_offset = np.asarray(in_offset, float)
    in_scale = np.asarray(in_scale, float)
    weights = [W.copy() for W in model.weights]
    biases = [b.copy() for b in model.biases]
    biases[0] = biases[0] - weights[0] @ (in_offset / in_scale)
    weights[0] = weights[0] / in_scale[None, :]
    if out_scale is not None:
        if model.output_activation != "linear":
            raise InvalidArgumentError("output rescaling can only be folded into a linear output layer")
        out_scale = np.asarray(out_scale, float)
        weights[-1] = weights[-1] * out_scale[:, None]
        biases[-1] = biases[-1] * out_scale + np.asarray(out_offset, float)
    return replace(model, weights=weights, biases=biases)


def _fmt(x):
    return format(float(x), ".17g")


def save_model(model, path):
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        "layer_sizes " + " ".join(str(s) for s in model.layer_sizes),
        f"hidden_activation {model.hidden_activation}",
        f"output_activation {model.output_activation}",
    ]
    for l, (W, b) in enumerate(zip(model.weights, model.biases), start=1):
        lines.append(f"weights {l} {W.shape[0]} {W.shape[1]}")
        lines.extend(" ".join(_fmt(v) for v in row) for row in W)
        lines.append(f"biases {l} {b.size}")
        lines.append(" ".join(_fmt(v) for v in b))
    lines.extend(_metadata_lines(model))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _metadata_lines(model):
    lines = []
    if model.input_bounds is not None:
        lo, hi = np.asarray(model.input_bounds, float)
        lines.append("input_min " + " ".join(_fmt(v) for v in lo))
        lines.append("input_max " + " ".join(_fmt(v) for v in hi))
    if model.normalization is None:
        lines.append("normalization none")
    else:
        lines.append("normalization minmax")
        lines.extend(model.normalization.to_lines())
    return lines


class _LineReader:
    def __init__(self, path):
        with open(path) as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    @property
    def lineno(self):
        return self.pos + 1

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def next(self):
        if self.pos >= len(self.lines):
            raise ParseError("unexpected end of file", self.lineno)
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def keyed(self, key, n=None):
        lineno = self.lineno
        parts = self.next().split()
        if not parts or parts[0] != key or (n is not None and len(parts) != n + 1):
            raise ParseError(f"expected '{key}' line", lineno)
        return parts[1:]

    def floats(self, n):
        lineno = self.lineno
        parts = self.next().split()
        if len(parts) != n:
            raise ParseError(f"expected {n} numbers, got {len(parts)}", lineno)
        try:
            values = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite value", lineno)
        return np.array(values)


def read_metadata(reader):
    """Parse the optional input bounds and normalization block shared by model files."""
    from .dataset import NormalizationMap

    bounds = None
    if reader.peek() is not None and reader.peek().startswith("input_min"):
        lo = np.array([float(v) for v in reader.keyed("input_min")])
        hi = np.array([float(v) for v in reader.keyed("input_max")])
        bounds = np.vstack([lo, hi])
    kind = reader.keyed("normalization", 1)[0]
    normalization = None
    if kind == "minmax":
        first = reader.lineno
        normalization = NormalizationMap.from_lines([reader.next(), reader.next()], first)
    elif kind != "none":
        raise ParseError(f"unknown normalization kind {kind!r}", reader.lineno - 1)
    return bounds, normalization


def load_model(path):
    reader = _LineReader(path)
    header = reader.next().split()
    if header != [FORMAT_TAG, str(FORMAT_VERSION)]:
        raise ParseError(f"not a {FORMAT_TAG} v{FORMAT_VERSION} file", 1)
    raw_sizes = reader.keyed("layer_sizes")
    try:
        sizes = tuple(int(s) for s in raw_sizes)
    except ValueError:
        raise ParseError("layer sizes must be integers", 2) from None
    hidden = reader.keyed("hidden_activation", 1)[0]
    output = reader.keyed("output_activation", 1)[0]
    weights, biases = [], []
    for l in range(1, len(sizes)):
        _, rows, cols = reader.keyed("weights", 3)
        W = np.vstack([reader.floats(int(cols)) for _ in range(int(rows))])
        (size,) = reader.keyed("biases", 2)[1:]
        weights.append(W)
        biases.append(reader.floats(int(size)))
    bounds, normalization = read_metadata(reader)
    return MlpModel(sizes, hidden, output, weights, biases, normalization, bounds)


class LevenbergMarquardtMLP(RegressorMixin, BaseEstimator):
    """One-hidden-layer (by default) perceptron regressor fitted by LM.

    With ``rescale=True`` inputs, and targets when the output layer is
    linear, are min-max mapped to [0, 1] on the training data before
    fitting; the maps are folded back into the first and last layers
    afterwards so ``model_`` works in raw units.  Training MSE is always
    recorded in the units of ``y``.
    """

    def __init__(self, hidden_layer_sizes=(5,), activation="tansig", output_activation="linear",
                 max_epochs=222, goal_mse=1e-3, lambda_init=1e-3, lambda_up=10.0,
                 lambda_down=0.1, lambda_max=1e10, max_validation_failures=6,
                 rescale=True, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.output_activation = output_activation
        self.max_epochs = max_epochs
        self.goal_mse = goal_mse
        self.lambda_init = lambda_init
        self.lambda_up = lambda_up
        self.lambda_down = lambda_down
        self.lambda_max = lambda_max
        self.max_validation_failures = max_validation_failures
        self.rescale = rescale
        self.random_state = random_state

    def _options(self):
        return LmOptions(self.max_epochs, self.goal_mse, self.lambda_init, self.lambda_up,
                         self.lambda_down, self.lambda_max, self.max_validation_failures)

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=float, multi_output=True)
        y2 = y.reshape(len(y), -1)
        sizes = (X.shape[1], *self.hidden_layer_sizes, y2.shape[1])
        model = init_model(sizes, self.activation, self.random_state, self.output_activation)
        opts = self._options()

        x_lo, x_span = np.zeros(X.shape[1]), np.ones(X.shape[1])
        y_lo, y_span = np.zeros(y2.shape[1]), np.ones(y2.shape[1])
        if self.rescale:
            x_lo, x_span = X.min(axis=0), _span(X)
            if self.output_activation == "linear":
                y_lo, y_span = y2.min(axis=0), _span(y2)
        Xs, ys = (X - x_lo) / x_span, (y2 - y_lo) / y_span
        Xv = yv = None
        if X_val is not None:
            X_val, y_val = check_X_y(X_val, y_val, dtype=float, multi_output=True)
            Xv = (X_val - x_lo) / x_span
            yv = (y_val.reshape(len(y_val), -1) - y_lo) / y_span

        fitted, self.history_ = train_lm(model, Xs, ys, Xv, yv, opts, output_scale=y_span)
        out = (y_lo, y_span) if self.output_activation == "linear" else (None, None)
        fitted = fold_affine(fitted, x_lo, x_span, *out)
        fitted.input_bounds = np.vstack([X.min(axis=0), X.max(axis=0)])
        self.model_ = fitted
        self.n_features_in_ = X.shape[1]
        self._single_output = y.ndim == 1
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        y = forward(self.model_, X)
        return y[:, 0] if self._single_output else y


def _span(A):
    span = A.max(axis=0) - A.min(axis=0)
    return np.where(span > 0, span, 1.0)
