"""Error metrics, histograms, training-curve exports and the four-way comparison report."""
import json
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import InvalidArgumentError, ShapeError


@dataclass(frozen=True)
class EvalResult:
    mse: float
    per_output_mse: tuple
    max_abs_error: float
    n: int

    def to_dict(self):
        d = asdict(self)
        d["per_output_mse"] = list(self.per_output_mse)
        return d


@dataclass(frozen=True, eq=False)
class ErrorHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int


def _predict(model, X):
    if not hasattr(model, "predict"):
        raise InvalidArgumentError(f"{type(model).__name__} has no predict method")
    return np.asarray(model.predict(X), dtype=float).reshape(X.shape[0], -1)


def prediction_errors(model, ds, normalization=None):
    """``target - output`` per row and output; in real units when a
    normalization map is given for a model that works in normalized space."""
    outputs = _predict(model, ds.inputs)
    targets = ds.targets
    if outputs.shape != targets.shape:
        raise ShapeError(f"model produced {outputs.shape}, targets are {targets.shape}")
    if normalization is not None:
        outputs = normalization.denormalize_targets(outputs)
        targets = normalization.denormalize_targets(targets)
    return targets - outputs


def evaluate(model, ds, normalization=None):
    errors = prediction_errors(model, ds, normalization)
    per_output = np.mean(errors**2, axis=0)
    return EvalResult(
        mse=float(np.mean(per_output)),
        per_output_mse=tuple(float(v) for v in per_output),
        max_abs_error=float(np.max(np.abs(errors))),
        n=int(ds.n),
    )


def histogram(errors, num_bins=20):
    """Equal-width bins from min to max error; the maximum lands in the last bin."""
    errors = np.asarray(errors, dtype=float).ravel()
    if errors.size == 0:
        raise InvalidArgumentError("no errors to bin")
    if num_bins < 1:
        raise InvalidArgumentError("num_bins must be >= 1")
    lo, hi = float(errors.min()), float(errors.max())
    if hi == lo:
        half = 0.5 * abs(lo) if lo else 0.5
        lo, hi = lo - half, hi + half
    counts, edges = np.histogram(errors, bins=num_bins, range=(lo, hi))
    return ErrorHistogram(edges, counts, int(errors.size))


def fraction_below(errors, threshold):
    errors = np.asarray(errors, dtype=float).ravel()
    return float(np.mean(np.abs(errors) < threshold))


def export_histogram(hist, path):
    with open(path, "w") as fh:
        fh.write("bin_low,bin_high,count\n")
        for lo, hi, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
            fh.write(f"{lo:.17g},{hi:.17g},{int(count)}\n")


def export_training_curve(history, path):
    """One CSV row per record: ``epoch,mse_train[,mse_validation]``.

    For RBF histories the epoch column is the neuron count.
    """
    if not history:
        raise InvalidArgumentError("empty training history")
    with_validation = getattr(history[0], "mse_validation", None) is not None
    with open(path, "w") as fh:
        fh.write("epoch,mse_train" + (",mse_validation" if with_validation else "") + "\n")
        for rec in history:
            step = getattr(rec, "epoch", None)
            if step is None:
                step = rec.neurons
            row = f"{step},{rec.mse_train:.17g}"
            if with_validation:
                row += f",{rec.mse_validation:.17g}"
            fh.write(row + "\n")


@dataclass(frozen=True)
class ReportRow:
    model: str
    space: str
    result: EvalResult


def compare_report(rows, goal_mse, path=None):
    """Plain-text table with a PASS/FAIL verdict (``mse <= goal_mse``) per row.

    Returns ``(text, all_passed)`` and writes the text to ``path`` if given.
    """
    if not rows:
        raise InvalidArgumentError("nothing to report")
    lines = [
        f"goal error (MSE) = {goal_mse:g}",
        f"{'model':8s}{'space':12s}{'n':>7s}{'mse':>14s}{'max|err|':>14s}  verdict",
    ]
    all_passed = True
    for row in rows:
        passed = row.result.mse <= goal_mse
        all_passed &= passed
        lines.append(
            f"{row.model:8s}{row.space:12s}{row.result.n:7d}{row.result.mse:14.4e}"
            f"{row.result.max_abs_error:14.4e}  {'PASS' if passed else 'FAIL'}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text, all_passed


def write_eval_json(results, path):
    """``results`` maps a label to a dict of split name -> EvalResult."""
    payload = {label: {k: r.to_dict() for k, r in splits.items()} for label, splits in results.items()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
