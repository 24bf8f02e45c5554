"""Command-line pipeline: dataset generation, training, evaluation and prediction.

Exit codes: 0 ok, 1 goal error missed, 2 configuration/usage, 3 numerical or
training failure, 4 file I/O.
"""
import argparse
import os
import sys

import numpy as np

from . import dataset as dsm
from . import evaluation, kinematics, mlp, rbf
from .config import load_config
from .exceptions import ConfigError, ParseError, TriceptError

EXIT_OK, EXIT_GOAL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

DATASET_FILE = "dataset.csv"
NORMALIZED_FILE = "dataset_normalized.csv"
MAP_FILE = "normalization.txt"
STATS_FILE = "stats.txt"
REPORT_FILE = "report.txt"
EVAL_FILE = "eval.json"
SPACES = ("normalized", "real")


class IOFailure(Exception):
    pass


def _err(message):
    print(f"triceptnn: {message}", file=sys.stderr)


def model_path(outdir, kind, space):
    return os.path.join(outdir, f"{kind}_{space}.model")


def curve_path(outdir, kind, space):
    return os.path.join(outdir, f"{kind}_{space}_curve.csv")


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {path}: {exc.strerror}") from None


def cmd_gen_data(cfg):
    outdir = cfg.output_dir
    ds = dsm.generate(cfg.geometry, cfg.domain, cfg.sampling.scheme, cfg.sampling.n, cfg.sampling.seed)
    normalized, mapping = dsm.normalize(ds)
    _ensure_dir(outdir)
    try:
        dsm.save_csv(ds, os.path.join(outdir, DATASET_FILE))
        dsm.save_csv(normalized, os.path.join(outdir, NORMALIZED_FILE))
        dsm.save_map(mapping, os.path.join(outdir, MAP_FILE))
        with open(os.path.join(outdir, STATS_FILE), "w") as fh:
            fh.write(dsm.format_stats(dsm.stats(ds), "real data"))
            fh.write("\n")
            fh.write(dsm.format_stats(dsm.stats(normalized), "normalized data"))
    except OSError as exc:
        raise IOFailure(f"cannot write to {outdir}: {exc.strerror}") from None
    print(f"wrote {ds.n} samples to {outdir}")
    return EXIT_OK


def _load_space(outdir, space):
    """Dataset of the requested space plus the map when it is normalized."""
    path = os.path.join(outdir, NORMALIZED_FILE if space == "normalized" else DATASET_FILE)
    try:
        ds = dsm.load_csv(path)
        mapping = dsm.load_map(os.path.join(outdir, MAP_FILE)) if space == "normalized" else None
    except FileNotFoundError as exc:
        raise IOFailure(f"missing file {exc.filename}; run gen-data first") from None
    except OSError as exc:
        raise IOFailure(f"cannot read {exc.filename}: {exc.strerror}") from None
    return ds, mapping


def cmd_train(cfg, kind, space, max_epochs=None):
    outdir = cfg.output_dir
    ds, mapping = _load_space(outdir, space)
    parts = dsm.split(ds, cfg.split.ratios, cfg.split.seed)
    train, val = ds.subset(parts.train), ds.subset(parts.validation)

    if kind == "mlp":
        lm = cfg.mlp.lm
        est = mlp.LevenbergMarquardtMLP(
            hidden_layer_sizes=cfg.mlp.hidden,
            activation=cfg.mlp.activation,
            output_activation=cfg.mlp.output_activation,
            max_epochs=max_epochs or lm.max_epochs,
            goal_mse=lm.goal_mse,
            lambda_init=lm.lambda_init,
            lambda_up=lm.lambda_up,
            lambda_down=lm.lambda_down,
            lambda_max=lm.lambda_max,
            max_validation_failures=lm.max_validation_failures,
            rescale=cfg.mlp.rescale,
            random_state=cfg.mlp.seed,
        )
        if val.n:
            est.fit(train.inputs, train.targets, val.inputs, val.targets)
        else:
            est.fit(train.inputs, train.targets)
        save = mlp.save_model
    else:
        spread = cfg.rbf.spread_normalized if space == "normalized" else cfg.rbf.spread_real
        est = rbf.IncrementalRBF(spread, cfg.rbf.max_neurons, cfg.rbf.goal_mse, cfg.rbf.fit_bias)
        est.fit(train.inputs, train.targets)
        save = rbf.save_model

    model = est.model_
    model.normalization = mapping
    try:
        save(model, model_path(outdir, kind, space))
        evaluation.export_training_curve(est.history_, curve_path(outdir, kind, space))
    except OSError as exc:
        raise IOFailure(f"cannot write model files in {outdir}: {exc.strerror}") from None
    final = evaluation.evaluate(model, train)
    print(f"{kind} {space}: {len(est.history_)} steps, final training MSE {final.mse:.6e}")
    return EXIT_OK


def load_any_model(path):
    try:
        with open(path) as fh:
            tag = fh.readline().split()[:1]
    except FileNotFoundError:
        raise IOFailure(f"missing model file {path}") from None
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror}") from None
    if tag == [mlp.FORMAT_TAG]:
        return "mlp", mlp.load_model(path)
    if tag == [rbf.FORMAT_TAG]:
        return "rbf", rbf.load_model(path)
    raise ParseError(f"{path}: unknown model format", 1)


def cmd_eval(cfg, paths=None):
    outdir = cfg.output_dir
    if not paths:
        paths = [model_path(outdir, k, s) for k in ("mlp", "rbf") for s in SPACES]
    loaded = [(path, *load_any_model(path)) for path in paths]

    rows, results = [], {}
    datasets = {}
    for path, kind, model in loaded:
        space = "normalized" if model.normalization is not None else "real"
        if space not in datasets:
            datasets[space] = _load_space(outdir, space)
        ds, _ = datasets[space]
        parts = dsm.split(ds, cfg.split.ratios, cfg.split.seed)
        label = os.path.splitext(os.path.basename(path))[0]
        splits = {"all": evaluation.evaluate(model, ds)}
        for name in ("train", "validation", "test"):
            idx = getattr(parts, name)
            if idx.size:
                splits[name] = evaluation.evaluate(model, ds.subset(idx))
        if model.normalization is not None:
            splits["all_real_units"] = evaluation.evaluate(model, ds, model.normalization)
        results[label] = splits
        rows.append(evaluation.ReportRow(kind.upper(), space, splits["all"]))
        errors = evaluation.prediction_errors(model, ds)
        hist = evaluation.histogram(errors, cfg.histogram_bins)
        try:
            evaluation.export_histogram(hist, os.path.join(outdir, f"histogram_{label}.csv"))
        except OSError as exc:
            raise IOFailure(f"cannot write histogram: {exc.strerror}") from None

    try:
        evaluation.write_eval_json(results, os.path.join(outdir, EVAL_FILE))
        text, passed = evaluation.compare_report(rows, cfg.goal_error, os.path.join(outdir, REPORT_FILE))
    except OSError as exc:
        raise IOFailure(f"cannot write report: {exc.strerror}") from None
    sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_GOAL


def cmd_predict(cfg, path, theta, psi, c, analytic=False):
    _, model = load_any_model(path)
    x = np.array([theta, psi, c])
    mapping = model.normalization
    if mapping is not None:
        lo, hi = mapping.mins[:3], mapping.maxs[:3]
    elif model.input_bounds is not None:
        lo, hi = model.input_bounds
    else:
        lo, hi = cfg.domain.bounds.T
    if np.any(x < lo) or np.any(x > hi):
        _err(f"warning: pose ({theta}, {psi}, {c}) lies outside the training domain")
    q = model.predict(mapping.normalize_inputs(x) if mapping is not None else x)
    if mapping is not None:
        q = mapping.denormalize_targets(q)
    print(" ".join(f"{v:.10g}" for v in q))
    if analytic:
        exact = kinematics.inverse_kinematics(cfg.geometry, kinematics.Pose(theta, psi, c)).as_array()
        print(f"{'leg':4s}{'surrogate':>18s}{'analytic':>18s}{'deviation':>14s}")
        for i, (s, a) in enumerate(zip(q, exact), start=1):
            print(f"q{i:<3d}{s:18.10g}{a:18.10g}{s - a:14.4e}")
    return EXIT_OK


def cmd_report(cfg):
    cmd_gen_data(cfg)
    for kind in ("mlp", "rbf"):
        for space in SPACES:
            cmd_train(cfg, kind, space)
    return cmd_eval(cfg)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults give the reference setup)")
    common.add_argument("--seed", type=int, help="override every seed in the configuration")
    common.add_argument("--out", help="override the output directory")

    parser = argparse.ArgumentParser(
        prog="triceptnn", description="Tricept inverse-kinematics surrogates", parents=[common]
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="generate the dataset, statistics and normalization map")
    for kind in ("mlp", "rbf"):
        p = sub.add_parser(f"train-{kind}", parents=[common], help=f"train the {kind.upper()} surrogate")
        p.add_argument("--space", choices=SPACES, default="normalized")
        if kind == "mlp":
            p.add_argument("--max-epochs", type=int, help="override the epoch budget")
    p = sub.add_parser("eval", parents=[common], help="evaluate trained models and write the report")
    p.add_argument("--models", nargs="+", help="model files (default: the four standard models)")
    p = sub.add_parser("predict", parents=[common], help="predict leg lengths for one pose")
    p.add_argument("--model", required=True)
    p.add_argument("--analytic", action="store_true", help="also print the exact IK and deviations")
    p.add_argument("theta", type=float)
    p.add_argument("psi", type=float)
    p.add_argument("c", type=float)
    sub.add_parser("report", parents=[common], help="run the whole pipeline and write the comparison report")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.out:
            from dataclasses import replace

            cfg = replace(cfg, output_dir=args.out)
        if getattr(args, "max_epochs", None) is not None and args.max_epochs < 1:
            raise ConfigError("must be >= 1", field="--max-epochs")
    except ConfigError as exc:
        _err(f"configuration error: {exc}")
        return EXIT_CONFIG

    try:
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command in ("train-mlp", "train-rbf"):
            kind = args.command.split("-")[1]
            return cmd_train(cfg, kind, args.space, getattr(args, "max_epochs", None))
        if args.command == "eval":
            return cmd_eval(cfg, args.models)
        if args.command == "predict":
            return cmd_predict(cfg, args.model, args.theta, args.psi, args.c, args.analytic)
        return cmd_report(cfg)
    except IOFailure as exc:
        _err(str(exc))
        return EXIT_IO
    except ParseError as exc:
        _err(f"malformed file: {exc}")
        return EXIT_IO
    except TriceptError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
