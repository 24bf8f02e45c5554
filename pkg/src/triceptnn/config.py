"""Run configuration: an INI file whose defaults give the reference setup.

Example::

    [geometry]
    a = 0.40379
    b = 345.41928
    d = 0.25837

    [sampling]
    scheme = grid
    n = 4818
    seed = 0

Every key is optional; unknown sections or keys are rejected so typos do
not silently fall back to defaults.
"""
import configparser
import math
from dataclasses import dataclass, field, replace

from .exceptions import ConfigError, TriceptError
from .kinematics import DEFAULT_GEOMETRY, PoseDomain, TriceptGeometry
from .mlp import HIDDEN_ACTIVATIONS, OUTPUT_ACTIVATIONS, LmOptions


@dataclass(frozen=True)
class SamplingConfig:
    scheme: str = "grid"
    n: int = 4818
    seed: int = 0


@dataclass(frozen=True)
class SplitConfig:
    train: float = 0.70
    validation: float = 0.15
    test: float = 0.15
    seed: int = 0

    @property
    def ratios(self):
        return (self.train, self.validation, self.test)


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple = (5,)
    activation: str = "tansig"
    output_activation: str = "linear"
    rescale: bool = True
    seed: int = 0
    # Reference runs use the whole epoch budget, so training does not
    # stop at the report's goal error.
    lm: LmOptions = field(default_factory=lambda: LmOptions(goal_mse=0.0))


@dataclass(frozen=True)
class RbfConfig:
    max_neurons: int = 20
    spread_normalized: float = 2.0
    spread_real: float = 200.0
    goal_mse: float = 0.0
    fit_bias: bool = True


@dataclass(frozen=True)
class RunConfig:
    geometry: TriceptGeometry = DEFAULT_GEOMETRY
    domain: PoseDomain = field(default_factory=PoseDomain)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    rbf: RbfConfig = field(default_factory=RbfConfig)
    goal_error: float = 1e-3
    histogram_bins: int = 20
    output_dir: str = "run"

    def with_seed(self, seed):
        return replace(
            self,
            sampling=replace(self.sampling, seed=seed),
            split=replace(self.split, seed=seed),
            mlp=replace(self.mlp, seed=seed),
        )


_KEYS = {
    "geometry": {"a", "b", "d"},
    "domain": {"theta_min", "theta_max", "psi_min", "psi_max", "c_min", "c_max"},
    "sampling": {"scheme", "n", "seed"},
    "split": {"train", "validation", "test", "seed"},
    "mlp": {"hidden", "activation", "output_activation", "rescale", "seed", "max_epochs",
            "goal_mse", "lambda_init", "lambda_up", "lambda_down", "lambda_max",
            "max_validation_failures"},
    "rbf": {"max_neurons", "spread_normalized", "spread_real", "goal_mse", "fit_bias"},
    "report": {"goal_error", "histogram_bins"},
    "output": {"directory"},
}


class _Section:
    def __init__(self, parser, name):
        self.name = name
        self.items = dict(parser.items(name)) if parser.has_section(name) else {}

    def _raw(self, key):
        return self.items.get(key)

    def _fail(self, key, message):
        raise ConfigError(message, field=f"{self.name}.{key}")

    def float(self, key, default, positive=False, nonneg=False):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            self._fail(key, f"expected a number, got {raw!r}")
        if not math.isfinite(value):
            self._fail(key, "must be finite")
        if positive and value <= 0:
            self._fail(key, "must be > 0")
        if nonneg and value < 0:
            self._fail(key, "must be >= 0")
        return value

    def int(self, key, default, minimum=None):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            self._fail(key, f"expected an integer, got {raw!r}")
        if minimum is not None and value < minimum:
            self._fail(key, f"must be >= {minimum}")
        return value

    def choice(self, key, default, options):
        raw = self._raw(key)
        if raw is None:
            return default
        if raw not in options:
            self._fail(key, f"must be one of {', '.join(options)}")
        return raw

    def bool(self, key, default):
        raw = self._raw(key)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        self._fail(key, f"expected a boolean, got {raw!r}")

    def int_list(self, key, default):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            values = tuple(int(v) for v in raw.replace(",", " ").split())
        except ValueError:
            self._fail(key, f"expected integers, got {raw!r}")
        if not values or min(values) < 1:
            self._fail(key, "needs at least one positive layer size")
        return values


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError("unknown section", field=section)
        for key in parser.options(section):
            if key not in _KEYS[section]:
                raise ConfigError("unknown key", field=f"{section}.{key}")

    base = RunConfig()
    g = _Section(parser, "geometry")
    try:
        geometry = TriceptGeometry(
            g.float("a", base.geometry.a, nonneg=True),
            g.float("b", base.geometry.b, nonneg=True),
            g.float("d", base.geometry.d, nonneg=True),
        )
    except ConfigError:
        raise
    except TriceptError as exc:
        raise ConfigError(str(exc), field="geometry") from None

    dm = _Section(parser, "domain")
    bounds = {}
    for axis, (lo, hi) in zip(("theta", "psi", "c"), base.domain.bounds):
        bounds[axis] = (dm.float(f"{axis}_min", lo), dm.float(f"{axis}_max", hi))
        if bounds[axis][0] > bounds[axis][1]:
            raise ConfigError("min exceeds max", field=f"domain.{axis}_min")
    if bounds["c"][0] <= 0:
        raise ConfigError("passive extension must stay > 0", field="domain.c_min")
    domain = PoseDomain(bounds["theta"], bounds["psi"], bounds["c"])

    s = _Section(parser, "sampling")
    sampling = SamplingConfig(
        s.choice("scheme", base.sampling.scheme, ("grid", "random")),
        s.int("n", base.sampling.n, minimum=1),
        s.int("seed", base.sampling.seed),
    )

    sp = _Section(parser, "split")
    split = SplitConfig(
        sp.float("train", base.split.train, nonneg=True),
        sp.float("validation", base.split.validation, nonneg=True),
        sp.float("test", base.split.test, nonneg=True),
        sp.int("seed", base.split.seed),
    )
    if abs(sum(split.ratios) - 1.0) > 1e-9:
        raise ConfigError("train + validation + test must equal 1", field="split.train")
    if split.train <= 0:
        raise ConfigError("must be > 0", field="split.train")

    m = _Section(parser, "mlp")
    lm = base.mlp.lm
    lambda_up = m.float("lambda_up", lm.lambda_up, positive=True)
    lambda_down = m.float("lambda_down", lm.lambda_down, positive=True)
    if lambda_up <= 1:
        raise ConfigError("must be > 1", field="mlp.lambda_up")
    if lambda_down >= 1:
        raise ConfigError("must be < 1", field="mlp.lambda_down")
    lm = LmOptions(
        m.int("max_epochs", lm.max_epochs, minimum=1),
        m.float("goal_mse", lm.goal_mse, nonneg=True),
        m.float("lambda_init", lm.lambda_init, positive=True),
        lambda_up,
        lambda_down,
        m.float("lambda_max", lm.lambda_max, positive=True),
        m.int("max_validation_failures", lm.max_validation_failures, minimum=1),
    )
    mlp = MlpConfig(
        m.int_list("hidden", base.mlp.hidden),
        m.choice("activation", base.mlp.activation, HIDDEN_ACTIVATIONS),
        m.choice("output_activation", base.mlp.output_activation, OUTPUT_ACTIVATIONS),
        m.bool("rescale", base.mlp.rescale),
        m.int("seed", base.mlp.seed),
        lm,
    )

    r = _Section(parser, "rbf")
    rbf = RbfConfig(
        r.int("max_neurons", base.rbf.max_neurons, minimum=1),
        r.float("spread_normalized", base.rbf.spread_normalized, positive=True),
        r.float("spread_real", base.rbf.spread_real, positive=True),
        r.float("goal_mse", base.rbf.goal_mse, nonneg=True),
        r.bool("fit_bias", base.rbf.fit_bias),
    )

    rep = _Section(parser, "report")
    out = _Section(parser, "output")
    directory = out.items.get("directory", base.output_dir).strip()
    if not directory:
        raise ConfigError("must not be empty", field="output.directory")
    return RunConfig(
        geometry, domain, sampling, split, mlp, rbf,
        rep.float("goal_error", base.goal_error, positive=True),
        rep.int("histogram_bins", base.histogram_bins, minimum=1),
        directory,
    )


def load_config(path):
    """Read and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
