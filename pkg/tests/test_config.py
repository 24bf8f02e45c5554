import pytest

from triceptnn.config import RunConfig, load_config, parse_config
from triceptnn.exceptions import ConfigError
from triceptnn.kinematics import DEFAULT_GEOMETRY


def test_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.geometry == DEFAULT_GEOMETRY
    assert cfg.sampling.n == 4818 and cfg.split.ratios == (0.70, 0.15, 0.15)
    assert cfg.mlp.hidden == (5,) and cfg.mlp.lm.max_epochs == 222
    assert (cfg.rbf.max_neurons, cfg.rbf.spread_normalized, cfg.rbf.spread_real) == (20, 2.0, 200.0)
    assert cfg.goal_error == 1e-3
    assert load_config(None) == RunConfig()


def test_full_file(tmp_path):
    text = """
[geometry]
a = 500
b = 760
d = 30
[domain]
c_min = 400
[sampling]
scheme = random
n = 100
seed = 9
[split]
train = 0.8
validation = 0.1
test = 0.1
[mlp]
hidden = 7
activation = logsig
max_epochs = 10
lambda_up = 5
[rbf]
max_neurons = 5
fit_bias = no
[report]
goal_error = 0.01
[output]
directory = out
"""
    path = tmp_path / "run.ini"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.geometry.a == 500 and cfg.domain.c_range == (400.0, 634.0)
    assert cfg.sampling.scheme == "random" and cfg.sampling.seed == 9
    assert cfg.mlp.hidden == (7,) and cfg.mlp.activation == "logsig" and cfg.mlp.lm.lambda_up == 5
    assert cfg.rbf.fit_bias is False and cfg.goal_error == 0.01 and cfg.output_dir == "out"


def test_with_seed():
    cfg = RunConfig().with_seed(42)
    assert cfg.sampling.seed == cfg.split.seed == cfg.mlp.seed == 42


@pytest.mark.parametrize(
    "text, field",
    [
        ("[geometry]\na = -1\n", "geometry.a"),
        ("[geometry]\na = 0\nb = 0\n", "geometry"),
        ("[geometry]\nwidth = 3\n", "geometry.width"),
        ("[extras]\nx = 1\n", "extras"),
        ("[domain]\ntheta_min = 1\ntheta_max = 0\n", "domain.theta_min"),
        ("[domain]\nc_min = 0\n", "domain.c_min"),
        ("[sampling]\nn = 0\n", "sampling.n"),
        ("[sampling]\nscheme = sobol\n", "sampling.scheme"),
        ("[split]\ntrain = 0.9\n", "split.train"),
        ("[mlp]\nlambda_up = 0.5\n", "mlp.lambda_up"),
        ("[mlp]\nlambda_down = 2\n", "mlp.lambda_down"),
        ("[mlp]\nhidden = 0\n", "mlp.hidden"),
        ("[mlp]\nrescale = maybe\n", "mlp.rescale"),
        ("[mlp]\nmax_epochs = ten\n", "mlp.max_epochs"),
        ("[rbf]\nspread_normalized = 0\n", "rbf.spread_normalized"),
        ("[report]\ngoal_error = nan\n", "report.goal_error"),
        ("[output]\ndirectory =\n", "output.directory"),
    ],
)
def test_field_level_errors(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_unreadable_and_malformed():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")
    with pytest.raises(ConfigError):
        parse_config("no section header")
