import math

import numpy as np
import pytest

from triceptnn import mlp
from triceptnn.exceptions import InvalidArgumentError, ParseError, ShapeError, TrainingStalledError
from triceptnn.numerics import finite_difference_jacobian


def naive_forward(model, x):
    act = {"tansig": math.tanh, "logsig": lambda v: 1 / (1 + math.exp(-v)), "linear": lambda v: v}
    h = list(x)
    for W, b, name in zip(model.weights, model.biases, model.activations()):
        nxt = []
        for i in range(W.shape[0]):
            s = b[i]
            for j in range(W.shape[1]):
                s += W[i, j] * h[j]
            nxt.append(act[name](s))
        h = nxt
    return np.array(h)


def random_model(rng, sizes=(3, 5, 3), activation="tansig", output="linear"):
    model = mlp.init_model(sizes, activation, int(rng.integers(1 << 30)), output)
    return model.with_flat_params(rng.normal(scale=0.8, size=model.n_params))


def test_tansig_values():
    assert mlp.tansig(0.0) == 0.0
    assert mlp.tansig(0.5) == pytest.approx(0.46211715726, abs=1e-11)
    assert mlp.tansig(40.0) == 1.0 and mlp.tansig(-40.0) == -1.0


def test_logsig_values():
    assert mlp.logsig(0.0) == 0.5
    assert mlp.logsig(2.0) == pytest.approx(0.88079707797, abs=1e-11)
    v = np.linspace(-30, 30, 61)
    np.testing.assert_allclose(mlp.logsig(v) + mlp.logsig(-v), 1.0, atol=1e-15)
    assert mlp.logsig(-800.0) == 0.0 and mlp.logsig(800.0) == 1.0


def test_init_model_contract():
    a, b = mlp.init_model(seed=3), mlp.init_model(seed=3)
    assert np.array_equal(a.get_flat_params(), b.get_flat_params())
    assert not np.array_equal(a.get_flat_params(), mlp.init_model(seed=4).get_flat_params())
    assert [W.shape for W in a.weights] == [(5, 3), (3, 5)]
    assert [len(v) for v in a.biases] == [5, 3]
    assert np.all(np.abs(a.get_flat_params()) <= 0.5)
    assert not np.any(a.biases[0]) and not np.any(a.biases[1])
    with pytest.raises(InvalidArgumentError):
        mlp.init_model((3,))
    with pytest.raises(InvalidArgumentError):
        mlp.init_model((3, 0, 3))


def test_forward_zero_model_and_passthrough():
    zero = mlp.init_model().with_flat_params(np.zeros(38))
    np.testing.assert_array_equal(mlp.forward(zero, [1.0, -2.0, 3.0]), np.zeros(3))
    W1 = np.zeros((5, 3))
    W1[0, 1] = 1.0
    W2 = np.zeros((3, 5))
    W2[2, 0] = 1.0
    m = mlp.MlpModel((3, 5, 3), "tansig", "linear", [W1, W2], [np.zeros(5), np.zeros(3)])
    assert mlp.forward(m, [0.0, 0.7, 0.0])[2] == pytest.approx(math.tanh(0.7), rel=1e-15)


def test_forward_matches_naive_loops():
    rng = np.random.default_rng(30)
    for activation in ("tansig", "logsig"):
        for output in ("linear", "logsig"):
            model = random_model(rng, (3, 5, 3), activation, output)
            X = rng.normal(size=(10, 3))
            batch = mlp.forward(model, X)
            for x, y in zip(X, batch):
                np.testing.assert_allclose(y, naive_forward(model, x), atol=1e-12)


def test_forward_shape_error():
    with pytest.raises(ShapeError):
        mlp.forward(mlp.init_model(), np.ones(4))


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(50):
        sizes = (3, int(rng.integers(1, 7)), 3)
        model = random_model(rng, sizes, rng.choice(["tansig", "logsig"]))
        X, Y = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
        J, _ = mlp.jacobian(model, X, Y)

        def errors(theta):
            return (Y - mlp.forward(model.with_flat_params(theta), X)).ravel()

        fd = finite_difference_jacobian(errors, model.get_flat_params(), h=1e-6)
        worst = max(worst, np.linalg.norm(J - fd) / np.linalg.norm(fd))
    assert worst <= 1e-5


def test_jacobian_terminal_layer_is_hidden_activations():
    model = random_model(np.random.default_rng(32))
    X = np.random.default_rng(33).normal(scale=1e-3, size=(4, 3))
    J, e = mlp.jacobian(model, X, np.zeros((4, 3)))
    hidden = np.tanh(X @ model.weights[0].T + model.biases[0])
    start = model.weights[0].size + model.biases[0].size
    # Output 0 of sample n depends on W2[0, :] with derivative -h_n.
    for n in range(4):
        np.testing.assert_allclose(J[3 * n, start:start + 5], -hidden[n], atol=1e-15)
    np.testing.assert_allclose(e, -mlp.forward(model, X).ravel())


def test_jacobian_duplicated_rows():
    model = random_model(np.random.default_rng(34))
    x = np.random.default_rng(35).normal(size=(1, 3))
    J, _ = mlp.jacobian(model, np.vstack([x, x]), np.zeros((2, 3)))
    np.testing.assert_array_equal(J[:3], J[3:])


def test_mse_contract():
    a = np.random.default_rng(36).normal(size=(7, 3))
    assert mlp.mse(a, a) == 0.0
    assert mlp.mse(a + 0.1, a) == pytest.approx(0.01, rel=1e-12)
    b = np.random.default_rng(37).normal(size=(7, 3))
    total = 0.0
    for i in range(7):
        for k in range(3):
            total += (a[i, k] - b[i, k]) ** 2
    assert mlp.mse(a, b) == pytest.approx(total / 21, rel=1e-14)
    with pytest.raises(ShapeError):
        mlp.mse(a, b[:3])


def test_lm_fits_linear_target_to_closed_form():
    rng = np.random.default_rng(38)
    X = rng.uniform(-0.01, 0.01, size=(60, 3))
    M = rng.normal(size=(3, 3))
    Y = X @ M + np.array([0.1, -0.2, 0.3])
    # Closed-form linear least squares reaches zero residual on this target.
    A = np.hstack([X, np.ones((60, 1))])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    assert np.mean((A @ coef - Y) ** 2) < 1e-28
    model = mlp.init_model((3, 5, 3), seed=1)
    fitted, history = mlp.train_lm(model, X, Y, opts=mlp.LmOptions(max_epochs=30, goal_mse=1e-10))
    assert history[-1].mse_train < 1e-10
    assert len(history) <= 30
    np.testing.assert_allclose(mlp.forward(fitted, X), A @ coef, atol=3e-5)


def test_lm_large_goal_stops_after_one_epoch():
    rng = np.random.default_rng(39)
    X, Y = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
    _, history = mlp.train_lm(mlp.init_model(seed=0), X, Y, opts=mlp.LmOptions(goal_mse=1e300))
    assert len(history) == 1 and history[0].epoch == 1


def test_lm_history_monotone_and_deterministic():
    rng = np.random.default_rng(40)
    X = rng.uniform(0, 1, size=(200, 3))
    Y = np.column_stack([np.sin(X[:, 0]), X[:, 1] * X[:, 2], np.exp(-X[:, 2])])
    opts = mlp.LmOptions(max_epochs=40, goal_mse=0.0)
    a, ha = mlp.train_lm(mlp.init_model(seed=5), X, Y, X[:50], Y[:50], opts)
    b, hb = mlp.train_lm(mlp.init_model(seed=5), X, Y, X[:50], Y[:50], opts)
    assert np.array_equal(a.get_flat_params(), b.get_flat_params()) and ha == hb
    train = [r.mse_train for r in ha]
    assert all(later < earlier for earlier, later in zip(train, train[1:]))
    assert all(r.mse_validation >= 0 and math.isfinite(r.mse_validation) for r in ha)


def test_lm_validation_early_stop_returns_best_snapshot():
    rng = np.random.default_rng(41)
    X, Y = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    Xv, Yv = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    opts = mlp.LmOptions(max_epochs=200, goal_mse=0.0, max_validation_failures=2)
    best, history = mlp.train_lm(mlp.init_model((3, 8, 3), seed=2), X, Y, Xv, Yv, opts)
    assert len(history) < 200
    val = [r.mse_validation for r in history]
    assert val[-1] > val[-2] > val[-3]
    got = mlp.mse(mlp.forward(best, Xv), Yv)
    assert got == pytest.approx(min(val), rel=1e-12)


def test_lm_stalls_when_no_step_is_possible():
    # Targets reproduced exactly: no step can lower a zero loss.
    model = mlp.init_model(seed=0)
    X = np.random.default_rng(45).normal(size=(5, 3))
    with pytest.raises(TrainingStalledError):
        mlp.train_lm(model, X, mlp.forward(model, X), opts=mlp.LmOptions(goal_mse=0.0, lambda_max=1e-2))


def test_lm_options_validation():
    with pytest.raises(InvalidArgumentError):
        mlp.LmOptions(lambda_up=0.5)
    with pytest.raises(InvalidArgumentError):
        mlp.LmOptions(max_epochs=0)


def test_fold_affine_preserves_predictions():
    rng = np.random.default_rng(42)
    model = random_model(rng)
    lo, span = np.array([1.0, -2.0, 400.0]), np.array([2.0, 4.0, 200.0])
    out_lo, out_span = np.array([470.0, 471.0, 472.0]), np.array([190.0, 195.0, 200.0])
    folded = mlp.fold_affine(model, lo, span, out_lo, out_span)
    X = rng.uniform(size=(10, 3)) * span + lo
    expected = mlp.forward(model, (X - lo) / span) * out_span + out_lo
    np.testing.assert_allclose(mlp.forward(folded, X), expected, rtol=1e-12)


def test_save_load_exact(tmp_path):
    from triceptnn.dataset import NormalizationMap

    model = random_model(np.random.default_rng(43), (3, 4, 2), "logsig")
    model.input_bounds = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    model.normalization = NormalizationMap(np.arange(6.0), np.arange(6.0) + 1.5)
    path = tmp_path / "m.model"
    mlp.save_model(model, path)
    loaded = mlp.load_model(path)
    assert loaded.layer_sizes == model.layer_sizes and loaded.hidden_activation == "logsig"
    assert np.array_equal(loaded.get_flat_params(), model.get_flat_params())
    assert np.array_equal(loaded.input_bounds, model.input_bounds)
    assert np.array_equal(loaded.normalization.maxs, model.normalization.maxs)
    text = path.read_text().splitlines()
    text[5] = "1 2"
    path.write_text("\n".join(text))
    with pytest.raises(ParseError) as info:
        mlp.load_model(path)
    assert info.value.line == 6


def test_estimator_api():
    from sklearn.base import clone

    rng = np.random.default_rng(44)
    X = rng.uniform(size=(150, 3)) * [1.0, 1.0, 200.0] + [0, 0, 426]
    y = X[:, 2] / 100 + np.sin(X[:, 0])
    est = mlp.LevenbergMarquardtMLP(max_epochs=50, goal_mse=0.0, random_state=3)
    assert clone(est).get_params() == est.get_params()
    est.fit(X, y)
    assert est.predict(X).shape == (150,)
    assert est.score(X, y) > 0.999
    assert np.array_equal(est.model_.input_bounds[1], X.max(axis=0))
