import numpy as np
import pytest

from emubench import emulators, metrics
from emubench.dataset import ForcingChannel, ScenarioInputs
from emubench.emulators import CnnLstmConfig
from emubench.metrics import SingularFitError
from emubench.nnkit import OptimizerSpec


def scenario_inputs(name, x, extra=None):
    years = np.arange(len(x))
    channels = {
        "cumulative_emissions": ForcingChannel("cumulative_emissions", "GtX", np.asarray(x, float))
    }
    if extra is not None:
        channels["emission_rate"] = ForcingChannel("emission_rate", "GtX/yr", np.asarray(extra, float))
    return ScenarioInputs(scenario=name, years=years, channels=channels)


def test_lps_recovers_generating_coefficients_exactly():
    # T = 0.5*x, y = 2*T + 1 per cell: all coefficients recovered to 1e-10
    rng = np.random.default_rng(0)
    lats = np.array([-30.0, 0.0, 30.0])
    inputs, targets, globals_ = {}, {}, {}
    for name, scale in [("a", 1.0), ("b", 1.8)]:
        x = scale * rng.uniform(0, 100, size=40)
        tbar = 0.5 * x
        y = np.broadcast_to((2.0 * tbar + 1.0)[:, None, None], (40, 3, 4)).copy()
        inputs[name] = scenario_inputs(name, x)
        targets[name] = y
        globals_[name] = tbar
    fit = emulators.lps_fit(inputs, targets, lats, global_targets=globals_)
    assert fit.w_global == pytest.approx(0.5, abs=1e-10)
    assert fit.b_global == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(fit.w_local, 2.0, atol=1e-10)
    np.testing.assert_allclose(fit.b_local, 1.0, atol=1e-10)
    assert fit.n_parameters == 2 * 12 + 2


def test_lps_global_stage_hand_case():
    # x = [0,1,2], Tbar = [1,1,1] -> w_global = 0, b_global = 1; a constant
    # global series then makes the local stage rank-deficient
    lats = np.array([0.0])
    inputs = {"s": scenario_inputs("s", [0.0, 1.0, 2.0])}
    targets = {"s": np.ones((3, 1, 1))}
    # a constant global series leaves the local stage rank-deficient
    with pytest.raises(SingularFitError):
        emulators.lps_fit(inputs, targets, lats)
    # the global stage itself is plain scalar OLS: slope 0, intercept 1
    stage = emulators.linear1d_fit(np.array([0.0, 1.0, 2.0]), np.ones(3))
    assert stage.slope == pytest.approx(0.0, abs=1e-15)
    assert stage.intercept == pytest.approx(1.0, abs=1e-15)


def test_lps_single_cell_self_regression():
    lats = np.array([10.0])
    series = np.array([0.0, 1.0, 4.0, 2.5])
    inputs = {"s": scenario_inputs("s", [0.0, 10.0, 40.0, 25.0])}
    targets = {"s": series.reshape(4, 1, 1)}
    fit = emulators.lps_fit(inputs, targets, lats)
    assert fit.w_local[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert fit.b_local[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_lps_constant_emissions_is_singular():
    lats = np.array([0.0])
    inputs = {"s": scenario_inputs("s", np.full(5, 7.0))}
    targets = {"s": np.random.default_rng(1).normal(size=(5, 1, 1))}
    with pytest.raises(SingularFitError):
        emulators.lps_fit(inputs, targets, lats)


def test_lps_predict_is_affine_in_emissions():
    fit = emulators.LpsFit(
        w_global=0.5, b_global=1.0,
        w_local=np.array([[2.0, -1.0]]), b_local=np.array([[0.5, 3.0]]),
    )
    zero = emulators.lps_predict(fit, scenario_inputs("z", [0.0, 0.0]))
    np.testing.assert_allclose(
        zero[0], fit.w_local * fit.b_global + fit.b_local, rtol=1e-12
    )
    one = emulators.lps_predict(fit, scenario_inputs("o", [10.0]))
    two = emulators.lps_predict(fit, scenario_inputs("t", [20.0]))
    np.testing.assert_allclose(two[0] - zero[0], 2 * (one[0] - zero[0]), rtol=1e-12)


def test_lps_predict_missing_channel():
    fit = emulators.LpsFit(1.0, 0.0, np.ones((1, 1)), np.zeros((1, 1)))
    bare = ScenarioInputs(scenario="s", years=np.arange(3), channels={})
    with pytest.raises(KeyError):
        emulators.lps_predict(fit, bare)


def test_lps_exact_on_data_inside_the_model_class():
    # targets constructed as an affine map of the emission channel
    rng = np.random.default_rng(2)
    lats = np.linspace(-60, 60, 4)
    w_map = rng.normal(size=(4, 5))
    b_map = rng.normal(size=(4, 5))
    inputs, targets = {}, {}
    for name, scale in [("a", 1.0), ("b", 0.5), ("c", 1.5)]:
        x = scale * rng.uniform(0, 50, size=30)
        tbar = 0.3 * x - 2.0
        targets[name] = w_map * tbar[:, None, None] + b_map
        inputs[name] = scenario_inputs(name, x)
    fit = emulators.lps_fit(inputs, targets, lats)
    pred = emulators.lps_predict(fit, inputs["c"])
    w = metrics.lat_weights(lats)
    assert metrics.rmse_spatial(pred, targets["c"], w) < 1e-8
    assert metrics.rmse_global(pred, targets["c"], w) < 1e-8


def test_lps_fit_invariant_to_sample_order():
    rng = np.random.default_rng(3)
    lats = np.array([0.0, 45.0])
    x = rng.uniform(0, 10, size=20)
    y = rng.normal(size=(20, 2, 3))
    f1 = emulators.lps_fit({"s": scenario_inputs("s", x)}, {"s": y}, lats)
    perm = rng.permutation(20)
    f2 = emulators.lps_fit({"s": scenario_inputs("s", x[perm])}, {"s": y[perm]}, lats)
    np.testing.assert_allclose(f1.w_local, f2.w_local, rtol=1e-9)
    np.testing.assert_allclose(f1.w_global, f2.w_global, rtol=1e-9)


def test_lps_pooled_residual_is_locally_optimal():
    rng = np.random.default_rng(4)
    lats = np.array([0.0])
    x = rng.uniform(0, 10, size=25)
    y = (0.8 * x + rng.normal(scale=0.3, size=25)).reshape(25, 1, 1)
    inputs = {"s": scenario_inputs("s", x)}
    fit = emulators.lps_fit(inputs, {"s": y}, lats)

    def sse(w, b):
        tbar_hat = fit.w_global * x + fit.b_global
        pred = w * tbar_hat + b
        return ((pred - y[:, 0, 0]) ** 2).sum()

    base = sse(fit.w_local[0, 0], fit.b_local[0, 0])
    for dw in (-1e-6, 1e-6):
        for db in (-1e-6, 1e-6):
            assert sse(fit.w_local[0, 0] + dw, fit.b_local[0, 0] + db) >= base


def test_linear1d_exact_recovery():
    x = np.linspace(0, 5, 17)
    fit = emulators.linear1d_fit(x, -1.25 * x + 0.75)
    assert fit.slope == pytest.approx(-1.25, abs=1e-12)
    assert fit.intercept == pytest.approx(0.75, abs=1e-12)
    np.testing.assert_allclose(
        emulators.linear1d_predict(fit, x), -1.25 * x + 0.75, atol=1e-12
    )


def small_cnn_config(max_epochs=20, stopping="held_out"):
    opt = OptimizerSpec(kind="rmsprop", learning_rate=1e-3, batch_size=16,
                        max_epochs=max_epochs, patience=max_epochs,
                        stopping_role=stopping)
    return CnnLstmConfig(channels=("cumulative_emissions", "emission_rate"),
                         history=5, filters=4, lstm_hidden=6, optimizer=opt)


def toy_gridded_problem(n_years=40, n_lat=4, n_lon=6, target="zero", seed=0):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.uniform(0, 10, size=n_years))
    rate = np.gradient(x)
    inputs = {"train": scenario_inputs("train", x, extra=rate)}
    if target == "zero":
        tgt = np.zeros((n_years, n_lat, n_lon))
    else:
        tgt = np.broadcast_to((0.01 * x)[:, None, None], (n_years, n_lat, n_lon)).copy()
    return inputs, {"train": tgt}


def test_cnnlstm_learns_constant_zero_targets():
    inputs, targets = toy_gridded_problem(target="zero")
    fit = emulators.cnnlstm_fit(inputs, targets, seed=1, config=small_cnn_config())
    pred = emulators.cnnlstm_predict(fit, inputs["train"])
    assert float(np.mean(pred**2)) < 1e-4


def test_cnnlstm_seeds_change_parameters():
    inputs, targets = toy_gridded_problem(target="ramp")
    cfg = small_cnn_config(max_epochs=2)
    fit1 = emulators.cnnlstm_fit(inputs, targets, seed=1, config=cfg)
    fit2 = emulators.cnnlstm_fit(inputs, targets, seed=2, config=cfg)
    params1 = fit1.net.state_dict()
    params2 = fit2.net.state_dict()
    assert any(not np.array_equal(params1[k], params2[k]) for k in params1)


def test_cnnlstm_training_improves_loss():
    inputs, targets = toy_gridded_problem(target="ramp")
    fit = emulators.cnnlstm_fit(inputs, targets, seed=3,
                                config=small_cnn_config(max_epochs=15))
    assert fit.train_losses[-1] < fit.train_losses[0]
    assert min(fit.stop_losses) == fit.stop_losses[fit.best_epoch]


def test_cnnlstm_prediction_depends_only_on_window_years():
    inputs, targets = toy_gridded_problem(target="ramp", n_years=30)
    cfg = small_cnn_config(max_epochs=2)
    fit = emulators.cnnlstm_fit(inputs, targets, seed=4, config=cfg)
    base = emulators.cnnlstm_predict(fit, inputs["train"])
    t = 20
    history = cfg.history

    def perturbed(year):
        x = inputs["train"].channel("cumulative_emissions").values.copy()
        x[year] += 123.0
        rate = inputs["train"].channel("emission_rate").values.copy()
        return scenario_inputs("train", x, extra=rate)

    # perturbing just outside the window leaves year t unchanged
    for outside in (t - history, t + 1):
        pred = emulators.cnnlstm_predict(fit, perturbed(outside))
        np.testing.assert_array_equal(pred[t], base[t])
    # perturbing inside the window changes it
    pred = emulators.cnnlstm_predict(fit, perturbed(t))
    assert not np.array_equal(pred[t], base[t])


def test_cnnlstm_historical_prepend_fills_window():
    rng = np.random.default_rng(5)
    hist_x = np.cumsum(rng.uniform(0, 5, size=12))
    ssp_x = hist_x[-1] + np.cumsum(rng.uniform(0, 5, size=10))
    hist = scenario_inputs("hist", hist_x, extra=np.gradient(hist_x))
    ssp = ScenarioInputs(
        scenario="ssp",
        years=np.arange(12, 22),
        channels={
            "cumulative_emissions": ForcingChannel("cumulative_emissions", "GtX", ssp_x),
            "emission_rate": ForcingChannel("emission_rate", "GtX/yr", np.gradient(ssp_x)),
        },
    )
    targets = {
        "hist": np.zeros((12, 4, 6)),
        "ssp": np.zeros((10, 4, 6)),
    }
    cfg = small_cnn_config(max_epochs=1)
    fit = emulators.cnnlstm_fit(
        {"hist": hist, "ssp": ssp}, targets, seed=6, config=cfg,
        history_sources={"ssp": "hist"},
    )
    with_hist = emulators.cnnlstm_predict(fit, ssp, history_inputs=hist)
    without = emulators.cnnlstm_predict(fit, ssp)
    # the first SSP years see genuine history instead of repeated padding
    assert not np.array_equal(with_hist[0], without[0])
    # by year history-1 the window no longer reaches back across the boundary
    np.testing.assert_array_equal(with_hist[cfg.history - 1], without[cfg.history - 1])


def test_cnnlstm_test_stopping_role_uses_supplied_set():
    inputs, targets = toy_gridded_problem(target="ramp", n_years=30)
    cfg = small_cnn_config(max_epochs=3, stopping="test")
    with pytest.raises(ValueError):
        emulators.cnnlstm_fit(inputs, targets, seed=9, config=cfg)
    fit = emulators.cnnlstm_fit(
        inputs, targets, seed=9, config=cfg,
        stop_inputs=inputs["train"], stop_targets=targets["train"],
    )
    assert len(fit.stop_losses) == 3


def test_cnnlstm_train_stopping_role():
    inputs, targets = toy_gridded_problem(target="ramp", n_years=25)
    cfg = small_cnn_config(max_epochs=2, stopping="train")
    fit = emulators.cnnlstm_fit(inputs, targets, seed=10, config=cfg)
    assert fit.best_epoch >= 0


def test_fcn_beats_linear_fit_on_noise_free_quadratic():
    x = np.linspace(0.0, 10.0, 120)
    y = 0.05 * x**2
    lin = emulators.linear1d_fit(x, y)
    lin_mse = float(np.mean((emulators.linear1d_predict(lin, x) - y) ** 2))
    fit = emulators.fcn_fit(x, y, x, y, seed=7)
    fcn_mse = float(np.mean((emulators.fcn_predict(fit, x) - y) ** 2))
    assert fcn_mse < lin_mse


def test_lps_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    fit = emulators.LpsFit(
        w_global=0.31, b_global=-0.7,
        w_local=rng.normal(size=(3, 4)), b_local=rng.normal(size=(3, 4)),
    )
    emulators.save_lps(tmp_path / "lps", fit)
    loaded = emulators.load_lps(tmp_path / "lps")
    assert loaded.w_global == fit.w_global and loaded.b_global == fit.b_global
    np.testing.assert_array_equal(loaded.w_local, fit.w_local)
    np.testing.assert_array_equal(loaded.b_local, fit.b_local)
    x = scenario_inputs("s", [0.0, 5.0, 11.0])
    np.testing.assert_array_equal(
        emulators.lps_predict(loaded, x), emulators.lps_predict(fit, x)
    )


def test_cnnlstm_serialization_round_trip(tmp_path):
    inputs, targets = toy_gridded_problem(target="ramp")
    fit = emulators.cnnlstm_fit(inputs, targets, seed=5,
                                config=small_cnn_config(max_epochs=2))
    emulators.save_cnnlstm(tmp_path / "net", fit)
    loaded = emulators.load_cnnlstm(tmp_path / "net")
    np.testing.assert_array_equal(
        emulators.cnnlstm_predict(loaded, inputs["train"]),
        emulators.cnnlstm_predict(fit, inputs["train"]),
    )


def test_fcn_is_reproducible():
    x = np.linspace(0.0, 1.0, 50)
    y = x**2
    opt = emulators.default_fcn_optimizer()
    opt.max_epochs = opt.patience = 10
    a = emulators.fcn_fit(x, y, x, y, seed=8, optimizer=opt)
    b = emulators.fcn_fit(x, y, x, y, seed=8, optimizer=opt)
    np.testing.assert_array_equal(
        emulators.fcn_predict(a, x), emulators.fcn_predict(b, x)
    )
