import numpy as np
import pytest

from emubench import nnkit
from emubench.nnkit import Dense, OptimizerSpec, Sequential, TrainingDivergedError


def linear_data(n=64, slope=3.0, seed=0):
    x = np.random.default_rng(seed).uniform(-1, 1, size=(n, 1))
    return x, slope * x


def test_fit_noise_free_line_below_tolerance():
    x, y = linear_data()
    net = Sequential([Dense(1, 1)])
    net.initialize(3)
    spec = OptimizerSpec(kind="adamw", learning_rate=0.05, batch_size=8,
                         max_epochs=150, patience=150)
    result = nnkit.train(net, spec, x, y, x, y, seed=5)
    assert result.best_stop_loss < 1e-6
    assert nnkit.evaluate_mse(net, x, y) < 1e-6  # checkpoint restored


def test_checkpoint_is_last_improving_epoch_on_noise_free_data():
    x, y = linear_data()
    net = Sequential([Dense(1, 1)])
    net.initialize(4)
    spec = OptimizerSpec(kind="adamw", learning_rate=0.02, batch_size=16,
                         max_epochs=40, patience=40)
    result = nnkit.train(net, spec, x, y, x, y, seed=6)
    stops = np.array(result.stop_losses)
    assert result.best_epoch == int(np.argmin(stops))
    improving = [e for e in range(len(stops)) if stops[e] == stops[: e + 1].min()]
    assert result.best_epoch == improving[-1]


def test_adamw_first_step_from_zeros():
    # bias-corrected first update with g = 1: delta = -lr * g/(|g|+eps) ~= -lr
    layer = Dense(1, 1)
    layer.w = np.zeros((1, 1))
    spec = OptimizerSpec(kind="adamw", learning_rate=0.01, weight_decay=0.0)
    opt = nnkit.make_optimizer(spec, {"w": layer.w})
    opt.step({"w": layer.w}, {"w": np.ones((1, 1))}, lr=spec.learning_rate)
    assert layer.w[0, 0] == pytest.approx(-0.01, rel=1e-6)


def test_adamw_decoupled_weight_decay():
    w = np.array([[2.0]])
    spec = OptimizerSpec(kind="adamw", learning_rate=0.1, weight_decay=0.5)
    opt = nnkit.make_optimizer(spec, {"w": w})
    opt.step({"w": w}, {"w": np.zeros((1, 1))}, lr=spec.learning_rate)
    # zero gradient: only the decay term acts, w -= lr*wd*w
    assert w[0, 0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_rmsprop_single_step_matches_hand_update():
    w = np.array([[1.0]])
    g = np.array([[0.5]])
    spec = OptimizerSpec(kind="rmsprop", learning_rate=0.001)
    opt = nnkit.make_optimizer(spec, {"w": w})
    opt.step({"w": w}, {"w": g}, lr=spec.learning_rate)
    sq = 0.1 * 0.25
    expected = 1.0 - 0.001 * 0.5 / (np.sqrt(sq) + 1e-7)
    assert w[0, 0] == pytest.approx(expected, rel=1e-12)


def test_training_is_reproducible_bit_for_bit():
    x, y = linear_data(seed=7)

    def run():
        net = nnkit.fcn_network(1, (6, 4))
        net.initialize(8)
        spec = OptimizerSpec(kind="adamw", learning_rate=0.01, batch_size=8, max_epochs=12)
        nnkit.train(net, spec, x, y, x, y, seed=9)
        return net.state_dict()

    a, b = run(), run()
    assert a.keys() == b.keys()
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_divergence_raises_with_epoch_index():
    # |w| <= 1 at init, so the residual is >= 2e160 and its square overflows
    x = np.full((8, 1), 1e160)
    y = 3.0 * x
    net = Sequential([Dense(1, 1)])
    net.initialize(10)
    spec = OptimizerSpec(kind="adamw", learning_rate=1.0, batch_size=8, max_epochs=5)
    with pytest.raises(TrainingDivergedError) as err:
        nnkit.train(net, spec, x, y, x, y, seed=11)
    assert err.value.epoch >= 0


def test_early_stopping_respects_patience():
    x, y = linear_data(seed=12)
    net = Sequential([Dense(1, 1)])
    net.initialize(13)
    spec = OptimizerSpec(kind="adamw", learning_rate=0.05, batch_size=8,
                         max_epochs=150, patience=5)
    result = nnkit.train(net, spec, x, y, x, y, seed=14)
    if result.epochs_run < spec.max_epochs:
        assert result.epochs_run - 1 - result.best_epoch >= spec.patience


def test_spec_validation():
    with pytest.raises(ValueError):
        OptimizerSpec(learning_rate=0.0).validate()
    with pytest.raises(ValueError):
        OptimizerSpec(batch_size=0).validate()
    with pytest.raises(ValueError):
        OptimizerSpec(kind="sgd").validate()


def test_loss_curves_recorded_per_epoch():
    x, y = linear_data(seed=15)
    net = Sequential([Dense(1, 1)])
    net.initialize(16)
    spec = OptimizerSpec(kind="rmsprop", learning_rate=0.001, batch_size=16, max_epochs=7)
    result = nnkit.train(net, spec, x, y, x, y, seed=17)
    assert len(result.train_losses) == len(result.stop_losses) == result.epochs_run == 7
