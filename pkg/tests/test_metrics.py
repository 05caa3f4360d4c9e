import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emubench import metrics


def grid(values):
    return np.asarray(values, dtype=np.float64)


def test_rmse_spatial_zero_for_identical_fields():
    rng = np.random.default_rng(1)
    f = rng.normal(size=(4, 3, 5))
    w = metrics.lat_weights(np.array([-60.0, 0.0, 60.0]))
    assert metrics.rmse_spatial(f, f, w) == 0.0
    assert metrics.rmse_global(f, f, w) == 0.0


def test_rmse_constant_offset_passes_through():
    rng = np.random.default_rng(2)
    target = rng.normal(size=(6, 4, 4))
    pred = target + 0.5
    w = metrics.lat_weights(np.array([-45.0, -15.0, 15.0, 45.0]))
    assert metrics.rmse_spatial(pred, target, w) == pytest.approx(0.5, rel=1e-12)
    assert metrics.rmse_global(pred, target, w) == pytest.approx(0.5, rel=1e-12)


def test_rmse_spatial_hand_case_two_latitudes():
    # 2x1 grid, lats {0, 60} -> weights {1, 0.5}; time-mean errors {1, 2}:
    # (1*1 + 0.5*2) / (1.5*1) = 4/3
    target = np.zeros((2, 2, 1))
    pred = np.zeros((2, 2, 1))
    pred[:, 0, 0] = 1.0
    pred[:, 1, 0] = 2.0
    w = metrics.lat_weights(np.array([0.0, 60.0]))
    assert metrics.rmse_spatial(pred, target, w) == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_rmse_global_hand_case_two_years():
    # two years with global-mean errors {1, 2} -> 1.5
    target = np.zeros((2, 3, 2))
    pred = np.zeros((2, 3, 2))
    pred[0] = 1.0
    pred[1] = 2.0
    w = metrics.lat_weights(np.array([-30.0, 0.0, 30.0]))
    assert metrics.rmse_global(pred, target, w) == pytest.approx(1.5, abs=1e-12)


def test_rmse_shape_and_window_errors():
    w = metrics.lat_weights(np.array([0.0]))
    with pytest.raises(ValueError):
        metrics.rmse_spatial(np.zeros((2, 1, 1)), np.zeros((3, 1, 1)), w)
    with pytest.raises(ValueError):
        metrics.rmse_global(np.zeros((0, 1, 1)), np.zeros((0, 1, 1)), w)


def test_single_cell_grid_reduces_to_absolute_errors():
    w = metrics.lat_weights(np.array([12.0]))
    pred = grid([[[1.0]], [[3.0]]])
    target = grid([[[0.0]], [[0.0]]])
    # global: mean per-year absolute error; spatial: abs error of time means
    assert metrics.rmse_global(pred, target, w) == pytest.approx(2.0)
    assert metrics.rmse_spatial(pred, target, w) == pytest.approx(2.0)
    pred2 = grid([[[1.0]], [[-1.0]]])
    assert metrics.rmse_global(pred2, target, w) == pytest.approx(1.0)
    assert metrics.rmse_spatial(pred2, target, w) == pytest.approx(0.0, abs=1e-15)


def test_rmse_spatial_invariant_to_year_permutation():
    rng = np.random.default_rng(3)
    pred = rng.normal(size=(5, 3, 4))
    target = rng.normal(size=(5, 3, 4))
    w = metrics.lat_weights(np.array([-40.0, 0.0, 40.0]))
    perm = rng.permutation(5)
    assert metrics.rmse_spatial(pred[perm], target, w) == pytest.approx(
        metrics.rmse_spatial(pred, target, w), rel=1e-12
    )


def test_rmse_global_invariant_to_cell_permutation_with_equal_weights():
    rng = np.random.default_rng(4)
    pred = rng.normal(size=(5, 2, 3))
    target = rng.normal(size=(5, 2, 3))
    w = metrics.lat_weights(np.array([30.0, 30.0]))
    flat = pred.reshape(5, -1)
    perm = rng.permutation(6)
    pred_perm = flat[:, perm].reshape(5, 2, 3)
    assert metrics.rmse_global(pred_perm, target, w) == pytest.approx(
        metrics.rmse_global(pred, target, w), rel=1e-12
    )


@given(scale=st.floats(min_value=-50, max_value=50).filter(lambda c: abs(c) > 1e-6))
@settings(max_examples=30, deadline=None)
def test_rmse_absolute_homogeneity(scale):
    rng = np.random.default_rng(5)
    pred = rng.normal(size=(3, 2, 2))
    target = rng.normal(size=(3, 2, 2))
    w = metrics.lat_weights(np.array([-10.0, 10.0]))
    for fn in (metrics.rmse_spatial, metrics.rmse_global):
        assert fn(scale * pred, scale * target, w) == pytest.approx(
            abs(scale) * fn(pred, target, w), rel=1e-9, abs=1e-12
        )


def test_nrmse_definition_and_total():
    target = np.full((4, 2, 2), 2.0)
    w = metrics.lat_weights(np.array([0.0, 30.0]))
    assert metrics.nrmse(1.0, target, w) == pytest.approx(0.5)
    assert metrics.nrmse_total(0.1, 0.04) == pytest.approx(0.3)


def test_nrmse_uses_member_mean_when_given_four_dims():
    target = np.stack([np.full((4, 2, 2), 1.0), np.full((4, 2, 2), 3.0)])
    w = metrics.lat_weights(np.array([0.0, 30.0]))
    assert metrics.nrmse(1.0, target, w) == pytest.approx(0.5)


def test_nrmse_zero_normalizer_raises():
    w = metrics.lat_weights(np.array([0.0]))
    with pytest.raises(ValueError):
        metrics.nrmse(1.0, np.zeros((3, 1, 1)), w)


def test_perfect_prediction_gives_zero_total_nrmse():
    rng = np.random.default_rng(6)
    target = rng.normal(size=(4, 3, 3)) + 5.0
    w = metrics.lat_weights(np.array([-30.0, 0.0, 30.0]))
    ns = metrics.nrmse(metrics.rmse_spatial(target, target, w), target, w)
    ng = metrics.nrmse(metrics.rmse_global(target, target, w), target, w)
    assert metrics.nrmse_total(ns, ng) == 0.0


def test_linear_trend_constant_series_has_zero_slope():
    slope, intercept = metrics.linear_trend([1, 2, 3], [4.0, 4.0, 4.0])
    assert slope == pytest.approx(0.0, abs=1e-15)
    assert intercept == pytest.approx(4.0)


def test_linear_trend_recovers_exact_line():
    ns = np.arange(0, 30, dtype=float)
    slope, intercept = metrics.linear_trend(ns, -2.0 * ns + 3.0)
    assert slope == pytest.approx(-2.0, rel=1e-12)
    assert intercept == pytest.approx(3.0, rel=1e-12)


def test_linear_trend_range_masks_points():
    # oracle: OLS restricted by hand to n <= 20
    ns = np.array([0.0, 5.0, 10.0, 20.0, 30.0, 50.0])
    ys = np.array([0.0, 1.0, 2.0, 4.0, 100.0, -7.0])
    slope, intercept = metrics.linear_trend(ns, ys, x_range=(0.0, 20.0))
    inside = ns <= 20.0
    expected = np.polyfit(ns[inside], ys[inside], 1)
    assert slope == pytest.approx(expected[0], rel=1e-10)
    assert intercept == pytest.approx(expected[1], rel=1e-10, abs=1e-12)


def test_linear_trend_degenerate_inputs_raise():
    with pytest.raises(metrics.SingularFitError):
        metrics.linear_trend([2.0, 2.0], [1.0, 3.0])
    with pytest.raises(metrics.SingularFitError):
        metrics.linear_trend([1.0, 2.0], [1.0, 3.0], x_range=(5.0, 6.0))


def test_delta_rmse():
    assert metrics.delta_rmse(1.25, 1.0) == pytest.approx(0.25)


def test_scoreboard_layout(tmp_path):
    path = tmp_path / "scores.csv"
    metrics.write_scoreboard(
        path, [("lps", "precip", "rmse_spatial", 0.5), ("cnnlstm", "precip", "rmse_global", 0.25)]
    )
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "technique,variable,metric,value"
    assert lines[1].startswith("lps,precip,rmse_spatial,")
    assert len(lines) == 3
