"""Latitude-weighted benchmark metrics for gridded emulator predictions.

Spatial RMSE is the area-weighted mean absolute error of per-cell time means
over the evaluation window; global RMSE is the time-mean absolute error of
per-year area-weighted global means. The inner sqrt-of-a-square in both
definitions reduces to an absolute value and is implemented as such. NRMSE
normalizes by the magnitude of the target's area-time(-ensemble) mean, and
the "total" score combines the two as spatial + 5 * global.
"""

from __future__ import annotations

import csv
from typing import Iterable, Sequence

import numpy as np

NORMALIZER_FLOOR = 1e-6


class SingularFitError(ValueError):
    """Raised when a least-squares design has no unique solution."""


def lat_weights(lats_deg: np.ndarray) -> np.ndarray:
    """Area weights alpha_i = cos(phi_i) for latitudes given in degrees."""
    w = np.cos(np.deg2rad(np.asarray(lats_deg, dtype=np.float64)))
    # cos can come out at -0.0 epsilon for the poles
    return np.clip(w, 0.0, None)


def global_mean(field: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Area-weighted global mean over trailing (lat, lon) axes."""
    field = np.asarray(field, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if field.shape[-2] != w.shape[0]:
        raise ValueError(f"lat axis {field.shape[-2]} does not match {w.shape[0]} weights")
    n_lon = field.shape[-1]
    denom = w.sum() * n_lon
    return np.tensordot(field, w, axes=([-2], [0])).sum(axis=-1) / denom


def _check_pair(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    if pred.ndim != 3:
        raise ValueError(f"expected [year, lat, lon] arrays, got ndim={pred.ndim}")
    if pred.shape[0] == 0:
        raise ValueError("empty evaluation window")
    return pred, target


def rmse_spatial(pred: np.ndarray, target: np.ndarray, weights: np.ndarray) -> float:
    """Area-weighted mean absolute error of time-mean fields over the window."""
    pred, target = _check_pair(pred, target)
    diff = np.abs(pred.mean(axis=0) - target.mean(axis=0))
    w = np.asarray(weights, dtype=np.float64)
    if diff.shape[0] != w.shape[0]:
        raise ValueError(f"lat axis {diff.shape[0]} does not match {w.shape[0]} weights")
    n_lon = diff.shape[1]
    return float((diff * w[:, None]).sum() / (w.sum() * n_lon))


def rmse_global(pred: np.ndarray, target: np.ndarray, weights: np.ndarray) -> float:
    """Time-mean absolute error of area-weighted global means."""
    pred, target = _check_pair(pred, target)
    return float(np.abs(global_mean(pred, weights) - global_mean(target, weights)).mean())


def target_normalizer(target: np.ndarray, weights: np.ndarray) -> float:
    """|area-, time-, and (when present) ensemble-mean| of the target window.

    Accepts [year, lat, lon] or [member, year, lat, lon] arrays; the member
    axis, when present, is averaged first.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 4:
        target = target.mean(axis=0)
    if target.ndim != 3:
        raise ValueError(f"expected 3-D or 4-D target, got ndim={target.ndim}")
    return float(abs(global_mean(target, weights).mean()))


def nrmse(rmse: float, target: np.ndarray, weights: np.ndarray) -> float:
    """RMSE normalized by the magnitude of the target mean."""
    norm = target_normalizer(target, weights)
    if norm == 0.0:
        raise ValueError("target mean is zero; NRMSE undefined")
    return float(rmse / norm)


def nrmse_total(nrmse_spatial_value: float, nrmse_global_value: float) -> float:
    """Combined score: spatial NRMSE + 5 * global NRMSE."""
    return float(nrmse_spatial_value + 5.0 * nrmse_global_value)


def delta_rmse(score_a: float, score_b: float) -> float:
    """Score difference a - b (conventionally complex-model minus baseline)."""
    return float(score_a - score_b)


def linear_trend(
    xs: Sequence[float],
    ys: Sequence[float],
    x_range: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """OLS slope and intercept of ys over xs, restricted to ``x_range``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have equal length")
    if x_range is not None:
        lo, hi = x_range
        mask = (xs >= lo) & (xs <= hi)
        xs, ys = xs[mask], ys[mask]
    if xs.size < 2 or np.ptp(xs) == 0.0:
        raise SingularFitError("need >= 2 points with distinct x for a trend")
    x_mean, y_mean = xs.mean(), ys.mean()
    slope = float(((xs - x_mean) * (ys - y_mean)).sum() / ((xs - x_mean) ** 2).sum())
    intercept = float(y_mean - slope * x_mean)
    return slope, intercept


def write_scoreboard(path, rows: Iterable[tuple[str, str, str, float]]) -> None:
    """CSV scoreboard with one (technique, variable, metric, value) per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["technique", "variable", "metric", "value"])
        for technique, variable, metric, value in rows:
            writer.writerow([technique, variable, metric, repr(float(value))])
