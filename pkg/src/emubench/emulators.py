"""The emulation techniques under comparison, behind one fit/predict contract.

* Linear pattern scaling (LPS): a global OLS fit from the cumulative-emission
  channel to the area-weighted global-mean target, chained with independent
  per-cell OLS fits from the global mean to each cell. The local stage is
  fitted against the target global mean and predicts from the estimated one.
* CNN-LSTM: per-year grids of the forcing channels over a trailing history
  window, trained with per-pixel, per-year MSE.
* FCN: the small fully connected net for the scalar bias-variance study.
* linear1d: closed-form scalar OLS baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics, seeds
from .dataset import ScenarioInputs
from .metrics import SingularFitError
from .nnkit import (
    OptimizerSpec,
    Sequential,
    cnnlstm_network,
    fcn_network,
    train,
)

DEFAULT_INPUT_CHANNEL = "cumulative_emissions"


# ---------------------------------------------------------------------------
# linear pattern scaling


@dataclass
class LpsFit:
    """Global (emissions -> global mean) and local (global mean -> cell) OLS."""

    w_global: float
    b_global: float
    w_local: np.ndarray
    b_local: np.ndarray
    input_channel: str = DEFAULT_INPUT_CHANNEL

    @property
    def n_parameters(self) -> int:
        # the global pair is redundant with the local maps
        return 2 * self.w_local.size + 2


def _ols_1d(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if x.size < 2 or np.ptp(x) == 0.0:
        raise SingularFitError("constant regressor: OLS fit is rank-deficient")
    xm = x.mean()
    slope = ((x - xm) * (y - y.mean())).sum() / ((x - xm) ** 2).sum()
    return float(slope), float(y.mean() - slope * xm)


def lps_fit(
    inputs: dict[str, ScenarioInputs],
    targets: dict[str, np.ndarray],
    lats: np.ndarray,
    input_channel: str = DEFAULT_INPUT_CHANNEL,
    global_targets: Optional[dict[str, np.ndarray]] = None,
) -> LpsFit:
    """Fit LPS on pooled (scenario, year) samples of ensemble-mean targets.

    ``targets`` maps scenario -> [year, lat, lon]. The global-mean series for
    the local stage defaults to the area-weighted mean of the same targets.
    """
    scenarios = sorted(targets)
    weights = metrics.lat_weights(lats)
    xs, tbars, ys = [], [], []
    for scen in scenarios:
        target = np.asarray(targets[scen], dtype=np.float64)
        x = inputs[scen].channel(input_channel).values
        if x.ndim != 1:
            raise ValueError(f"channel {input_channel!r} must be a global scalar series")
        if len(x) != target.shape[0]:
            raise ValueError(f"scenario {scen}: {len(x)} input years vs {target.shape[0]} target years")
        tbar = (
            np.asarray(global_targets[scen], dtype=np.float64)
            if global_targets is not None
            else metrics.global_mean(target, weights)
        )
        xs.append(x)
        tbars.append(tbar)
        ys.append(target)
    x_all = np.concatenate(xs)
    tbar_all = np.concatenate(tbars)
    y_all = np.concatenate(ys, axis=0)
    w_g, b_g = _ols_1d(x_all, tbar_all)
    if np.ptp(tbar_all) == 0.0:
        raise SingularFitError("global-mean target is constant: local fits are rank-deficient")
    # vectorized per-cell OLS of y on the target global mean
    t_centered = tbar_all - tbar_all.mean()
    denom = (t_centered**2).sum()
    w_local = np.tensordot(t_centered, y_all, axes=([0], [0])) / denom
    b_local = y_all.mean(axis=0) - w_local * tbar_all.mean()
    return LpsFit(w_global=w_g, b_global=b_g, w_local=w_local, b_local=b_local,
                  input_channel=input_channel)


def lps_predict(fit: LpsFit, inputs: ScenarioInputs) -> np.ndarray:
    """Predicted [year, lat, lon] fields from the scenario's emission channel."""
    x = inputs.channel(fit.input_channel).values
    tbar_hat = fit.w_global * x + fit.b_global
    return fit.w_local[None, :, :] * tbar_hat[:, None, None] + fit.b_local[None, :, :]


# ---------------------------------------------------------------------------
# scalar baselines (bias-variance study)


@dataclass
class Linear1dFit:
    slope: float
    intercept: float


def linear1d_fit(x: np.ndarray, y: np.ndarray) -> Linear1dFit:
    slope, intercept = _ols_1d(np.asarray(x, float), np.asarray(y, float))
    return Linear1dFit(slope=slope, intercept=intercept)


def linear1d_predict(fit: Linear1dFit, x: np.ndarray) -> np.ndarray:
    return fit.slope * np.asarray(x, float) + fit.intercept


def default_fcn_optimizer() -> OptimizerSpec:
    # the rate is deliberately aggressive: training must reach the noisy
    # targets within the first few epochs for any ensemble size, otherwise
    # checkpoint selection on the validation draw rolls fits back toward the
    # smooth early phase and undoes the variance the experiment measures
    return OptimizerSpec(
        kind="adamw",
        learning_rate=1e-1,
        weight_decay=1e-2,
        batch_size=128,
        max_epochs=150,
        patience=150,
        stopping_role="held_out",
    )


@dataclass
class FcnFit:
    net: Sequential
    x_mean: float
    x_std: float
    hidden: tuple[int, ...]
    seed: int


def fcn_fit(
    x: np.ndarray,
    y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    seed: int,
    hidden: tuple[int, ...] = (64, 32),
    optimizer: Optional[OptimizerSpec] = None,
) -> FcnFit:
    """Train the scalar fully connected emulator with checkpoint-best stopping."""
    optimizer = optimizer or default_fcn_optimizer()
    x = np.asarray(x, float)
    x_mean = float(x.mean())
    x_std = float(x.std()) or 1.0
    xn = ((x - x_mean) / x_std)[:, None]
    vn = ((np.asarray(val_x, float) - x_mean) / x_std)[:, None]
    net = fcn_network(n_inputs=1, hidden=hidden, n_outputs=1)
    net.initialize(seeds.derive_seed(seed, seeds.WEIGHT_INIT))
    train(net, optimizer, xn, np.asarray(y, float)[:, None], vn,
          np.asarray(val_y, float)[:, None], seed=seed)
    return FcnFit(net=net, x_mean=x_mean, x_std=x_std, hidden=tuple(hidden), seed=seed)


def fcn_predict(fit: FcnFit, x: np.ndarray) -> np.ndarray:
    xn = ((np.asarray(x, float) - fit.x_mean) / fit.x_std)[:, None]
    return fit.net.forward(xn, training=False)[:, 0]


# ---------------------------------------------------------------------------
# CNN-LSTM gridded emulator


def default_cnnlstm_optimizer() -> OptimizerSpec:
    return OptimizerSpec(
        kind="rmsprop",
        learning_rate=1e-3,
        weight_decay=0.0,
        batch_size=16,
        max_epochs=150,
        patience=150,
        stopping_role="held_out",
    )


@dataclass
class CnnLstmConfig:
    channels: tuple[str, ...] = (DEFAULT_INPUT_CHANNEL, "emission_rate")
    history: int = 10
    filters: int = 20
    lstm_hidden: int = 25
    padding: str = "valid"
    held_out_fraction: float = 0.1
    optimizer: OptimizerSpec = field(default_factory=default_cnnlstm_optimizer)


def _channel_grids(
    inputs: ScenarioInputs, channels: tuple[str, ...], n_lat: int, n_lon: int,
    norm: Optional[dict[str, tuple[float, float]]] = None,
) -> np.ndarray:
    """Stack channels as [year, channel, lat, lon]; global scalars broadcast."""
    grids = []
    for name in channels:
        ch = inputs.channel(name)
        vals = ch.values
        if norm is not None:
            mean, std = norm[name]
            vals = (vals - mean) / std
        if ch.is_global:
            grid = np.broadcast_to(vals[:, None, None], (len(vals), n_lat, n_lon))
        else:
            if vals.shape[1:] != (n_lat, n_lon):
                raise ValueError(f"channel {name} grid {vals.shape[1:]} != ({n_lat}, {n_lon})")
            grid = vals
        grids.append(grid)
    return np.stack(grids, axis=1)


def _windows(fields: np.ndarray, history: int, prepend: Optional[np.ndarray] = None) -> np.ndarray:
    """[year, C, I, J] -> [year, history, C, I, J] trailing windows.

    The earliest years are left-padded by repeating the first available year,
    unless ``prepend`` supplies preceding fields (e.g. a historical scenario
    leading into an SSP).
    """
    if prepend is not None:
        full = np.concatenate([prepend, fields], axis=0)
        offset = prepend.shape[0]
    else:
        full = fields
        offset = 0
    n_years = fields.shape[0]
    out = np.empty((n_years, history, *fields.shape[1:]))
    for t in range(n_years):
        end = offset + t + 1
        start = end - history
        if start >= 0:
            out[t] = full[start:end]
        else:
            pad = np.repeat(full[:1], -start, axis=0)
            out[t] = np.concatenate([pad, full[:end]], axis=0)
    return out


@dataclass
class CnnLstmFit:
    net: Sequential
    config: CnnLstmConfig
    norm: dict[str, tuple[float, float]]
    n_lat: int
    n_lon: int
    weight_seed: int
    best_epoch: int
    train_losses: list[float] = field(repr=False, default_factory=list)
    stop_losses: list[float] = field(repr=False, default_factory=list)


def cnnlstm_fit(
    inputs: dict[str, ScenarioInputs],
    targets: dict[str, np.ndarray],
    seed: int,
    config: Optional[CnnLstmConfig] = None,
    history_sources: Optional[dict[str, str]] = None,
    stop_inputs: Optional[ScenarioInputs] = None,
    stop_targets: Optional[np.ndarray] = None,
) -> CnnLstmFit:
    """Train the CNN-LSTM on pooled (scenario, year) samples.

    The stopping set follows ``config.optimizer.stopping_role``: "held_out"
    withholds a deterministic fraction of the training samples, "train" stops
    on the training samples themselves, and "test" uses the provided
    ``stop_inputs``/``stop_targets`` (the protocol-compatibility mode).
    """
    config = config or CnnLstmConfig()
    scenarios = sorted(targets)
    first = np.asarray(targets[scenarios[0]])
    n_lat, n_lon = first.shape[1], first.shape[2]

    # zero-mean unit-variance per channel across all training samples
    norm = {}
    for name in config.channels:
        vals = np.concatenate([inputs[s].channel(name).values.ravel() for s in scenarios])
        std = float(vals.std())
        norm[name] = (float(vals.mean()), std if std > 0 else 1.0)

    xs, ys = [], []
    for scen in scenarios:
        target = np.asarray(targets[scen], dtype=np.float64)
        if target.shape[1:] != (n_lat, n_lon):
            raise ValueError(f"scenario {scen}: target grid {target.shape[1:]} != ({n_lat}, {n_lon})")
        fields = _channel_grids(inputs[scen], config.channels, n_lat, n_lon, norm)
        prepend = None
        if history_sources and scen in history_sources:
            src = history_sources[scen]
            prepend = _channel_grids(inputs[src], config.channels, n_lat, n_lon, norm)
        xs.append(_windows(fields, config.history, prepend))
        ys.append(target.reshape(target.shape[0], -1))
    x_all = np.concatenate(xs, axis=0)
    y_all = np.concatenate(ys, axis=0)

    role = config.optimizer.stopping_role
    if role == "held_out":
        n = len(x_all)
        n_stop = max(1, int(round(config.held_out_fraction * n)))
        perm = seeds.rng_for(seed, seeds.HELD_OUT_SPLIT).permutation(n)
        stop_idx, train_idx = perm[:n_stop], perm[n_stop:]
        train_x, train_y = x_all[train_idx], y_all[train_idx]
        stop_x, stop_y = x_all[stop_idx], y_all[stop_idx]
    elif role == "train":
        train_x, train_y = x_all, y_all
        stop_x, stop_y = x_all, y_all
    elif role == "test":
        if stop_inputs is None or stop_targets is None:
            raise ValueError("stopping_role='test' requires stop_inputs and stop_targets")
        fields = _channel_grids(stop_inputs, config.channels, n_lat, n_lon, norm)
        train_x, train_y = x_all, y_all
        stop_x = _windows(fields, config.history)
        stop_y = np.asarray(stop_targets, dtype=np.float64).reshape(len(fields), -1)
    else:
        raise ValueError(f"unknown stopping role {role!r}")

    net = cnnlstm_network(
        n_channels=len(config.channels), n_lat=n_lat, n_lon=n_lon,
        filters=config.filters, lstm_hidden=config.lstm_hidden, padding=config.padding,
    )
    net.initialize(seeds.derive_seed(seed, seeds.WEIGHT_INIT))
    result = train(net, config.optimizer, train_x, train_y, stop_x, stop_y, seed=seed)
    return CnnLstmFit(
        net=net, config=config, norm=norm, n_lat=n_lat, n_lon=n_lon,
        weight_seed=seed, best_epoch=result.best_epoch,
        train_losses=result.train_losses, stop_losses=result.stop_losses,
    )


def cnnlstm_predict(
    fit: CnnLstmFit, inputs: ScenarioInputs, history_inputs: Optional[ScenarioInputs] = None
) -> np.ndarray:
    """Predicted [year, lat, lon] fields for one scenario."""
    cfg = fit.config
    fields = _channel_grids(inputs, cfg.channels, fit.n_lat, fit.n_lon, fit.norm)
    prepend = None
    if history_inputs is not None:
        prepend = _channel_grids(history_inputs, cfg.channels, fit.n_lat, fit.n_lon, fit.norm)
    windows = _windows(fields, cfg.history, prepend)
    preds = []
    for start in range(0, len(windows), 64):
        preds.append(fit.net.forward(windows[start : start + 64], training=False))
    return np.concatenate(preds, axis=0).reshape(len(windows), fit.n_lat, fit.n_lon)


# ---------------------------------------------------------------------------
# persistence (nnkit parameter-payload conventions)


def save_lps(path, fit: LpsFit) -> None:
    """Store the local maps as a flat f64 payload plus a JSON spec."""
    from .nnkit.arch import save_net

    class _Maps:
        def state_dict(self):
            return {"w_local": fit.w_local, "b_local": fit.b_local}

    save_net(path, _Maps(), meta={
        "technique": "lps", "w_global": fit.w_global, "b_global": fit.b_global,
        "input_channel": fit.input_channel,
    })


def load_lps(path) -> LpsFit:
    import json
    from pathlib import Path

    import numpy as _np

    root = Path(path)
    with open(root / "params.json") as fh:
        spec = json.load(fh)
    payload = _np.frombuffer((root / "params.f64").read_bytes(), dtype="<f8")
    arrays = {}
    offset = 0
    for entry in spec["entries"]:
        size = int(_np.prod(entry["shape"]))
        arrays[entry["name"]] = payload[offset : offset + size].reshape(entry["shape"]).copy()
        offset += size
    meta = spec["meta"]
    return LpsFit(
        w_global=meta["w_global"], b_global=meta["b_global"],
        w_local=arrays["w_local"], b_local=arrays["b_local"],
        input_channel=meta["input_channel"],
    )


def save_cnnlstm(path, fit: CnnLstmFit) -> None:
    from .nnkit.arch import save_net

    cfg = fit.config
    save_net(path, fit.net, meta={
        "technique": "cnnlstm",
        "channels": list(cfg.channels),
        "history": cfg.history,
        "filters": cfg.filters,
        "lstm_hidden": cfg.lstm_hidden,
        "padding": cfg.padding,
        "n_lat": fit.n_lat,
        "n_lon": fit.n_lon,
        "norm": {k: list(v) for k, v in fit.norm.items()},
        "weight_seed": fit.weight_seed,
    })


def load_cnnlstm(path) -> CnnLstmFit:
    import json
    from pathlib import Path

    from .nnkit.arch import load_net

    with open(Path(path) / "params.json") as fh:
        meta = json.load(fh)["meta"]
    net = cnnlstm_network(
        n_channels=len(meta["channels"]), n_lat=meta["n_lat"], n_lon=meta["n_lon"],
        filters=meta["filters"], lstm_hidden=meta["lstm_hidden"], padding=meta["padding"],
    )
    load_net(path, net)
    config = CnnLstmConfig(
        channels=tuple(meta["channels"]), history=meta["history"],
        filters=meta["filters"], lstm_hidden=meta["lstm_hidden"], padding=meta["padding"],
    )
    return CnnLstmFit(
        net=net, config=config,
        norm={k: (v[0], v[1]) for k, v in meta["norm"].items()},
        n_lat=meta["n_lat"], n_lon=meta["n_lon"],
        weight_seed=meta["weight_seed"], best_epoch=-1,
    )


# ---------------------------------------------------------------------------
# provenance record shared by the sweep harnesses


@dataclass
class EmulatorFitRecord:
    """A trained emulator plus the provenance that determines its predictions."""

    technique: str                      # "lps", "cnnlstm", "fcn", "linear1d"
    fit: object
    subset_n: Optional[int] = None
    subset_k: Optional[int] = None
    weight_seed: Optional[int] = None
    metadata: dict = field(default_factory=dict)
