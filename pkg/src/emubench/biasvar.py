"""Monte-Carlo bias-variance experiment on the scalar stochastic model.

For every ensemble size n, K independent n-member training sets are drawn
(with replacement from an unbounded realization pool), a linear fit and the
fully connected net are trained on each, and all fits are evaluated against
the noise-free forced signal. The expected squared error splits exactly into
a bias-squared and a variance term when both use the same empirical mean
over the K fits; the harness also records mean-fit curves, pointwise
variance bands, and the expected Fourier spectra of the signal-removed fits.

Conventions fixed here: the decomposition window defaults to the mean over
the final 21 steps (a full-series per-step average is available); the DFT is
the unnormalized two-sided forward transform with energy |.|^2, so a pure
cosine of amplitude a concentrates (a*T/2)^2 in each conjugate bin and
Parseval reads sum(V)/T = sum_t residual^2.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ebm, emulators, seeds
from .nnkit import OptimizerSpec

EOC_WINDOW = 21


@dataclass
class BvConfig:
    """Grid, draw count, window, and training settings for one run."""

    ebm: ebm.EbmConfig = field(default_factory=ebm.EbmConfig)
    n_grid: tuple[int, ...] = (1, 2, 3, 5, 10, 20, 50)
    n_draws: int = 2000
    window: str = "eoc21"              # "eoc21" or "full"
    techniques: tuple[str, ...] = ("linear1d", "fcn")
    base_seed: int = 1850
    fcn_hidden: tuple[int, ...] = (64, 32)
    fcn_optimizer: Optional[OptimizerSpec] = None

    def validate(self) -> None:
        self.ebm.validate()
        if self.n_draws < 2:
            raise ValueError("need at least 2 draws for a variance estimate")
        if self.window not in ("eoc21", "full"):
            raise ValueError(f"unknown window {self.window!r}")
        if self.window == "eoc21" and self.ebm.n_steps < EOC_WINDOW:
            raise ValueError("series shorter than the end-of-century window")
        for t in self.techniques:
            if t not in ("linear1d", "fcn"):
                raise ValueError(f"unknown technique {t!r}")
        if any(n < 1 for n in self.n_grid):
            raise ValueError("ensemble sizes must be >= 1")


def decompose(fit_values: np.ndarray, forced_value: float) -> tuple[float, float, float]:
    """(bias^2, variance, mse) of K window-averaged fits against the truth.

    All three use the same empirical mean over fits, so
    mse = bias^2 + variance holds to round-off.
    """
    fits = np.asarray(fit_values, dtype=np.float64)
    if fits.ndim != 1 or fits.size < 2:
        raise ValueError("need a 1-D array of at least 2 fit values")
    center = fits.mean()
    bias2 = float((forced_value - center) ** 2)
    var = float(((fits - center) ** 2).mean())
    mse = float(((fits - forced_value) ** 2).mean())
    return bias2, var, mse


def decompose_series(fits: np.ndarray, forced: np.ndarray) -> tuple[float, float, float]:
    """Per-step decomposition averaged over all steps (full-series window)."""
    fits = np.asarray(fits, dtype=np.float64)
    forced = np.asarray(forced, dtype=np.float64)
    if fits.ndim != 2 or fits.shape[0] < 2 or fits.shape[1] != forced.shape[0]:
        raise ValueError("fits must be (K, T) matching the forced series")
    center = fits.mean(axis=0)
    bias2 = float(((forced - center) ** 2).mean())
    var = float(((fits - center) ** 2).mean())
    mse = float(((fits - forced) ** 2).mean())
    return bias2, var, mse


def window_average(series: np.ndarray, window: str) -> np.ndarray:
    """Reduce trailing time axis: mean of the last 21 steps, or identity."""
    series = np.asarray(series, dtype=np.float64)
    if window == "eoc21":
        return series[..., -EOC_WINDOW:].mean(axis=-1)
    if window == "full":
        return series
    raise ValueError(f"unknown window {window!r}")


def fourier_spectrum(fits: np.ndarray, forced: np.ndarray, dt: float = 1.0):
    """Expected two-sided energy spectrum of (fit - forced) over K fits.

    Returns (frequencies, energy), both of length T, in FFT bin order.
    """
    fits = np.atleast_2d(np.asarray(fits, dtype=np.float64))
    forced = np.asarray(forced, dtype=np.float64)
    if fits.shape[1] != forced.shape[0]:
        raise ValueError(
            f"fits have {fits.shape[1]} steps, forced signal has {forced.shape[0]}"
        )
    resid = fits - forced
    energy = np.abs(np.fft.fft(resid, axis=1)) ** 2
    return np.fft.fftfreq(forced.shape[0], d=dt), energy.mean(axis=0)


@dataclass
class BvCell:
    """Aggregates for one (technique, n) pair."""

    technique: str
    n: int
    bias2: float
    var: float
    mse: float
    mean_fit: np.ndarray
    var_fit: np.ndarray
    frequencies: np.ndarray
    spectrum: np.ndarray


@dataclass
class BvResult:
    config: BvConfig
    forced: np.ndarray
    cells: list[BvCell]

    def cell(self, technique: str, n: int) -> BvCell:
        for c in self.cells:
            if c.technique == technique and c.n == n:
                return c
        raise KeyError(f"no cell for ({technique}, {n})")


_TASK_CFG: Optional[BvConfig] = None
_TASK_X: Optional[np.ndarray] = None


def _fit_one(args: tuple[int, int]) -> tuple[int, int, dict[str, np.ndarray]]:
    """Train every technique on draw (n, k); returns full-series predictions."""
    n, k = args
    cfg = _TASK_CFG
    x = _TASK_X
    # even/odd draw indices keep training and validation sets independent
    train_y = ebm.ensemble_mean_training_set(cfg.ebm, n, 2 * k, cfg.base_seed)
    val_y = ebm.ensemble_mean_training_set(cfg.ebm, n, 2 * k + 1, cfg.base_seed)
    preds = {}
    for technique in cfg.techniques:
        if technique == "linear1d":
            fit = emulators.linear1d_fit(x, train_y)
            preds[technique] = emulators.linear1d_predict(fit, x)
        else:
            fit = emulators.fcn_fit(
                x, train_y, x, val_y,
                seed=seeds.derive_seed(cfg.base_seed, seeds.FIT, n, k),
                hidden=cfg.fcn_hidden,
                optimizer=cfg.fcn_optimizer,
            )
            preds[technique] = emulators.fcn_predict(fit, x)
    return n, k, preds


def _init_worker(cfg: BvConfig, x: np.ndarray) -> None:
    global _TASK_CFG, _TASK_X
    _TASK_CFG = cfg
    _TASK_X = x


def run_biasvar(cfg: BvConfig, workers: int = 1) -> BvResult:
    """Run the full Monte-Carlo experiment; deterministic for any worker count."""
    cfg.validate()
    x = ebm.emission_series(cfg.ebm)
    forced = ebm.forced_signal(cfg.ebm).response
    tasks = [(n, k) for n in cfg.n_grid for k in range(cfg.n_draws)]
    _init_worker(cfg, x)
    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(cfg, x)
        ) as pool:
            results = list(pool.map(_fit_one, tasks, chunksize=8))
    else:
        results = [_fit_one(t) for t in tasks]
    by_key = {(n, k): preds for n, k, preds in results}
    cells = []
    for technique in cfg.techniques:
        for n in cfg.n_grid:
            fits = np.stack([by_key[(n, k)][technique] for k in range(cfg.n_draws)])
            if cfg.window == "eoc21":
                bias2, var, mse = decompose(
                    window_average(fits, "eoc21"), float(window_average(forced, "eoc21"))
                )
            else:
                bias2, var, mse = decompose_series(fits, forced)
            freqs, spectrum = fourier_spectrum(fits, forced, dt=cfg.ebm.dt)
            cells.append(
                BvCell(
                    technique=technique, n=n, bias2=bias2, var=var, mse=mse,
                    mean_fit=fits.mean(axis=0), var_fit=fits.var(axis=0),
                    frequencies=freqs, spectrum=spectrum,
                )
            )
    return BvResult(config=cfg, forced=forced, cells=cells)


def write_biasvar_csv(path, result: BvResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["technique", "n", "bias2", "var", "mse"])
        for c in result.cells:
            writer.writerow([c.technique, c.n, repr(c.bias2), repr(c.var), repr(c.mse)])


def write_spectra_csv(path, result: BvResult) -> None:
    """Nonnegative-frequency bins as (technique, n, period, energy) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["technique", "n", "period", "energy"])
        for c in result.cells:
            for freq, energy in zip(c.frequencies, c.spectrum):
                if freq < 0:
                    continue
                period = np.inf if freq == 0 else 1.0 / freq
                writer.writerow([c.technique, c.n, repr(float(period)), repr(float(energy))])


def write_fitbands_csv(path, result: BvResult) -> None:
    """Mean-fit curve and pointwise std band per (technique, n)."""
    times = np.asarray(result.config.ebm.times(), dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["technique", "n", "t", "mean_fit", "std_fit", "forced"])
        for c in result.cells:
            std = np.sqrt(c.var_fit)
            for i, t in enumerate(times):
                writer.writerow([
                    c.technique, c.n, repr(float(t)), repr(float(c.mean_fit[i])),
                    repr(float(std[i])), repr(float(result.forced[i])),
                ])
