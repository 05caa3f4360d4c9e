"""Stochastic single-column energy balance model with a quadratic response.

The model integrates a noisy local energy budget forced by a prescribed curve
of cumulative greenhouse-gas emissions:

    dT = (r / C) * X(t) * dt  +  (lam / C) * T * dt  +  sigma * dW

where C = rho_w * c_w * h is the column heat capacity and dW is a Wiener
increment (variance dt). A hypothetical nonlinear climate variable is read
off the temperature trajectory through y = g_scale * (g_gain * T)**2.

Units: temperatures in K, emissions in GtX, time in years. The radiative
terms carry W m^-2 while C is in J m^-2 K^-1, so the deterministic tendency
is converted with SECONDS_PER_YEAR; the noise amplitude sigma is specified
directly in K yr^-1/2 and needs no conversion.

Ensemble-mean training targets average the response of n independent
realizations. Member seeds derive from a counter-based mix of
(base_seed, n, k, m), so sweeps are reproducible and order-independent; see
:mod:`emubench.seeds`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import seeds

SECONDS_PER_YEAR = 365.25 * 86400.0


@dataclass
class EbmConfig:
    """Parameters of the emission curve, the energy budget, and the response."""

    x_peak: float = 5000.0      # peak cumulative emissions, GtX
    t_peak: float = 250.0       # year of the emission peak
    sigma_x: float = 50.0       # emission-curve width, yr
    r: float = 0.0008           # radiative forcing per cumulative emissions, W m^-2 GtX^-1
    rho_w: float = 997.0        # water density, kg m^-3
    c_w: float = 4184.0         # specific heat of water, W s kg^-1 K^-1
    h: float = 150.0            # effective column depth, m
    lam: float = -2.0           # feedback parameter, W m^-2 K^-1 (must be < 0)
    sigma: float = 0.25         # noise amplitude, K yr^-1/2
    dt: float = 1.0             # timestep, yr
    t0: float = 0.0             # start year
    t_max: float = 250.0        # end year (exclusive)
    t_init: float = 0.0         # initial temperature, K
    g_scale: float = 0.03       # response coefficient
    g_gain: float = 4.0         # response inner gain
    emissions: Optional[np.ndarray] = field(default=None, repr=False)
    # optional per-step cumulative-emission override (length n_steps);
    # when None the Gaussian pulse defined by (x_peak, t_peak, sigma_x) is used

    @property
    def heat_capacity(self) -> float:
        """Column heat capacity C = rho_w * c_w * h, J m^-2 K^-1."""
        return self.rho_w * self.c_w * self.h

    @property
    def n_steps(self) -> int:
        return int(round((self.t_max - self.t0) / self.dt))

    def times(self) -> np.ndarray:
        """Time grid t0, t0+dt, ..., t_max-dt. Integer dtype when integral."""
        t = self.t0 + self.dt * np.arange(self.n_steps)
        if float(self.dt).is_integer() and float(self.t0).is_integer():
            return t.astype(np.int64)
        return t

    def validate(self) -> None:
        if not self.lam < 0:
            raise ValueError(f"feedback parameter must be negative, got {self.lam}")
        if self.heat_capacity <= 0:
            raise ValueError("heat capacity rho_w*c_w*h must be positive")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_max <= self.t0:
            raise ValueError(f"t_max ({self.t_max}) must exceed t0 ({self.t0})")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.sigma_x <= 0:
            raise ValueError(f"sigma_x must be positive, got {self.sigma_x}")
        if self.emissions is not None and len(self.emissions) != self.n_steps:
            raise ValueError(
                f"emission override has length {len(self.emissions)}, "
                f"expected {self.n_steps}"
            )


@dataclass
class EbmRealization:
    """One trajectory of the column model: temperature and its response."""

    temperature: np.ndarray   # T_t, K
    response: np.ndarray      # y_t = g(T_t)
    years: np.ndarray
    seed: Optional[int] = None  # None for the deterministic forced signal

    def __post_init__(self) -> None:
        if not (len(self.temperature) == len(self.response) == len(self.years)):
            raise ValueError("temperature, response, and years must have equal length")


def emission_at(cfg: EbmConfig, t: float) -> float:
    """Cumulative emissions (GtX) of the Gaussian pulse at year ``t``."""
    if not (cfg.t0 <= t < cfg.t_max):
        raise ValueError(f"t={t} outside simulated range [{cfg.t0}, {cfg.t_max})")
    return float(cfg.x_peak * np.exp(-((t - cfg.t_peak) ** 2) / (2.0 * cfg.sigma_x**2)))


def emission_series(cfg: EbmConfig) -> np.ndarray:
    """Per-step cumulative emissions: the override if set, else the pulse."""
    if cfg.emissions is not None:
        return np.asarray(cfg.emissions, dtype=np.float64)
    t = np.asarray(cfg.times(), dtype=np.float64)
    return cfg.x_peak * np.exp(-((t - cfg.t_peak) ** 2) / (2.0 * cfg.sigma_x**2))


def response_g(cfg: EbmConfig, temp):
    """Quadratic response g(T) = g_scale * (g_gain * T)**2."""
    temp = np.asarray(temp, dtype=np.float64)
    out = cfg.g_scale * (cfg.g_gain * temp) ** 2
    return float(out) if out.ndim == 0 else out


def _integrate(cfg: EbmConfig, noise: Optional[np.ndarray]) -> np.ndarray:
    """Explicit-Euler integration of the energy budget.

    ``noise`` holds standard-normal draws of shape (n_series, n_steps - 1),
    one per integration step, or None for the noise-free signal. Returns
    temperatures of shape (n_series, n_steps); rows are bit-reproducible
    independent of how many series are integrated together.
    """
    cfg.validate()
    n = cfg.n_steps
    x = emission_series(cfg)
    dt_s = cfg.dt * SECONDS_PER_YEAR
    forcing = (cfg.r / cfg.heat_capacity) * x * dt_s          # K per step
    feedback = 1.0 + (cfg.lam / cfg.heat_capacity) * dt_s     # decay factor per step
    if noise is None:
        n_series = 1
        scaled_noise = None
    else:
        n_series = noise.shape[0]
        scaled_noise = cfg.sigma * np.sqrt(cfg.dt) * noise
    temp = np.empty((n_series, n), dtype=np.float64)
    temp[:, 0] = cfg.t_init
    for s in range(1, n):
        step = temp[:, s - 1] * feedback + forcing[s]
        if scaled_noise is not None:
            step = step + scaled_noise[:, s - 1]
        temp[:, s] = step
    return temp


def simulate_realization(cfg: EbmConfig, seed: int) -> EbmRealization:
    """One noisy trajectory. Identical (cfg, seed) gives bit-identical output."""
    rng = seeds.rng_from_token(seed)
    noise = rng.standard_normal((1, cfg.n_steps - 1))
    temp = _integrate(cfg, noise)[0]
    return EbmRealization(
        temperature=temp, response=response_g(cfg, temp), years=cfg.times(), seed=seed
    )


def forced_signal(cfg: EbmConfig) -> EbmRealization:
    """The noise-free emission-forced trajectory (the sigma*dW term omitted)."""
    temp = _integrate(cfg, None)[0]
    return EbmRealization(
        temperature=temp, response=response_g(cfg, temp), years=cfg.times(), seed=None
    )


def member_seed(
    base_seed: int, n: int, k: int, m: int, replacement: bool = True, pool_size: int = 50
) -> int:
    """Trajectory seed for member ``m`` of draw ``k`` at ensemble size ``n``.

    With replacement every (n, k, m) triple gets its own stream, i.e. the
    realization pool is unbounded. Without replacement the m-th slot maps to
    one of ``pool_size`` fixed member streams, selected without duplicates by
    a draw-specific selection stream, mirroring a finite stored ensemble.
    """
    if replacement:
        return seeds.derive_seed(base_seed, seeds.DRAWN_MEMBER, n, k, m)
    ids = pool_member_ids(base_seed, n, k, pool_size)
    return pool_seed(base_seed, int(ids[m - 1]))


def pool_seed(base_seed: int, member_id: int) -> int:
    """Trajectory seed of fixed-pool member ``member_id`` (1-based)."""
    return seeds.derive_seed(base_seed, seeds.POOL_MEMBER, member_id)


def pool_member_ids(base_seed: int, n: int, k: int, pool_size: int) -> np.ndarray:
    """Member ids {1..pool_size} drawn without replacement for draw (n, k)."""
    if n > pool_size:
        raise ValueError(f"cannot draw {n} members without replacement from {pool_size}")
    rng = seeds.rng_for(base_seed, seeds.SUBSET_DRAW, n, k)
    return np.sort(rng.choice(pool_size, size=n, replace=False) + 1)


def ensemble_mean_training_set(
    cfg: EbmConfig,
    n: int,
    k: int,
    base_seed: int,
    replacement: bool = True,
    pool_size: int = 50,
) -> np.ndarray:
    """Mean response over n member realizations for draw index k.

    Seeds derive deterministically from (base_seed, n, k, m). With
    replacement the seed pool is unbounded so statistics stay reliable for
    large n; without replacement members come from a fixed pool of
    ``pool_size`` streams shared across draws.
    """
    if n < 1:
        raise ValueError(f"ensemble size must be >= 1, got {n}")
    cfg.validate()
    if replacement:
        tokens = [member_seed(base_seed, n, k, m, replacement=True) for m in range(1, n + 1)]
    else:
        ids = pool_member_ids(base_seed, n, k, pool_size)
        tokens = [pool_seed(base_seed, int(i)) for i in ids]
    noise = np.stack(
        [seeds.rng_from_token(t).standard_normal(cfg.n_steps - 1) for t in tokens]
    )
    temp = _integrate(cfg, noise)
    return response_g(cfg, temp).mean(axis=0)


def export_csv(path, cfg: EbmConfig, realization: EbmRealization) -> None:
    """Write a trajectory as CSV with columns t, X_t, T_t, y_t."""
    x = emission_series(cfg)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "X_t", "T_t", "y_t"])
        for t, xv, tv, yv in zip(
            realization.years, x, realization.temperature, realization.response
        ):
            writer.writerow([t, repr(float(xv)), repr(float(tv)), repr(float(yv))])
