"""The gridded internal-variability sweep.

For every subset size n and draw k, the emulator under test is fitted on the
ensemble-mean of a random member subset (drawn without replacement from the
stored ensemble) and scored against the full-ensemble mean of the held-out
test scenario over the evaluation window. Neural-network scores are averaged
over several weight-initialization seeds before comparing techniques; the
headline diagnostic is the sign of the linear trend of the score difference
over n in [0, 20].

Work is split into independent (n, k, l) tasks that share the immutable
dataset, so the result table is identical for any worker count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import emulators, metrics, seeds
from .dataset import ScenarioSet, SubsetDraw, draw_subsets
from .emulators import CnnLstmConfig
from .metrics import lat_weights, linear_trend
from .nnkit import OptimizerSpec

LPS_FULL_GRID = tuple(range(1, 51))
NN_FULL_GRID = tuple(range(1, 16)) + (16, 20, 25, 30, 40, 50)
NN_DESK_GRID = (1, 2, 3, 5, 8, 12, 16, 20, 35, 50)
TREND_RANGE = (0.0, 20.0)


@dataclass
class IvSweepConfig:
    """Subset grid, draw/seed counts, and split for one sweep."""

    technique: str                       # "lps" or "cnnlstm"
    n_grid: tuple[int, ...]
    n_draws: int = 20                    # K subsets per n
    n_seeds: int = 20                    # L weight seeds (NN only)
    base_seed: int = 1850
    metric_names: tuple[str, ...] = ("rmse_spatial", "rmse_global")
    cnnlstm: CnnLstmConfig = field(default_factory=CnnLstmConfig)

    def validate(self, n_members: int) -> None:
        if self.technique not in ("lps", "cnnlstm"):
            raise ValueError(f"unknown technique {self.technique!r}")
        if self.n_draws < 1 or self.n_seeds < 1:
            raise ValueError("K and L must be >= 1")
        if any(n < 1 or n > n_members for n in self.n_grid):
            raise ValueError(f"subset sizes must lie in 1..{n_members}")


def paper_profile(technique: str, base_seed: int = 1850) -> IvSweepConfig:
    """The full-scale sweep: K = 20 and, for the network, L = 20 seeds."""
    if technique == "lps":
        return IvSweepConfig(technique="lps", n_grid=LPS_FULL_GRID, n_draws=20,
                             n_seeds=1, base_seed=base_seed)
    return IvSweepConfig(technique="cnnlstm", n_grid=NN_FULL_GRID, n_draws=20,
                         n_seeds=20, base_seed=base_seed)


def desk_profile(technique: str, base_seed: int = 1850) -> IvSweepConfig:
    """Minute-scale profile: K = L = 5, a coarser n grid, shorter training."""
    optimizer = OptimizerSpec(
        kind="rmsprop", learning_rate=1e-3, batch_size=32,
        max_epochs=25, patience=4, stopping_role="held_out",
    )
    if technique == "lps":
        return IvSweepConfig(technique="lps", n_grid=LPS_FULL_GRID, n_draws=5,
                             n_seeds=1, base_seed=base_seed)
    return IvSweepConfig(
        technique="cnnlstm", n_grid=NN_DESK_GRID, n_draws=5, n_seeds=5,
        base_seed=base_seed, cnnlstm=CnnLstmConfig(optimizer=optimizer),
    )


@dataclass
class ExperimentRow:
    technique: str
    metric: str
    n: int
    k: int
    l_or_mean: str   # weight-seed index for NN rows, "mean" for LPS rows
    value: float


@dataclass
class ExperimentTable:
    rows: list[ExperimentRow] = field(default_factory=list)

    def sort(self) -> None:
        self.rows.sort(key=lambda r: (r.technique, r.metric, r.n, r.k, r.l_or_mean))

    def seed_averaged(self, metric: str) -> dict[tuple[int, int], float]:
        """Mean score over weight seeds per (n, k)."""
        sums: dict[tuple[int, int], list[float]] = {}
        for r in self.rows:
            if r.metric == metric:
                sums.setdefault((r.n, r.k), []).append(r.value)
        return {key: float(np.mean(vals)) for key, vals in sums.items()}

    def per_n_stats(self, metric: str) -> dict[int, tuple[float, float]]:
        """Mean and standard deviation over draws of seed-averaged scores."""
        by_nk = self.seed_averaged(metric)
        by_n: dict[int, list[float]] = {}
        for (n, _), v in by_nk.items():
            by_n.setdefault(n, []).append(v)
        return {n: (float(np.mean(v)), float(np.std(v))) for n, v in sorted(by_n.items())}

    def n_grid(self) -> list[int]:
        return sorted({r.n for r in self.rows})


def write_table_csv(path, table: ExperimentTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["technique", "metric", "n", "k", "l_or_mean", "value"])
        for r in table.rows:
            writer.writerow([r.technique, r.metric, r.n, r.k, r.l_or_mean, repr(r.value)])


def read_table_csv(path) -> ExperimentTable:
    table = ExperimentTable()
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            table.rows.append(
                ExperimentRow(
                    technique=rec["technique"], metric=rec["metric"], n=int(rec["n"]),
                    k=int(rec["k"]), l_or_mean=rec["l_or_mean"], value=float(rec["value"]),
                )
            )
    return table


# --- task execution --------------------------------------------------------

_TASK_DATA: Optional[ScenarioSet] = None
_TASK_CFG: Optional[IvSweepConfig] = None


def _init_worker(sset: ScenarioSet, cfg: IvSweepConfig) -> None:
    global _TASK_DATA, _TASK_CFG
    _TASK_DATA = sset
    _TASK_CFG = cfg


def _score(pred_full: np.ndarray, sset: ScenarioSet) -> dict[str, float]:
    ens = sset.ensembles[sset.split.test_scenario]
    window = ens.year_slice(sset.split.test_years)
    pred = pred_full[window]
    target = sset.test_target_mean()
    weights = lat_weights(sset.lats)
    return {
        "rmse_spatial": metrics.rmse_spatial(pred, target, weights),
        "rmse_global": metrics.rmse_global(pred, target, weights),
    }


def _run_task(args: tuple[int, int, int]) -> list[ExperimentRow]:
    n, k, l = args
    sset = _TASK_DATA
    cfg = _TASK_CFG
    subset = draw_subsets(sset.n_members, n, cfg.n_draws, cfg.base_seed)[k]
    targets = sset.train_targets(subset)
    inputs = sset.train_inputs()
    test_inputs = sset.inputs[sset.split.test_scenario]
    if cfg.technique == "lps":
        fit = emulators.lps_fit(inputs, targets, sset.lats)
        pred = emulators.lps_predict(fit, test_inputs)
        label = "mean"
    else:
        seed = seeds.derive_seed(cfg.base_seed, seeds.FIT, n, k, l)
        fit = emulators.cnnlstm_fit(inputs, targets, seed=seed, config=cfg.cnnlstm)
        pred = emulators.cnnlstm_predict(fit, test_inputs)
        label = str(l)
    scores = _score(pred, sset)
    return [
        ExperimentRow(technique=cfg.technique, metric=m, n=n, k=k, l_or_mean=label,
                      value=v)
        for m, v in scores.items()
        if m in cfg.metric_names
    ]


def run_iv_sweep(
    cfg: IvSweepConfig, sset: ScenarioSet, workers: int = 1
) -> ExperimentTable:
    """Fit-and-score sweep over (n, k[, l]); rows come back in sorted order."""
    cfg.validate(sset.n_members)
    if sset.split.test_scenario not in sset.ensembles:
        raise ValueError(f"dataset lacks test scenario {sset.split.test_scenario!r}")
    n_seeds = cfg.n_seeds if cfg.technique == "cnnlstm" else 1
    tasks = [
        (n, k, l)
        for n in cfg.n_grid
        for k in range(cfg.n_draws)
        for l in range(n_seeds)
    ]
    _init_worker(sset, cfg)
    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(sset, cfg)
        ) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        chunks = [_run_task(t) for t in tasks]
    table = ExperimentTable(rows=[r for chunk in chunks for r in chunk])
    table.sort()
    return table


# --- technique comparison ---------------------------------------------------


@dataclass
class ComparisonResult:
    metric: str
    delta_rows: list[tuple[int, int, float]]          # (n, k, delta)
    per_n: dict[int, tuple[float, float]]             # n -> (mean, std)
    trend_slope: float
    trend_intercept: float
    trend_range: tuple[float, float]


def compare_techniques(
    table_a: ExperimentTable,
    table_b: ExperimentTable,
    metric: str = "rmse_spatial",
    trend_range: tuple[float, float] = TREND_RANGE,
) -> ComparisonResult:
    """Per-(n, k) score differences a - b plus the linear trend over n."""
    a = table_a.seed_averaged(metric)
    b = table_b.seed_averaged(metric)
    if not a or not b:
        raise ValueError(f"metric {metric!r} missing from one of the tables")
    if set(a) != set(b):
        raise ValueError("tables cover different (n, k) grids")
    delta_rows = [(n, k, a[(n, k)] - b[(n, k)]) for (n, k) in sorted(a)]
    per_n: dict[int, list[float]] = {}
    for n, _, d in delta_rows:
        per_n.setdefault(n, []).append(d)
    per_n_stats = {n: (float(np.mean(v)), float(np.std(v))) for n, v in sorted(per_n.items())}
    ns = np.array(sorted(per_n_stats))
    means = np.array([per_n_stats[n][0] for n in ns])
    slope, intercept = linear_trend(ns.astype(float), means, x_range=trend_range)
    return ComparisonResult(
        metric=metric, delta_rows=delta_rows, per_n=per_n_stats,
        trend_slope=slope, trend_intercept=intercept, trend_range=trend_range,
    )


def write_comparison_csv(path, result: ComparisonResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "n", "k", "delta", "n_mean", "n_std"])
        for n, k, d in result.delta_rows:
            mean, std = result.per_n[n]
            writer.writerow([result.metric, n, k, repr(d), repr(mean), repr(std)])
