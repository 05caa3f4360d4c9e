"""Command-line entry point.

Subcommands: gen-data (synthetic gridded ensembles), run-iv (the
internal-variability sweep), run-biasvar (the scalar bias-variance
experiment), score (benchmark metrics between two GED datasets), validate
(GED/dataset integrity), and report (technique comparison from result CSVs).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every run writes a manifest (tool version, seed, config hash, resolved
config) next to its outputs. EMUBENCH_SEED overrides the default base seed;
an explicit --seed flag overrides both.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, biasvar, dataset, ebm, experiments, metrics, synthgrid
from .dataset import GedFormatError
from .metrics import SingularFitError
from .nnkit import OptimizerSpec, TrainingDivergedError

DEFAULT_BASE_SEED = 1850

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _resolve_seed(flag_value) -> int:
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get("EMUBENCH_SEED")
    if env is not None:
        return int(env)
    return DEFAULT_BASE_SEED


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_manifest(target_path, config: dict, seed: int) -> None:
    """Record tool version, seed, and a hash of the resolved config."""
    config = _jsonable(config)
    blob = json.dumps(config, sort_keys=True).encode()
    manifest = {
        "tool": "emubench",
        "tool_version": __version__,
        "base_seed": seed,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "config": config,
    }
    path = Path(str(target_path) + ".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="emubench", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic gridded dataset")
    gen.add_argument("--out", required=True, help="dataset root directory")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--n-lat", type=int, default=12)
    gen.add_argument("--n-lon", type=int, default=24)
    gen.add_argument("--members", type=int, default=50)
    gen.add_argument("--sigma", type=float, default=None,
                     help="override the base noise amplitude, K yr^-1/2")
    gen.add_argument("--variables", default="temp,precip",
                     help="comma-separated subset of temp,precip")

    iv = sub.add_parser("run-iv", help="internal-variability sweep for one technique")
    iv.add_argument("--dataset", required=True)
    iv.add_argument("--technique", required=True, choices=["lps", "cnnlstm"])
    iv.add_argument("--variable", default="precip")
    iv.add_argument("--profile", default="desk", choices=["desk", "paper"])
    iv.add_argument("--out", required=True, help="result CSV path")
    iv.add_argument("--seed", type=int, default=None)
    iv.add_argument("--workers", type=int, default=1)

    bv = sub.add_parser("run-biasvar", help="scalar bias-variance experiment")
    bv.add_argument("--out-dir", required=True)
    bv.add_argument("--profile", default="desk", choices=["desk", "paper"])
    bv.add_argument("--window", default="eoc21", choices=["eoc21", "full"])
    bv.add_argument("--seed", type=int, default=None)
    bv.add_argument("--workers", type=int, default=1)

    score = sub.add_parser("score", help="benchmark metrics of predictions vs targets")
    score.add_argument("--pred", required=True, help="GED directory of predictions")
    score.add_argument("--target", required=True, help="GED directory of targets")
    score.add_argument("--out", default=None, help="optional scoreboard CSV")
    score.add_argument("--technique", default="pred", help="label for the scoreboard")

    val = sub.add_parser("validate", help="check a GED directory or dataset root")
    val.add_argument("--dataset", required=True)

    rep = sub.add_parser("report", help="compare two result CSVs (a minus b)")
    rep.add_argument("--results-a", required=True, help="e.g. the cnnlstm table")
    rep.add_argument("--results-b", required=True, help="e.g. the lps table")
    rep.add_argument("--metric", default="rmse_spatial")
    rep.add_argument("--out", required=True, help="comparison CSV path")
    return parser


def cmd_gen_data(args) -> int:
    seed = _resolve_seed(args.seed)
    variables = [v.strip() for v in args.variables.split(",") if v.strip()]
    modes = {"temp": "linear", "precip": "quadratic"}
    unknown = [v for v in variables if v not in modes]
    if unknown:
        raise GedFormatError(f"unknown variables {unknown}; choose from {sorted(modes)}")
    base = ebm.EbmConfig() if args.sigma is None else ebm.EbmConfig(sigma=args.sigma)
    cfg = synthgrid.SynthGridConfig(
        n_lat=args.n_lat, n_lon=args.n_lon, n_members=args.members,
        base_seed=seed, base=base,
        response_modes={v: modes[v] for v in variables},
    )
    sets = synthgrid.generate(cfg)
    config_dump = {
        "command": "gen-data",
        "n_lat": cfg.n_lat, "n_lon": cfg.n_lon, "n_members": cfg.n_members,
        "base": asdict(cfg.base), "variables": variables,
        "scenarios": [asdict(s) for s in cfg.scenarios],
    }
    dataset.save_scenario_set(
        args.out, [sets[v] for v in variables],
        extra_index={"base_seed": seed, "generator": _jsonable(config_dump)},
    )
    write_manifest(Path(args.out) / "index.json", config_dump, seed)
    print(f"wrote dataset with variables {variables} to {args.out}")
    return EXIT_OK


def cmd_run_iv(args) -> int:
    seed = _resolve_seed(args.seed)
    sset = dataset.load_scenario_set(args.dataset, args.variable)
    profile = experiments.desk_profile if args.profile == "desk" else experiments.paper_profile
    cfg = profile(args.technique, base_seed=seed)
    table = experiments.run_iv_sweep(cfg, sset, workers=max(1, args.workers))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    experiments.write_table_csv(out, table)
    config_dump = {
        "command": "run-iv", "dataset": str(args.dataset), "variable": args.variable,
        "profile": args.profile, "technique": cfg.technique,
        "n_grid": list(cfg.n_grid), "n_draws": cfg.n_draws, "n_seeds": cfg.n_seeds,
        "optimizer": asdict(cfg.cnnlstm.optimizer),
    }
    write_manifest(out, config_dump, seed)
    for metric_name in cfg.metric_names:
        stats = table.per_n_stats(metric_name)
        lo, hi = min(stats), max(stats)
        print(f"{metric_name}: n={lo} -> {stats[lo][0]:.6g}, n={hi} -> {stats[hi][0]:.6g}")
    return EXIT_OK


def cmd_run_biasvar(args) -> int:
    seed = _resolve_seed(args.seed)
    cfg = biasvar.BvConfig(
        n_draws=200 if args.profile == "desk" else 2000,
        window=args.window,
        base_seed=seed,
    )
    result = biasvar.run_biasvar(cfg, workers=max(1, args.workers))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    biasvar.write_biasvar_csv(out_dir / "biasvar.csv", result)
    biasvar.write_spectra_csv(out_dir / "spectra.csv", result)
    biasvar.write_fitbands_csv(out_dir / "fitbands.csv", result)
    config_dump = {
        "command": "run-biasvar", "profile": args.profile, "window": cfg.window,
        "n_grid": list(cfg.n_grid), "n_draws": cfg.n_draws,
        "techniques": list(cfg.techniques), "ebm": asdict(cfg.ebm),
    }
    for name in ("biasvar.csv", "spectra.csv", "fitbands.csv"):
        write_manifest(out_dir / name, config_dump, seed)
    for cell in result.cells:
        print(f"{cell.technique} n={cell.n}: mse={cell.mse:.6g} "
              f"bias2={cell.bias2:.6g} var={cell.var:.6g}")
    return EXIT_OK


def cmd_score(args) -> int:
    pred_ens, _ = dataset.load_ged(args.pred)
    target_ens, _ = dataset.load_ged(args.target)
    if pred_ens.values.shape[2:] != target_ens.values.shape[2:]:
        raise GedFormatError("prediction and target grids differ")
    common = np.intersect1d(pred_ens.years, target_ens.years)
    if len(common) == 0:
        raise GedFormatError("prediction and target share no years")
    pred = dataset.ensemble_mean(pred_ens)[pred_ens.year_slice(common)]
    target_full = target_ens.values[:, target_ens.year_slice(common)]
    target = target_full.mean(axis=0)
    weights = metrics.lat_weights(target_ens.lats)
    rmse_s = metrics.rmse_spatial(pred, target, weights)
    rmse_g = metrics.rmse_global(pred, target, weights)
    rows = [
        (args.technique, target_ens.variable, "rmse_spatial", rmse_s),
        (args.technique, target_ens.variable, "rmse_global", rmse_g),
    ]
    normalizer = metrics.target_normalizer(target_full, weights)
    print(f"rmse_spatial = {rmse_s!r}")
    print(f"rmse_global  = {rmse_g!r}")
    if normalizer < metrics.NORMALIZER_FLOOR:
        print(f"warning: target mean magnitude {normalizer!r} below "
              f"{metrics.NORMALIZER_FLOOR}; NRMSE suppressed, RMSE reported alone")
    else:
        ns = rmse_s / normalizer
        ng = rmse_g / normalizer
        rows += [
            (args.technique, target_ens.variable, "nrmse_spatial", ns),
            (args.technique, target_ens.variable, "nrmse_global", ng),
            (args.technique, target_ens.variable, "nrmse_total", metrics.nrmse_total(ns, ng)),
        ]
        print(f"nrmse_spatial = {ns!r}")
        print(f"nrmse_global  = {ng!r}")
        print(f"nrmse_total   = {metrics.nrmse_total(ns, ng)!r}")
    if args.out:
        metrics.write_scoreboard(args.out, rows)
        write_manifest(Path(args.out), {"command": "score", "pred": args.pred,
                                        "target": args.target}, _resolve_seed(None))
    return EXIT_OK


def _validate_ged_dir(path: Path) -> None:
    manifest = dataset.read_manifest(path)
    dataset.load_ged(path)
    report = dataset.checksum_report(path)
    bad = {k: v for k, v in report.items() if v["recorded"] != v["actual"]}
    if bad:
        raise GedFormatError(f"checksum mismatch in {path}: {sorted(bad)}")
    dims = (manifest["n_members"], len(manifest["years"]),
            len(manifest["lats"]), len(manifest["lons"]))
    print(f"{path}: variable={manifest['variable']!r} scenario={manifest['scenario']!r} "
          f"dims={dims} channels={[c['name'] for c in manifest['channels']]}")
    for fname, entry in sorted(report.items()):
        print(f"  {fname}: sha256 {entry['actual'][:16]}... ok")


def cmd_validate(args) -> int:
    root = Path(args.dataset)
    if (root / "manifest.json").exists():
        _validate_ged_dir(root)
        return EXIT_OK
    index = dataset.read_index(root)
    print(f"{root}: variables={index['variables']} scenarios={index['scenarios']} "
          f"n_members={index['n_members']} test={index['test_scenario']!r}")
    for variable in index["variables"]:
        for scen in index["scenarios"]:
            _validate_ged_dir(root / variable / scen)
            forced = root / f"{variable}__forced" / scen
            if forced.exists():
                _validate_ged_dir(forced)
    return EXIT_OK


def cmd_report(args) -> int:
    table_a = experiments.read_table_csv(args.results_a)
    table_b = experiments.read_table_csv(args.results_b)
    result = experiments.compare_techniques(table_a, table_b, metric=args.metric)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    experiments.write_comparison_csv(out, result)
    write_manifest(out, {"command": "report", "metric": args.metric,
                         "results_a": args.results_a, "results_b": args.results_b,
                         "trend_range": list(result.trend_range)}, _resolve_seed(None))
    print(f"delta {args.metric} (a - b) per n:")
    for n, (mean, std) in result.per_n.items():
        print(f"  n={n:3d}: {mean:+.6g} +/- {std:.6g}")
    print(f"trend over n in {list(result.trend_range)}: "
          f"slope={result.trend_slope:+.6g}, intercept={result.trend_intercept:+.6g}")
    return EXIT_OK


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "run-iv": cmd_run_iv,
    "run-biasvar": cmd_run_biasvar,
    "score": cmd_score,
    "validate": cmd_validate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (TrainingDivergedError, SingularFitError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GedFormatError, FileNotFoundError, KeyError, ValueError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
