"""The four figure kinds and their structural self-reports.

Kinds:
  iv-sweep  error-over-realizations: mean curves with std bands on a log x
            axis, plus a score-difference subpanel when two techniques are
            present (CSV: technique,metric,n,k,l_or_mean,value)
  biasvar   per-technique MSE (solid), bias^2 (diamond-dashed), and variance
            (star-dashed) over ensemble size (CSV: technique,n,bias2,var,mse)
  spectra   expected residual energy over signal period, one line per
            (technique, n) (CSV: technique,n,period,energy)
  maps      target / prediction / error panels from two GED directories

Rendering is deterministic given the inputs: fixed style, no timestamps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ged import load_target

KINDS = ("iv-sweep", "biasvar", "spectra", "maps")

TECH_COLORS = {"lps": "tab:orange", "linear1d": "tab:orange",
               "cnnlstm": "tab:blue", "fcn": "tab:blue"}


class FigureDataError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    out: str
    metric: str = "rmse_spatial"
    log_x: bool = True

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise FigureDataError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise FigureDataError("at least one input path is required")


@dataclass
class FigureReport:
    """Structural summary used by the self-test: what each panel contains."""

    kind: str
    out: str
    panels: list[dict] = field(default_factory=list)

    @property
    def n_series(self) -> int:
        return sum(p.get("lines", 0) + p.get("images", 0) for p in self.panels)


def _read_csv(path, required: set[str]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FigureDataError(f"input {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FigureDataError(f"{path} is empty")
        missing = required - set(reader.fieldnames)
        if missing:
            raise FigureDataError(f"{path} lacks columns {sorted(missing)}")
        rows = list(reader)
    if not rows:
        raise FigureDataError(f"{path} has a header but no data rows")
    return rows


def _report(fig, kind, out) -> FigureReport:
    panels = []
    for ax in fig.axes:
        panels.append({
            "lines": len(ax.get_lines()),
            "bands": len(ax.collections),
            "images": len(ax.get_images()),
            "title": ax.get_title(),
        })
    return FigureReport(kind=kind, out=str(out), panels=panels)


def _seed_averaged(rows, metric):
    """CSV rows -> {technique: {(n, k): mean over weight seeds}}."""
    acc: dict[str, dict[tuple[int, int], list[float]]] = {}
    for r in rows:
        if r["metric"] != metric:
            continue
        tech = r["technique"]
        key = (int(r["n"]), int(r["k"]))
        acc.setdefault(tech, {}).setdefault(key, []).append(float(r["value"]))
    return {
        tech: {key: float(np.mean(vals)) for key, vals in by_nk.items()}
        for tech, by_nk in acc.items()
    }


def _per_n(by_nk):
    out: dict[int, list[float]] = {}
    for (n, _), v in by_nk.items():
        out.setdefault(n, []).append(v)
    ns = np.array(sorted(out))
    mean = np.array([np.mean(out[n]) for n in ns])
    std = np.array([np.std(out[n]) for n in ns])
    return ns, mean, std


def _render_iv_sweep(spec: FigureSpec):
    rows = []
    for path in spec.inputs:
        rows.extend(_read_csv(path, {"technique", "metric", "n", "k", "l_or_mean", "value"}))
    data = _seed_averaged(rows, spec.metric)
    if not data:
        raise FigureDataError(f"no rows with metric {spec.metric!r}")
    techniques = sorted(data)
    two = len(techniques) == 2
    fig, axes = plt.subplots(
        2 if two else 1, 1, figsize=(7, 7 if two else 4), sharex=True, squeeze=False
    )
    top = axes[0][0]
    for tech in techniques:
        ns, mean, std = _per_n(data[tech])
        color = TECH_COLORS.get(tech)
        top.plot(ns, mean, label=tech, color=color)
        top.fill_between(ns, mean - std, mean + std, alpha=0.25, color=color)
    top.set_ylabel(spec.metric)
    top.set_title("error over realizations in training set")
    top.legend()
    if spec.log_x:
        top.set_xscale("log")
    if two:
        a, b = techniques  # alphabetical: cnnlstm - lps, fcn - linear1d
        bottom = axes[1][0]
        keys = sorted(set(data[a]) & set(data[b]))
        if not keys:
            raise FigureDataError("techniques share no (n, k) cells")
        deltas = {key: data[a][key] - data[b][key] for key in keys}
        bottom.plot([k[0] for k in keys], [deltas[k] for k in keys],
                    linestyle="none", marker=".", color="tab:green", alpha=0.6)
        ns, mean, std = _per_n(deltas)
        bottom.plot(ns, mean, color="black")
        bottom.fill_between(ns, mean - std, mean + std, alpha=0.25, color="gray")
        bottom.axhline(0.0, color="black", linewidth=0.6)
        bottom.set_xlabel("realizations in training set")
        bottom.set_ylabel(f"delta {spec.metric} ({a} - {b})")
    else:
        top.set_xlabel("realizations in training set")
    return fig


def _render_biasvar(spec: FigureSpec):
    rows = _read_csv(spec.inputs[0], {"technique", "n", "bias2", "var", "mse"})
    techniques = sorted({r["technique"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for tech in techniques:
        recs = sorted((int(r["n"]), r) for r in rows if r["technique"] == tech)
        ns = np.array([n for n, _ in recs])
        color = TECH_COLORS.get(tech)
        ax.plot(ns, [float(r["mse"]) for _, r in recs], "-", color=color,
                linewidth=2.5, alpha=0.8, label=f"{tech} mse")
        ax.plot(ns, [float(r["bias2"]) for _, r in recs], "--", marker="D",
                markersize=4, color=color, label=f"{tech} bias$^2$")
        ax.plot(ns, [float(r["var"]) for _, r in recs], "--", marker="*",
                markersize=7, color=color, label=f"{tech} variance")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("realizations per training set")
    ax.set_ylabel("expected error")
    ax.set_title("bias-variance decomposition")
    ax.legend(fontsize=8)
    return fig


def _render_spectra(spec: FigureSpec):
    rows = _read_csv(spec.inputs[0], {"technique", "n", "period", "energy"})
    groups: dict[tuple[str, int], list[tuple[float, float]]] = {}
    for r in rows:
        period = float(r["period"])
        if not math.isfinite(period):
            continue
        groups.setdefault((r["technique"], int(r["n"])), []).append(
            (period, float(r["energy"]))
        )
    if not groups:
        raise FigureDataError("no finite-period rows in spectra CSV")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (tech, n), pts in sorted(groups.items()):
        pts.sort()
        ax.plot([p for p, _ in pts], [e for _, e in pts], label=f"{tech} n={n}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("signal period")
    ax.set_ylabel("expected energy of signal-removed fits")
    ax.set_title("residual Fourier spectra")
    ax.legend(fontsize=8)
    return fig


def _render_maps(spec: FigureSpec):
    if len(spec.inputs) != 2:
        raise FigureDataError("maps needs exactly two inputs: prediction GED, target GED")
    pred_vals, pred_manifest = load_target(spec.inputs[0])
    target_vals, target_manifest = load_target(spec.inputs[1])
    if pred_vals.shape[2:] != target_vals.shape[2:]:
        raise FigureDataError("prediction and target grids differ")
    window = min(21, pred_vals.shape[1], target_vals.shape[1])
    pred = pred_vals.mean(axis=0)[-window:].mean(axis=0)
    target = target_vals.mean(axis=0)[-window:].mean(axis=0)
    error = pred - target
    lats = np.asarray(target_manifest["lats"], dtype=float)
    lons = np.asarray(target_manifest["lons"], dtype=float)
    extent = (lons.min(), lons.max(), lats.min(), lats.max())
    vmax = max(abs(float(target.max())), abs(float(target.min())),
               abs(float(pred.max())), abs(float(pred.min()))) or 1.0
    emax = float(np.abs(error).max()) or 1.0
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    panels = [
        (f"target ({target_manifest['variable']}, last {window}-yr mean)", target, "viridis", -vmax, vmax),
        ("prediction", pred, "viridis", -vmax, vmax),
        ("prediction - target", error, "RdBu_r", -emax, emax),
    ]
    for ax, (title, fld, cmap, vmin, vmax_) in zip(axes, panels):
        im = ax.imshow(fld, origin="lower", extent=extent, aspect="auto",
                       cmap=cmap, vmin=vmin, vmax=vmax_)
        ax.set_title(title, fontsize=9)
        fig.colorbar(im, ax=ax, shrink=0.85)
    return fig


_RENDERERS = {
    "iv-sweep": _render_iv_sweep,
    "biasvar": _render_biasvar,
    "spectra": _render_spectra,
    "maps": _render_maps,
}


def render(spec: FigureSpec) -> FigureReport:
    """Render one figure; raises before writing anything on bad input."""
    spec.validate()
    fig = _RENDERERS[spec.kind](spec)
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, dpi=120, metadata={"Software": "emubench-fig"})
        report = _report(fig, spec.kind, out)
    finally:
        plt.close(fig)
    return report
