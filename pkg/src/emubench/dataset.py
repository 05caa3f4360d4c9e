"""Gridded multi-member climate data: in-memory model and GED v1 storage.

A ``GriddedEnsemble`` holds one variable of one scenario as a
[member, year, lat, lon] float64 array; ``ScenarioInputs`` holds the
per-year forcing channels (global scalars and/or gridded maps) of the same
scenario. GED v1 is the portable on-disk form: a directory containing
``manifest.json`` plus one raw little-endian float64 payload per array in
[member][year][lat][lon] (or [year][lat][lon]) row-major order.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import seeds

GED_SCHEMA_VERSION = 1
TARGET_PAYLOAD = "target.f64"


class GedFormatError(ValueError):
    """Raised when a GED directory is missing, corrupt, or inconsistent."""


@dataclass
class GriddedEnsemble:
    """[member, year, lat, lon] values of one climate variable, one scenario."""

    values: np.ndarray
    variable: str
    units: str
    scenario: str
    years: np.ndarray
    lats: np.ndarray
    lons: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.years = np.asarray(self.years, dtype=np.int64)
        self.lats = np.asarray(self.lats, dtype=np.float64)
        self.lons = np.asarray(self.lons, dtype=np.float64)
        expected = (self.values.shape[0], len(self.years), len(self.lats), len(self.lons))
        if self.values.ndim != 4 or self.values.shape != expected:
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"(members, {len(self.years)} years, {len(self.lats)} lats, "
                f"{len(self.lons)} lons)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("ensemble contains non-finite values")
        dlat = np.diff(self.lats)
        if len(self.lats) > 1 and not (np.all(dlat > 0) or np.all(dlat < 0)):
            raise ValueError("latitudes must be strictly monotone")
        if len(self.years) > 1 and not np.all(np.diff(self.years) == 1):
            raise ValueError("years must be contiguous")

    @property
    def n_members(self) -> int:
        return self.values.shape[0]

    def year_slice(self, years: np.ndarray) -> np.ndarray:
        """Index array selecting the given calendar years."""
        years = np.asarray(years)
        idx = np.searchsorted(self.years, years)
        if np.any(idx >= len(self.years)) or np.any(self.years[idx] != years):
            raise ValueError("requested years outside the ensemble's range")
        return idx


@dataclass
class ForcingChannel:
    """One named forcing series: global scalar [year] or gridded [year, lat, lon]."""

    name: str
    units: str
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim not in (1, 3):
            raise ValueError(f"channel {self.name}: expected 1-D or 3-D, got {self.values.ndim}-D")

    @property
    def is_global(self) -> bool:
        return self.values.ndim == 1


@dataclass
class ScenarioInputs:
    """Per-scenario forcing channels sharing one year range."""

    scenario: str
    years: np.ndarray
    channels: dict[str, ForcingChannel] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.years = np.asarray(self.years, dtype=np.int64)
        for ch in self.channels.values():
            if ch.values.shape[0] != len(self.years):
                raise ValueError(
                    f"channel {ch.name} covers {ch.values.shape[0]} years, "
                    f"scenario has {len(self.years)}"
                )

    def channel(self, name: str) -> ForcingChannel:
        if name not in self.channels:
            raise KeyError(f"scenario {self.scenario} has no channel {name!r}")
        return self.channels[name]


@dataclass
class SplitSpec:
    """Train scenarios, test scenario, and the evaluation-year window."""

    train_scenarios: tuple[str, ...]
    test_scenario: str
    test_years: np.ndarray

    def __post_init__(self) -> None:
        self.train_scenarios = tuple(self.train_scenarios)
        self.test_years = np.asarray(self.test_years, dtype=np.int64)
        if self.test_scenario in self.train_scenarios:
            raise ValueError(f"test scenario {self.test_scenario} also appears in training set")


@dataclass
class SubsetDraw:
    """The k-th random subset of n ensemble members (1-based ids)."""

    n: int
    k: int
    member_ids: np.ndarray

    def __post_init__(self) -> None:
        self.member_ids = np.asarray(self.member_ids, dtype=np.int64)
        if len(self.member_ids) != self.n:
            raise ValueError(f"subset holds {len(self.member_ids)} ids, expected n={self.n}")
        if len(np.unique(self.member_ids)) != self.n:
            raise ValueError("duplicate member ids in a without-replacement subset")


def compute_anomalies(raw: GriddedEnsemble, climatology: np.ndarray) -> GriddedEnsemble:
    """Subtract a [lat, lon] control climatology from every member and year."""
    climatology = np.asarray(climatology, dtype=np.float64)
    if climatology.shape != raw.values.shape[2:]:
        raise ValueError(
            f"climatology grid {climatology.shape} does not match {raw.values.shape[2:]}"
        )
    return GriddedEnsemble(
        values=raw.values - climatology,
        variable=raw.variable,
        units=raw.units,
        scenario=raw.scenario,
        years=raw.years,
        lats=raw.lats,
        lons=raw.lons,
    )


def ensemble_mean(ens: GriddedEnsemble, subset: Optional[SubsetDraw] = None) -> np.ndarray:
    """Mean over the subset's members (all members when subset is None)."""
    if subset is None:
        return ens.values.mean(axis=0)
    ids = subset.member_ids
    if np.any(ids < 1) or np.any(ids > ens.n_members):
        raise IndexError(f"member ids {ids} outside 1..{ens.n_members}")
    return ens.values[ids - 1].mean(axis=0)


def draw_subsets(N: int, n: int, K: int, base_seed: int) -> list[SubsetDraw]:
    """K uniform n-subsets of {1..N} without replacement, seeded per draw."""
    if not 1 <= n <= N:
        raise ValueError(f"subset size {n} outside 1..{N}")
    draws = []
    for k in range(K):
        rng = seeds.rng_for(base_seed, seeds.SUBSET_DRAW, n, k)
        ids = np.sort(rng.choice(N, size=n, replace=False) + 1)
        draws.append(SubsetDraw(n=n, k=k, member_ids=ids))
    return draws


def _payload_name(kind: str, name: str) -> str:
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
    return f"{kind}__{safe}.f64"


def _write_payload(path: Path, arr: np.ndarray) -> str:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def _read_payload(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape)) * 8
    if not path.exists():
        raise GedFormatError(f"missing payload {path.name}")
    data = path.read_bytes()
    if len(data) != expected:
        raise GedFormatError(
            f"payload {path.name} holds {len(data)} bytes, manifest requires {expected}"
        )
    arr = np.frombuffer(data, dtype="<f8").reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise GedFormatError(f"payload {path.name} contains non-finite values")
    return arr.copy()


def save_ged(path, ens: GriddedEnsemble, inputs: Optional[ScenarioInputs] = None) -> None:
    """Write a GED v1 directory: manifest.json + raw float64 payloads."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    checksums = {}
    checksums[TARGET_PAYLOAD] = _write_payload(root / TARGET_PAYLOAD, ens.values)
    channels = []
    if inputs is not None:
        if not np.array_equal(inputs.years, ens.years):
            raise ValueError("inputs and target must share the scenario's year range")
        for ch in inputs.channels.values():
            if not ch.is_global and ch.values.shape[1:] != (len(ens.lats), len(ens.lons)):
                raise ValueError(f"gridded channel {ch.name} does not match the target grid")
            fname = _payload_name("channel", ch.name)
            checksums[fname] = _write_payload(root / fname, ch.values)
            channels.append(
                {"name": ch.name, "units": ch.units, "kind": "global" if ch.is_global else "gridded",
                 "payload": fname}
            )
    manifest = {
        "schema_version": GED_SCHEMA_VERSION,
        "variable": ens.variable,
        "units": ens.units,
        "scenario": ens.scenario,
        "years": [int(y) for y in ens.years],
        "lats": [float(v) for v in ens.lats],
        "lons": [float(v) for v in ens.lons],
        "n_members": int(ens.n_members),
        "byte_order": "little-endian",
        "dtype": "f64",
        "target_payload": TARGET_PAYLOAD,
        "channels": channels,
        "sha256": checksums,
    }
    with open(root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    root = Path(path)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise GedFormatError(f"{root} has no manifest.json")
    with open(mpath) as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != GED_SCHEMA_VERSION:
        raise GedFormatError(
            f"unsupported GED schema version {manifest.get('schema_version')!r}"
        )
    return manifest


def load_ged(path) -> tuple[GriddedEnsemble, ScenarioInputs]:
    """Read a GED v1 directory back into memory; bit-exact round trip."""
    root = Path(path)
    manifest = read_manifest(root)
    years = np.asarray(manifest["years"], dtype=np.int64)
    lats = np.asarray(manifest["lats"], dtype=np.float64)
    lons = np.asarray(manifest["lons"], dtype=np.float64)
    shape = (manifest["n_members"], len(years), len(lats), len(lons))
    values = _read_payload(root / manifest["target_payload"], shape)
    ens = GriddedEnsemble(
        values=values,
        variable=manifest["variable"],
        units=manifest["units"],
        scenario=manifest["scenario"],
        years=years,
        lats=lats,
        lons=lons,
    )
    channels = {}
    for ch in manifest["channels"]:
        if ch["kind"] == "global":
            cshape: tuple[int, ...] = (len(years),)
        else:
            cshape = (len(years), len(lats), len(lons))
        channels[ch["name"]] = ForcingChannel(
            name=ch["name"], units=ch["units"], values=_read_payload(root / ch["payload"], cshape)
        )
    inputs = ScenarioInputs(scenario=manifest["scenario"], years=years, channels=channels)
    return ens, inputs


@dataclass
class ScenarioSet:
    """All scenarios of one variable: ensembles, inputs, forced signal, split."""

    variable: str
    ensembles: dict[str, GriddedEnsemble]
    inputs: dict[str, ScenarioInputs]
    split: SplitSpec
    forced: dict[str, GriddedEnsemble] = field(default_factory=dict)

    @property
    def n_members(self) -> int:
        return next(iter(self.ensembles.values())).n_members

    @property
    def lats(self) -> np.ndarray:
        return next(iter(self.ensembles.values())).lats

    def train_targets(self, subset: Optional[SubsetDraw] = None) -> dict[str, np.ndarray]:
        return {s: ensemble_mean(self.ensembles[s], subset) for s in self.split.train_scenarios}

    def train_inputs(self) -> dict[str, ScenarioInputs]:
        return {s: self.inputs[s] for s in self.split.train_scenarios}

    def test_target_mean(self) -> np.ndarray:
        """Full-ensemble mean of the test scenario over the evaluation years."""
        ens = self.ensembles[self.split.test_scenario]
        return ensemble_mean(ens)[ens.year_slice(self.split.test_years)]


def save_scenario_set(root, sets: list[ScenarioSet], extra_index: Optional[dict] = None) -> None:
    """Write one or more single-variable scenario sets under a dataset root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if not sets:
        raise ValueError("need at least one scenario set")
    split = sets[0].split
    index = {
        "schema_version": GED_SCHEMA_VERSION,
        "variables": [s.variable for s in sets],
        "scenarios": sorted(sets[0].ensembles),
        "train_scenarios": list(split.train_scenarios),
        "test_scenario": split.test_scenario,
        "test_years": [int(y) for y in split.test_years],
        "n_members": sets[0].n_members,
    }
    if extra_index:
        index.update(extra_index)
    for sset in sets:
        for scen, ens in sset.ensembles.items():
            save_ged(root / sset.variable / scen, ens, sset.inputs[scen])
        for scen, ens in sset.forced.items():
            save_ged(root / f"{sset.variable}__forced" / scen, ens)
    with open(root / "index.json", "w") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_index(root) -> dict:
    path = Path(root) / "index.json"
    if not path.exists():
        raise GedFormatError(f"{root} has no index.json")
    with open(path) as fh:
        index = json.load(fh)
    if index.get("schema_version") != GED_SCHEMA_VERSION:
        raise GedFormatError(f"unsupported dataset schema version {index.get('schema_version')!r}")
    return index


def load_scenario_set(root, variable: str) -> ScenarioSet:
    """Load one variable's scenarios (and forced signal, if stored)."""
    root = Path(root)
    index = read_index(root)
    if variable not in index["variables"]:
        raise GedFormatError(f"dataset has no variable {variable!r} (has {index['variables']})")
    ensembles, inputs, forced = {}, {}, {}
    for scen in index["scenarios"]:
        ens, inp = load_ged(root / variable / scen)
        ensembles[scen] = ens
        inputs[scen] = inp
        forced_dir = root / f"{variable}__forced" / scen
        if forced_dir.exists():
            forced[scen], _ = load_ged(forced_dir)
    split = SplitSpec(
        train_scenarios=tuple(index["train_scenarios"]),
        test_scenario=index["test_scenario"],
        test_years=np.asarray(index["test_years"], dtype=np.int64),
    )
    return ScenarioSet(variable=variable, ensembles=ensembles, inputs=inputs,
                       split=split, forced=forced)


def checksum_report(path) -> dict[str, dict[str, str]]:
    """Recorded vs recomputed sha256 of every payload in a GED directory."""
    root = Path(path)
    manifest = read_manifest(root)
    report = {}
    for fname, recorded in manifest.get("sha256", {}).items():
        fpath = root / fname
        actual = hashlib.sha256(fpath.read_bytes()).hexdigest() if fpath.exists() else "MISSING"
        report[fname] = {"recorded": recorded, "actual": actual}
    return report
