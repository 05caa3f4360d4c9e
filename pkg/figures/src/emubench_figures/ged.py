"""Minimal reader for GED v1 directories (manifest.json + raw f64 payloads)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class GedReadError(ValueError):
    pass


def load_target(path):
    """Return (values[member, year, lat, lon], manifest) for one GED directory."""
    root = Path(path)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise GedReadError(f"{root} has no manifest.json")
    with open(mpath) as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != 1:
        raise GedReadError(f"unsupported GED schema {manifest.get('schema_version')!r}")
    shape = (
        manifest["n_members"],
        len(manifest["years"]),
        len(manifest["lats"]),
        len(manifest["lons"]),
    )
    payload = root / manifest["target_payload"]
    data = payload.read_bytes()
    if len(data) != int(np.prod(shape)) * 8:
        raise GedReadError(f"payload size mismatch in {payload}")
    values = np.frombuffer(data, dtype="<f8").reshape(shape)
    return values, manifest
