"""Reference architectures and parameter serialization.

Two networks are used by the emulators: a small fully connected regressor
(64/32 hidden units, batch norm + ReLU after each hidden layer) for scalar
emulation, and a CNN-LSTM for gridded emulation (a shared 3x3 convolution
with 20 filters applied per history year, average + global-average pooling,
an LSTM with 25 ReLU-activated units over the 10-year window, and one dense
output layer holding ~95% of the weights).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .layers import (
    AvgPool2D,
    BatchNorm,
    Conv2D,
    Dense,
    GlobalAvgPool,
    Lstm,
    ReLU,
    Sequential,
    TimeDistributed,
)


def fcn_network(n_inputs: int = 1, hidden: tuple[int, ...] = (64, 32), n_outputs: int = 1) -> Sequential:
    """Fully connected net: Dense -> BatchNorm -> ReLU per hidden layer."""
    layers = []
    width = n_inputs
    for h in hidden:
        layers += [Dense(width, h), BatchNorm(h), ReLU()]
        width = h
    layers.append(Dense(width, n_outputs))
    return Sequential(layers)


def cnnlstm_network(
    n_channels: int,
    n_lat: int,
    n_lon: int,
    filters: int = 20,
    lstm_hidden: int = 25,
    padding: str = "valid",
) -> Sequential:
    """CNN-LSTM over (B, T, C, I, J) windows predicting the (B, I*J) target year."""
    return Sequential(
        [
            TimeDistributed(Conv2D(n_channels, filters, padding=padding)),
            TimeDistributed(ReLU()),
            TimeDistributed(AvgPool2D()),
            TimeDistributed(GlobalAvgPool()),
            Lstm(filters, lstm_hidden, activation="relu"),
            Dense(lstm_hidden, n_lat * n_lon),
        ]
    )


def fcn_param_count(n_inputs: int = 1, hidden: tuple[int, ...] = (64, 32), n_outputs: int = 1) -> int:
    count, width = 0, n_inputs
    for h in hidden:
        count += width * h + h     # dense
        count += 2 * h             # batch-norm affine
        width = h
    return count + width * n_outputs + n_outputs


def cnnlstm_param_count(n_channels: int, n_lat: int, n_lon: int,
                        filters: int = 20, lstm_hidden: int = 25) -> int:
    conv = filters * n_channels * 9 + filters
    lstm = 4 * (filters * lstm_hidden + lstm_hidden * lstm_hidden + lstm_hidden)
    dense = lstm_hidden * n_lat * n_lon + n_lat * n_lon
    return conv + lstm + dense


def save_net(path, net: Sequential, meta: dict | None = None) -> None:
    """Flat little-endian float64 payload plus a JSON spec of entry shapes."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    for name, arr in net.state_dict().items():
        entries.append({"name": name, "shape": list(arr.shape)})
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").ravel())
    payload = np.concatenate(chunks) if chunks else np.zeros(0)
    (root / "params.f64").write_bytes(payload.tobytes())
    spec = {"entries": entries, "dtype": "f64", "byte_order": "little-endian"}
    if meta:
        spec["meta"] = meta
    with open(root / "params.json", "w") as fh:
        json.dump(spec, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_net(path, net: Sequential) -> dict:
    """Load a parameter payload into an architecture-compatible network."""
    root = Path(path)
    with open(root / "params.json") as fh:
        spec = json.load(fh)
    payload = np.frombuffer((root / "params.f64").read_bytes(), dtype="<f8")
    state = {}
    offset = 0
    for entry in spec["entries"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        state[entry["name"]] = payload[offset : offset + size].reshape(entry["shape"])
        offset += size
    if offset != payload.size:
        raise ValueError(f"payload holds {payload.size} values, spec expects {offset}")
    net.load_state_dict(state)
    return spec.get("meta", {})
