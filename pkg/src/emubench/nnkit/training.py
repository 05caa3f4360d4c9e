"""Optimizers and the minibatch training loop with best-checkpoint stopping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import seeds
from .layers import Sequential


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class OptimizerSpec:
    """Optimizer and stopping configuration for one training run."""

    kind: str = "adamw"                  # "adamw" or "rmsprop"
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 16
    max_epochs: int = 150
    patience: int = 150                  # epochs without improvement before stopping
    cosine_decay: bool = False
    stopping_role: str = "held_out"      # {"train", "held_out", "test"}; caller wires the set
    rmsprop_rho: float = 0.9
    rmsprop_eps: float = 1e-7
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.kind not in ("adamw", "rmsprop"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")


class _RMSprop:
    def __init__(self, spec: OptimizerSpec, params: dict[str, np.ndarray]):
        self.spec = spec
        self.sq = {k: np.zeros_like(p) for k, p in params.items()}

    def step(self, params, grads, lr):
        rho, eps = self.spec.rmsprop_rho, self.spec.rmsprop_eps
        for k, p in params.items():
            g = grads[k]
            self.sq[k] = rho * self.sq[k] + (1 - rho) * g * g
            p -= lr * g / (np.sqrt(self.sq[k]) + eps)
            if self.spec.weight_decay:
                p -= lr * self.spec.weight_decay * p


class _AdamW:
    def __init__(self, spec: OptimizerSpec, params: dict[str, np.ndarray]):
        self.spec = spec
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        b1, b2, eps = self.spec.adam_beta1, self.spec.adam_beta2, self.spec.adam_eps
        self.t += 1
        bc1 = 1 - b1**self.t
        bc2 = 1 - b2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            p -= lr * (mhat / (np.sqrt(vhat) + eps) + self.spec.weight_decay * p)


def make_optimizer(spec: OptimizerSpec, params: dict[str, np.ndarray]):
    spec.validate()
    return _AdamW(spec, params) if spec.kind == "adamw" else _RMSprop(spec, params)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Per-element mean squared error and its gradient wrt the prediction."""
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / diff.size) * diff


def evaluate_mse(net: Sequential, x: np.ndarray, y: np.ndarray, batch_size: int = 256) -> float:
    total, count = 0.0, 0
    for start in range(0, len(x), batch_size):
        pred = net.forward(x[start : start + batch_size], training=False)
        diff = pred - y[start : start + batch_size]
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


@dataclass
class TrainResult:
    net: Sequential
    train_losses: list[float] = field(default_factory=list)
    stop_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_stop_loss: float = np.inf
    epochs_run: int = 0


def train(
    net: Sequential,
    spec: OptimizerSpec,
    train_x: np.ndarray,
    train_y: np.ndarray,
    stop_x: np.ndarray,
    stop_y: np.ndarray,
    seed: int,
) -> TrainResult:
    """Minibatch MSE training; returns the checkpoint with best stopping MSE.

    The batch order is a deterministic function of ``seed`` and the epoch
    index, so identical calls produce bit-identical parameters.
    """
    spec.validate()
    if len(train_x) == 0 or len(stop_x) == 0:
        raise ValueError("training and stopping sets must be non-empty")
    params = net.params()
    grads = net.grads()
    opt = make_optimizer(spec, params)
    result = TrainResult(net=net)
    best_state = net.state_dict()
    steps_per_epoch = max(1, int(np.ceil(len(train_x) / spec.batch_size)))
    total_steps = spec.max_epochs * steps_per_epoch
    step = 0
    since_best = 0
    for epoch in range(spec.max_epochs):
        order = seeds.rng_for(seed, seeds.TRAIN_SHUFFLE, epoch).permutation(len(train_x))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), spec.batch_size):
            idx = order[start : start + spec.batch_size]
            pred = net.forward(train_x[idx], training=True)
            loss, dloss = mse_loss(pred, train_y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            net.zero_grads()
            net.backward(dloss)
            lr = spec.learning_rate
            if spec.cosine_decay:
                lr = lr * 0.5 * (1.0 + np.cos(np.pi * step / total_steps))
            opt.step(params, grads, lr)
            epoch_loss += loss
            n_batches += 1
            step += 1
        result.train_losses.append(epoch_loss / n_batches)
        stop_loss = evaluate_mse(net, stop_x, stop_y)
        if not np.isfinite(stop_loss):
            raise TrainingDivergedError(epoch)
        result.stop_losses.append(stop_loss)
        result.epochs_run = epoch + 1
        if stop_loss < result.best_stop_loss:
            result.best_stop_loss = stop_loss
            result.best_epoch = epoch
            best_state = net.state_dict()
            since_best = 0
        else:
            since_best += 1
            if since_best >= spec.patience:
                break
    net.load_state_dict(best_state)
    return result
