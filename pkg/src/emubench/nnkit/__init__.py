"""Minimal float64 neural-network kernels with hand-written backprop."""

from .arch import (
    cnnlstm_network,
    cnnlstm_param_count,
    fcn_network,
    fcn_param_count,
    load_net,
    save_net,
)
from .layers import (
    AvgPool2D,
    BatchNorm,
    Conv2D,
    Dense,
    GlobalAvgPool,
    Layer,
    Lstm,
    ReLU,
    Sequential,
    TimeDistributed,
)
from .training import (
    OptimizerSpec,
    TrainingDivergedError,
    TrainResult,
    evaluate_mse,
    make_optimizer,
    mse_loss,
    train,
)

__all__ = [
    "AvgPool2D", "BatchNorm", "Conv2D", "Dense", "GlobalAvgPool", "Layer",
    "Lstm", "ReLU", "Sequential", "TimeDistributed",
    "OptimizerSpec", "TrainingDivergedError", "TrainResult",
    "evaluate_mse", "make_optimizer", "mse_loss", "train",
    "cnnlstm_network", "cnnlstm_param_count", "fcn_network", "fcn_param_count",
    "load_net", "save_net",
]
