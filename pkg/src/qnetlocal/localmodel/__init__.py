"""Neural-network local models: ansatz, sampling control, and training."""

from __future__ import annotations

from .backends import available_backends, backend_name, get_backend
from .net import (
    LOSS_KINDS,
    HiddenSample,
    LocalModelNet,
    ResponseBlock,
    draw_hidden,
    export_strategies,
    forward_empirical,
    gradient,
    init_net,
    loss,
    strategy_csv_header,
)
from .sampling import SamplingController, bump_bias, next_sample_count
from .training import (
    IterationRecord,
    TrainConfig,
    TrainResult,
    evaluate,
    fit_local_model,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "LOSS_KINDS",
    "available_backends",
    "backend_name",
    "get_backend",
    "HiddenSample",
    "LocalModelNet",
    "ResponseBlock",
    "draw_hidden",
    "export_strategies",
    "forward_empirical",
    "gradient",
    "init_net",
    "loss",
    "strategy_csv_header",
    "SamplingController",
    "bump_bias",
    "next_sample_count",
    "IterationRecord",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "fit_local_model",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]
