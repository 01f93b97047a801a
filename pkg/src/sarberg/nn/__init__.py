"""Minimal CNN framework: layers, Adam, plateau scheduling, training loops."""

from .layers import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2,
    PadTo,
    Relu,
    Sigmoid,
    Upsample2,
)
from .network import (
    Network,
    build_autoencoder,
    build_classifier,
    load_network,
    save_network,
    transfer_encoder,
)
from .optim import Adam, AdamState, PlateauScheduler, adam_step
from .training import (
    History,
    TrainConfig,
    accuracy,
    fit,
    fit_autoencoder,
    gradient_check,
    input_tensor,
    loss_logloss,
    loss_mse,
    prepare_inputs,
    write_history_csv,
)

__all__ = [
    "Adam",
    "AdamState",
    "Conv2d",
    "Dense",
    "Dropout",
    "Flatten",
    "History",
    "Layer",
    "MaxPool2",
    "Network",
    "PadTo",
    "PlateauScheduler",
    "Relu",
    "Sigmoid",
    "TrainConfig",
    "Upsample2",
    "accuracy",
    "adam_step",
    "build_autoencoder",
    "build_classifier",
    "fit",
    "fit_autoencoder",
    "gradient_check",
    "input_tensor",
    "load_network",
    "loss_logloss",
    "loss_mse",
    "prepare_inputs",
    "save_network",
    "transfer_encoder",
    "write_history_csv",
]
