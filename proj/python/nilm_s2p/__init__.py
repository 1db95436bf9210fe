"""Sequence-to-point / sequence-to-sequence energy disaggregation."""

from ._core import (
    Model,
    NilmError,
    conv1d,
    dense,
    gen_scene,
    loss_point,
    loss_seq,
    mae,
    perturb,
    sae,
    train,
)

__all__ = [
    "Model",
    "NilmError",
    "conv1d",
    "dense",
    "gen_scene",
    "loss_point",
    "loss_seq",
    "mae",
    "perturb",
    "sae",
    "train",
]
