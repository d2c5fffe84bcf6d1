"""Pyramid non-local enhanced networks: python bindings to the C++ core."""

from ._core import (
    ApnbBlock,
    ConfigError,
    DataError,
    NlbBlock,
    NumericError,
    PnbBlock,
    PnenModel,
    apply_filter,
    config_help,
    conv2d,
    count_costs,
    psnr,
    relu,
    softmax_rows,
    ssim,
    synth_textures,
    train,
)

__all__ = [
    "ApnbBlock",
    "ConfigError",
    "DataError",
    "NlbBlock",
    "NumericError",
    "PnbBlock",
    "PnenModel",
    "apply_filter",
    "config_help",
    "conv2d",
    "count_costs",
    "psnr",
    "relu",
    "softmax_rows",
    "ssim",
    "synth_textures",
    "train",
]

__version__ = "0.1.0"
