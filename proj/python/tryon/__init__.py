"""Two-stage virtual try-on: condition generator, image generator and
discriminator rejection, backed by the C++ library."""

import torch  # noqa: F401  (loads libtorch before the extension)

from ._core import (
    Calibration,
    Config,
    Pipeline,
    config_fields,
    estimate_L,
    gate,
    p_accept,
    read_metrics,
    ssim,
    synthetic_dataset,
    train_tocg,
    train_toig,
    upsample_flow,
    warp,
)

__all__ = [
    "Calibration",
    "Config",
    "Pipeline",
    "config_fields",
    "estimate_L",
    "gate",
    "p_accept",
    "read_metrics",
    "ssim",
    "synthetic_dataset",
    "train_tocg",
    "train_toig",
    "upsample_flow",
    "warp",
]
