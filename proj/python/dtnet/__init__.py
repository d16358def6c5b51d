"""Deep-thinking recurrent networks with test-time iteration selection."""

from ._core import (
    DeepThinkNet,
    conv2d,
    gaussian_corrupt,
    pearson,
    rotate90,
    select_t_opt,
    sigma_for_severity,
    synth_dataset,
)

__all__ = [
    "DeepThinkNet",
    "conv2d",
    "gaussian_corrupt",
    "pearson",
    "rotate90",
    "select_t_opt",
    "sigma_for_severity",
    "synth_dataset",
]
