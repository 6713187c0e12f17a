"""Solar cell surface defect inspection: CNN and classical baselines."""

from ._core import (
    Model,
    class_names,
    conv2d,
    gabor_features,
    hog_features,
    lbp_features,
    maxpool2d,
    prf,
    relu,
    roc,
    slide_positions,
    softmax,
    stratified_kfold,
    synth_dataset,
)

__all__ = [
    "Model",
    "class_names",
    "conv2d",
    "gabor_features",
    "hog_features",
    "lbp_features",
    "maxpool2d",
    "prf",
    "relu",
    "roc",
    "slide_positions",
    "softmax",
    "stratified_kfold",
    "synth_dataset",
]
