"""Frequency-domain neural network for single-image super-resolution.

The network works on Hartley coefficients: learned entrywise weighting,
small learned convolutions over the frequency grid, and an additive output
layer predicting the residual between a bicubic upscale and the ground truth.
"""

from .estimator import HartleySR, HartleyTransform
from .hartley import dht2, dht2_oracle, fourier_parts, hartley_conv_check, idht2
from .imaging import (bicubic_resize, make_pair, psnr, rgb_to_y, ssim, super_resolve,
                      super_resolve_tiled)
from .io import ModelFile, ModelFormatError, load_model, save_model
from .network import (ForwardTrace, NetworkArch, NetworkParams, ParamGradients,
                      additive_backward, additive_forward, backward, forward, init_params,
                      layer_forward, smoothing_backward, smoothing_forward, weighting_backward,
                      weighting_forward)
from .training import (LossKind, TrainingConfig, TrainingDivergenceError, TrainingSample,
                       loss_and_grad, residual_compose, sgd_step, train)

__version__ = "0.1.0"

__all__ = [
    "HartleySR", "HartleyTransform",
    "dht2", "idht2", "dht2_oracle", "fourier_parts", "hartley_conv_check",
    "bicubic_resize", "make_pair", "psnr", "rgb_to_y", "ssim", "super_resolve",
    "super_resolve_tiled",
    "ModelFile", "ModelFormatError", "load_model", "save_model",
    "ForwardTrace", "NetworkArch", "NetworkParams", "ParamGradients",
    "additive_forward", "backward", "forward", "init_params", "layer_forward",
    "smoothing_forward", "weighting_forward", "additive_backward", "smoothing_backward",
    "weighting_backward",
    "LossKind", "TrainingConfig", "TrainingDivergenceError", "TrainingSample",
    "loss_and_grad", "residual_compose", "sgd_step", "train",
]
