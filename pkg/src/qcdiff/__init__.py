"""qcdiff: a self-contained hybrid quantum-classical diffusion engine.

Trains and compares a classical DDPM and a quantum-attention-enhanced DDPM
on 28x28 image datasets: cosine noise schedule, small U-Net denoiser with a
16-qubit variational bottleneck, EMA sampling, SSIM and Frechet-style
evaluation. Built on numpy with its own reverse-mode tape and exact
statevector simulation; no ML framework dependencies.
"""

from .config import RunConfig
from .data import ImageBatch, filter_class, load_idx, load_npz, normalize, write_png_grid
from .diffusion import forward_sample, reverse_sample, train_step
from .metrics import FeatureExtractor, GaussianStats, fid_like, frechet_distance, set_ssim, ssim
from .optim import AdamState, EmaShadow, adam_step, ema_update
from .quantum import CircuitConfig, StateVector, parameter_shift_grad, quantum_attention_forward, run_circuit
from .schedule import NoiseSchedule, build_cosine_schedule
from .tensor import Tensor, backward, no_grad
from .unet import UNet, UNetConfig, init_params, timestep_embedding, unet_forward

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CircuitConfig",
    "EmaShadow",
    "FeatureExtractor",
    "GaussianStats",
    "ImageBatch",
    "NoiseSchedule",
    "RunConfig",
    "StateVector",
    "Tensor",
    "UNet",
    "UNetConfig",
    "adam_step",
    "backward",
    "build_cosine_schedule",
    "ema_update",
    "fid_like",
    "filter_class",
    "forward_sample",
    "frechet_distance",
    "init_params",
    "load_idx",
    "load_npz",
    "no_grad",
    "normalize",
    "parameter_shift_grad",
    "quantum_attention_forward",
    "reverse_sample",
    "run_circuit",
    "set_ssim",
    "ssim",
    "timestep_embedding",
    "train_step",
    "unet_forward",
    "write_png_grid",
]
