"""Forward noising, the training objective, and ancestral sampling."""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError
from .ops import mse_loss
from .optim import AdamState, EmaShadow, adam_step, ema_update, zero_grads
from .schedule import NoiseSchedule
from .tensor import Tensor, backward, no_grad
from .unet import UNet


def forward_sample(x0: np.ndarray, t, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.

    ``t`` is a single timestep or one per leading batch element.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise DimensionError(f"forward_sample: x0 {x0.shape} vs eps {eps.shape}")
    sched.check_t(t)
    t = np.asarray(t)
    if t.ndim == 0:
        a = sched.sqrt_alpha_bar[int(t)]
        b = sched.sqrt_one_minus_alpha_bar[int(t)]
        return a * x0 + b * eps
    if t.shape != (x0.shape[0],):
        raise DimensionError(
            f"forward_sample: {t.size} timesteps for batch of {x0.shape[0]}")
    extra = (1,) * (x0.ndim - 1)
    a = sched.sqrt_alpha_bar[t].reshape(-1, *extra)
    b = sched.sqrt_one_minus_alpha_bar[t].reshape(-1, *extra)
    return a * x0 + b * eps


def train_step(model: UNet, x0: np.ndarray, sched: NoiseSchedule,
               opt: AdamState, ema: EmaShadow, rng: np.random.Generator) -> float:
    """One optimization step on a batch of clean images in [-1, 1].

    Draws one timestep per element uniformly from {1..T} and one standard
    normal noise field, minimizes the noise-prediction MSE, then applies the
    Adam update and refreshes the EMA shadow. Returns the scalar loss.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 4 or x0.shape[1] != model.cfg.in_channels:
        raise ContractError(
            f"train_step: batch {x0.shape} does not match model channels {model.cfg.in_channels}")
    t = rng.integers(1, sched.timesteps + 1, size=x0.shape[0])
    eps = rng.standard_normal(x0.shape)
    x_t = forward_sample(x0, t, eps, sched)

    zero_grads(model.params)
    pred = model.forward(Tensor(x_t), t)
    loss = mse_loss(pred, Tensor(eps))
    backward(loss)
    adam_step(model.params, opt)
    ema_update(ema, model.params)
    return loss.item()


def reverse_sample(model: UNet, sched: NoiseSchedule, n: int,
                   rng: np.random.Generator, image_hw: int = 28) -> np.ndarray:
    """Ancestral sampling from pure noise down to t = 1, clamped to [-1, 1].

    x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t)
              + sqrt(beta_t) * z,   z = 0 at t = 1.
    """
    if n < 1:
        raise ContractError(f"reverse_sample: n must be >= 1, got {n}")
    c = model.cfg.in_channels
    x = rng.standard_normal((n, c, image_hw, image_hw))
    with no_grad():
        for t in range(sched.timesteps, 0, -1):
            eps_hat = model.forward(Tensor(x), t).data
            coef = sched.beta[t] / sched.sqrt_one_minus_alpha_bar[t]
            x = (x - coef * eps_hat) / np.sqrt(sched.alpha[t])
            if t > 1:
                x = x + np.sqrt(sched.beta[t]) * rng.standard_normal(x.shape)
    return np.clip(x, -1.0, 1.0)
