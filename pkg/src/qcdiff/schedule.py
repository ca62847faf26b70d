"""Cosine noise schedule for the diffusion process.

alpha_bar(t) = cos^2(((t/T + s) / (1 + s)) * pi/2) for t = 0..T, with the
final entry pinned to exactly zero (the argument hits pi/2, whose cosine is
only zero up to rounding). Betas follow from the ratio of consecutive
alpha_bars and are clipped from above to keep the last reverse step
non-degenerate.

A ``normalize`` switch divides the whole curve by alpha_bar(0); the printed
definition above is the default, the normalized variant is the convention of
the schedule's original formulation. Both are exposed because they differ by
a factor of about 1.6e-4 at t = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

BETA_CLIP = 0.999


@dataclass(eq=False)
class NoiseSchedule:
    """Precomputed diffusion constants, indexed directly by timestep t.

    ``alpha_bar`` has T+1 entries (t = 0..T). ``beta`` and ``alpha`` also have
    T+1 entries with index 0 unused (set to 0 / 1); valid timesteps are 1..T.
    """

    timesteps: int
    s: float
    beta: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)
    normalized: bool = False

    def __post_init__(self):
        self.alpha = 1.0 - self.beta
        self.sqrt_alpha_bar = np.sqrt(self.alpha_bar)
        self.sqrt_one_minus_alpha_bar = np.sqrt(1.0 - self.alpha_bar)

    def check_t(self, t) -> None:
        t = np.asarray(t)
        if t.size == 0 or np.any(t < 1) or np.any(t > self.timesteps):
            raise ContractError(
                f"timestep {t} out of range [1, {self.timesteps}]")


def build_cosine_schedule(timesteps: int, s: float = 0.008,
                          normalize: bool = False,
                          beta_clip: float = BETA_CLIP) -> NoiseSchedule:
    """Build the cosine schedule for ``timesteps`` steps with offset ``s``."""
    if timesteps < 1:
        raise ContractError(f"timesteps must be >= 1, got {timesteps}")
    if s <= 0:
        raise ContractError(f"cosine offset s must be > 0, got {s}")
    if not (0.0 < beta_clip <= 1.0):
        raise ContractError(f"beta_clip must lie in (0, 1], got {beta_clip}")

    t = np.arange(timesteps + 1, dtype=np.float64)
    u = (t / timesteps + s) / (1.0 + s)
    alpha_bar = np.cos(u * (np.pi / 2.0)) ** 2
    alpha_bar[-1] = 0.0  # cos(pi/2)^2 rounds to ~3.7e-33; pin the exact limit
    if normalize:
        alpha_bar = alpha_bar / alpha_bar[0]

    beta = np.zeros(timesteps + 1)
    beta[1:] = 1.0 - alpha_bar[1:] / alpha_bar[:-1]
    beta[1:] = np.minimum(beta[1:], beta_clip)

    return NoiseSchedule(timesteps=timesteps, s=float(s), beta=beta,
                         alpha_bar=alpha_bar, normalized=normalize)
