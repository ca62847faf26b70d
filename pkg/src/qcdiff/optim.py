"""Adam optimizer and exponential-moving-average parameter shadow.

Parameters travel as an ordered ``dict[str, Tensor]``. Adam is the standard
bias-corrected variant; the EMA shadow is a plain array copy updated once per
optimizer step and snapshotted for sampling.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .tensor import Tensor

ParamSet = dict[str, Tensor]


class AdamState:
    """Per-parameter first/second moments plus the step counter."""

    def __init__(self, params: ParamSet, lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}


def adam_step(params: ParamSet, state: AdamState) -> None:
    """Apply one in-place bias-corrected Adam update from ``.grad`` buffers."""
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"adam_step: parameter {name!r} has no gradient")
        if name not in state.m:
            raise ContractError(f"adam_step: parameter {name!r} missing from optimizer state")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def zero_grads(params: ParamSet) -> None:
    for p in params.values():
        p.grad = None


class EmaShadow:
    """Slow copy of the parameters: shadow <- beta * shadow + (1-beta) * live."""

    def __init__(self, params: ParamSet, beta: float = 0.999):
        if not (0.0 < beta < 1.0):
            raise ContractError(f"EMA decay must lie in (0, 1), got {beta}")
        self.beta = float(beta)
        # initialized as an exact copy so early samples are not biased to zero
        self.values = {name: p.data.copy() for name, p in params.items()}

    def update(self, params: ParamSet) -> None:
        ema_update(self, params)

    def snapshot(self) -> ParamSet:
        """Frozen Tensor view of the shadow, usable as model parameters."""
        return {name: Tensor(v.copy()) for name, v in self.values.items()}


def ema_update(shadow: EmaShadow, params: ParamSet) -> None:
    if set(shadow.values) != set(params):
        raise ContractError(
            f"ema_update: parameter names differ (shadow has {len(shadow.values)}, live has {len(params)})")
    b = shadow.beta
    for name, p in params.items():
        s = shadow.values[name]
        if s.shape != p.data.shape:
            raise ContractError(
                f"ema_update: shape mismatch for {name!r}: {s.shape} vs {p.data.shape}")
        s *= b
        s += (1.0 - b) * p.data
