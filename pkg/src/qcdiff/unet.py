"""Lightweight U-Net denoiser with a pluggable bottleneck.

Spatial plan for 28x28 inputs: three stride-1/2/2 encoder convolutions down
to a 128-channel 7x7 bottleneck, a residual block (with the sinusoidal time
embedding injected right before it), then two stride-2 transposed
convolutions back to 28x28 and a 3x3 output convolution.

The ``quantum`` bottleneck applies the variational-circuit attention gate to
the residual block's output; everything else is shared with the classical
variant, so forcing the gate to emit all-ones makes the two variants
bit-identical under shared weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import ContractError, DimensionError
from .quantum import CircuitConfig, quantum_attention_forward
from .rng import stream_rng
from .tensor import Tensor

ENCODER_CHANNELS = (32, 64, 128)
BOTTLENECK_WIDTH = 128
TIME_EMBED_DIM = 128

BOTTLENECKS = ("classical", "quantum")

# variance-preserving correction for SiLU stacks; plain sqrt(6/fan_in) leaves
# deep activations too damped for the optimizer to move at small step sizes
SILU_GAIN = 1.7


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 1
    time_embed_dim: int = TIME_EMBED_DIM
    bottleneck: str = "classical"
    circuit: CircuitConfig = field(default_factory=CircuitConfig)
    skip_connections: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.in_channels not in (1, 3):
            raise ContractError(f"in_channels must be 1 or 3, got {self.in_channels}")
        if self.time_embed_dim % 2 or self.time_embed_dim < 2:
            raise ContractError(f"time_embed_dim must be even and >= 2, got {self.time_embed_dim}")
        if self.bottleneck not in BOTTLENECKS:
            raise ContractError(f"bottleneck must be one of {BOTTLENECKS}, got {self.bottleneck!r}")


ModelParams = dict[str, Tensor]


def timestep_embedding(t: int, d: int) -> np.ndarray:
    """Sinusoidal embedding [sin(t w_k), cos(t w_k)], w_k = 10000^(-2k/d)."""
    if d < 2 or d % 2:
        raise ContractError(f"embedding dimension must be even and >= 2, got {d}")
    k = np.arange(d // 2)
    omega = 10000.0 ** (-2.0 * k / d)
    out = np.empty(d)
    out[0::2] = np.sin(t * omega)
    out[1::2] = np.cos(t * omega)
    return out


def _timestep_embedding_batch(t: np.ndarray, d: int) -> np.ndarray:
    return np.stack([timestep_embedding(int(ti), d) for ti in t])


def embed_time(t, params: ModelParams, d: int) -> Tensor:
    """Map timesteps to the (N, 128) conditioning vector: Linear, SiLU, Linear."""
    t = np.atleast_1d(np.asarray(t, dtype=np.int64))
    gamma = Tensor(_timestep_embedding_batch(t, d))
    emb = ops.linear(gamma, params["time_embed.weight"], params["time_embed.bias"])
    emb = ops.silu(emb)
    return ops.linear(emb, params["time_proj.weight"], params["time_proj.bias"])


# -- parameter construction ----------------------------------------------------


def _kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                     gain: float = 1.0) -> np.ndarray:
    bound = gain * np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _layer_specs(cfg: UNetConfig) -> list[tuple[str, tuple[int, ...], int, int]]:
    """(name, weight shape, fan_in, bias length) for every layer, in order.

    conv weights are (F, C, kh, kw); transposed-conv weights are (C, F, kh, kw);
    linear weights are (in, out).
    """
    c = cfg.in_channels
    e1, e2, e3 = ENCODER_CHANNELS
    d = cfg.time_embed_dim
    dec2_in = e2 + (e2 if cfg.skip_connections else 0)
    out_in = e1 + (e1 if cfg.skip_connections else 0)
    return [
        ("enc1", (e1, c, 3, 3), c * 9, e1),
        ("enc2", (e2, e1, 3, 3), e1 * 9, e2),
        ("enc3", (e3, e2, 3, 3), e2 * 9, e3),
        ("time_embed", (d, BOTTLENECK_WIDTH), d, BOTTLENECK_WIDTH),
        ("time_proj", (BOTTLENECK_WIDTH, BOTTLENECK_WIDTH), BOTTLENECK_WIDTH, BOTTLENECK_WIDTH),
        ("res1", (e3, e3, 3, 3), e3 * 9, e3),
        ("res2", (e3, e3, 3, 3), e3 * 9, e3),
        ("dec1", (e3, e2, 4, 4), e3 * 16, e2),
        ("dec2", (dec2_in, e1, 4, 4), dec2_in * 16, e1),
        ("out", (c, out_in, 3, 3), out_in * 9, c),
    ]


def init_params(cfg: UNetConfig, seed: int, init_gain: float = SILU_GAIN) -> ModelParams:
    """Kaiming-uniform weights, zero biases, uniform(-pi, pi) circuit angles.

    Each parameter draws from its own named rng substream, so layers shared
    between the classical and quantum variants initialize identically.
    """
    params: ModelParams = {}
    for name, shape, fan_in, bias_len in _layer_specs(cfg):
        rng = stream_rng(seed, "init", key=name)
        params[f"{name}.weight"] = Tensor(
            _kaiming_uniform(rng, shape, fan_in, gain=init_gain), requires_grad=True)
        params[f"{name}.bias"] = Tensor(np.zeros(bias_len), requires_grad=True)

    if cfg.bottleneck == "quantum":
        n = cfg.circuit.n_qubits
        rng = stream_rng(seed, "init", key="qattn.proj_in")
        params["qattn.proj_in.weight"] = Tensor(
            _kaiming_uniform(rng, (BOTTLENECK_WIDTH, n), BOTTLENECK_WIDTH, gain=init_gain),
            requires_grad=True)
        params["qattn.proj_in.bias"] = Tensor(np.zeros(n), requires_grad=True)
        rng = stream_rng(seed, "init", key="qattn.proj_out")
        params["qattn.proj_out.weight"] = Tensor(
            _kaiming_uniform(rng, (n, BOTTLENECK_WIDTH), n, gain=init_gain), requires_grad=True)
        # gate bias starts at one: the multiplicative gate opens centered on the
        # identity, so the quantum variant begins at the classical operating point
        params["qattn.proj_out.bias"] = Tensor(np.ones(BOTTLENECK_WIDTH), requires_grad=True)
        rng = stream_rng(seed, "init", key="qattn.weights")
        params["qattn.weights"] = Tensor(
            rng.uniform(-np.pi, np.pi, size=(cfg.circuit.n_layers, n)), requires_grad=True)
    return params


def param_count(params: ModelParams) -> int:
    return sum(p.data.size for p in params.values())


# -- forward ---------------------------------------------------------------


def unet_forward(x_t: Tensor, t, cfg: UNetConfig, params: ModelParams) -> Tensor:
    """Predict the added noise for a batch of noisy images at timesteps t."""
    if x_t.data.ndim != 4 or x_t.data.shape[1] != cfg.in_channels:
        raise ContractError(
            f"unet_forward: input {x_t.data.shape} does not match in_channels={cfg.in_channels}")
    if not np.all(np.isfinite(x_t.data)):
        raise ContractError("unet_forward: input contains non-finite values")
    n = x_t.data.shape[0]
    t = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if t.size == 1:
        t = np.full(n, t[0])
    if t.shape != (n,):
        raise DimensionError(f"unet_forward: got {t.size} timesteps for batch of {n}")

    emb = embed_time(t, params, cfg.time_embed_dim)

    e1 = ops.silu(ops.conv2d(x_t, params["enc1.weight"], params["enc1.bias"], stride=1, pad=1))
    e2 = ops.silu(ops.conv2d(e1, params["enc2.weight"], params["enc2.bias"], stride=2, pad=1))
    e3 = ops.silu(ops.conv2d(e2, params["enc3.weight"], params["enc3.bias"], stride=2, pad=1))

    h = ops.add_channelwise(e3, emb)
    r = ops.silu(ops.conv2d(h, params["res1.weight"], params["res1.bias"], stride=1, pad=1))
    r = ops.conv2d(r, params["res2.weight"], params["res2.bias"], stride=1, pad=1)
    r = ops.add(h, r)

    if cfg.bottleneck == "quantum":
        r = quantum_attention_forward(
            r,
            params["qattn.proj_in.weight"], params["qattn.proj_in.bias"],
            params["qattn.weights"],
            params["qattn.proj_out.weight"], params["qattn.proj_out.bias"],
            cfg.circuit, workers=cfg.workers)

    d1 = ops.silu(ops.conv_transpose2d(r, params["dec1.weight"], params["dec1.bias"], stride=2, pad=1))
    if cfg.skip_connections:
        d1 = ops.concat_channels(d1, e2)
    d2 = ops.silu(ops.conv_transpose2d(d1, params["dec2.weight"], params["dec2.bias"], stride=2, pad=1))
    if cfg.skip_connections:
        d2 = ops.concat_channels(d2, e1)
    return ops.conv2d(d2, params["out.weight"], params["out.bias"], stride=1, pad=1)


class UNet:
    """Config + parameters bundle with a forward convenience."""

    def __init__(self, cfg: UNetConfig, params: ModelParams):
        self.cfg = cfg
        self.params = params

    @classmethod
    def create(cls, cfg: UNetConfig, seed: int, init_gain: float = SILU_GAIN) -> "UNet":
        return cls(cfg, init_params(cfg, seed, init_gain=init_gain))

    def forward(self, x_t: Tensor, t) -> Tensor:
        return unet_forward(x_t, t, self.cfg, self.params)

    def with_params(self, params: ModelParams) -> "UNet":
        return UNet(self.cfg, params)
