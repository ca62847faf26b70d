"""Differentiable quantum attention gate for the U-Net bottleneck.

Per sample: global average pool -> linear down-projection to one encoding
angle per qubit -> circuit Z expectations -> linear up-projection back to
channel width -> channelwise multiply with the original feature map.

The classical pieces ride the normal tape; the circuit itself is a custom
tape node whose backward runs the parameter-shift rule per sample. Samples
are independent, so an optional thread pool may evaluate them concurrently;
results are always combined in sample order, keeping every reduction
deterministic regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import ContractError, DimensionError
from ..ops import broadcast_mul_channelwise, global_avg_pool, linear
from ..tensor import Tensor
from .circuit import CircuitConfig, parameter_shift_grad, run_circuit


def _map_samples(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def circuit_expectations(angles: Tensor, weights: Tensor, cfg: CircuitConfig,
                         workers: int = 1) -> Tensor:
    """Row-wise circuit evaluation: (N, n) angles -> (N, n) Z expectations."""
    if angles.data.ndim != 2 or angles.data.shape[1] != cfg.n_qubits:
        raise DimensionError(
            f"circuit_expectations: angles {angles.data.shape} do not match n_qubits={cfg.n_qubits}")
    if weights.data.shape != (cfg.n_layers, cfg.n_qubits):
        raise DimensionError(
            f"circuit_expectations: weights {weights.data.shape} do not match "
            f"({cfg.n_layers}, {cfg.n_qubits})")

    a = angles.data
    w = weights.data
    rows = _map_samples(lambda r: run_circuit(cfg, r, w), list(a), workers)
    out = np.stack(rows) if rows else np.zeros((0, cfg.n_qubits))

    def bw(g):
        grads = _map_samples(
            lambda sg: parameter_shift_grad(cfg, sg[0], w, sg[1]),
            list(zip(a, g)), workers)
        d_angles = np.stack([da for da, _ in grads]) if grads else np.zeros_like(a)
        d_weights = np.zeros_like(w)
        for _, dw in grads:
            d_weights += dw
        return d_angles, d_weights

    return Tensor.from_op(out, (angles, weights), "circuit_expectations", bw)


def quantum_attention_forward(x: Tensor, proj_in_w: Tensor, proj_in_b: Tensor,
                              weights: Tensor, proj_out_w: Tensor, proj_out_b: Tensor,
                              cfg: CircuitConfig, workers: int = 1) -> Tensor:
    """Gate the bottleneck features with circuit-derived channel weights."""
    if x.data.ndim != 4:
        raise DimensionError(f"quantum attention expects NCHW input, got {x.data.shape}")
    channels = x.data.shape[1]
    if proj_in_w.data.shape[0] != channels:
        raise ContractError(
            f"quantum attention: input projection expects {proj_in_w.data.shape[0]} channels, "
            f"feature map has {channels}")
    if proj_in_w.data.shape[1] != cfg.n_qubits or proj_out_w.data.shape[0] != cfg.n_qubits:
        raise ContractError(
            f"quantum attention: projections {proj_in_w.data.shape} / {proj_out_w.data.shape} "
            f"do not match n_qubits={cfg.n_qubits}")
    if proj_out_w.data.shape[1] != channels:
        raise ContractError(
            f"quantum attention: output projection yields {proj_out_w.data.shape[1]} channels, "
            f"feature map has {channels}")

    pooled = global_avg_pool(x)
    enc_angles = linear(pooled, proj_in_w, proj_in_b)
    z_quantum = circuit_expectations(enc_angles, weights, cfg, workers=workers)
    gate = linear(z_quantum, proj_out_w, proj_out_b)
    return broadcast_mul_channelwise(x, gate)
