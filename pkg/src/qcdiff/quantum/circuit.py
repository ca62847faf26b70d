"""The variational circuit: angle encoding, layered ansatz, Pauli-Z readout.

Circuit shape: RY(x_i) on every qubit, then per layer a column of per-qubit
weight rotations followed by the CNOT chain 0->1, 1->2, ..., n-2 -> n-1.
Two ansatz variants sit behind one flag:

* ``paper_literal``  - weight rotations are RZ. Diagonal phases composed with
  basis permutations never change computational-basis probabilities, so the
  Z readout is provably independent of these weights; the variant is kept as
  a fidelity reference and regression target.
* ``ry_variational`` - weight rotations are RY, which do carry gradient
  signal into the weights.

Gradients use the two-term parameter-shift rule for every rotation angle,
encoding angles included. Fast paths (product-state encoding, the CNOT chain
as one precomputed permutation, fused RZ columns) are cross-checked against
gate-by-gate application and a dense-matrix oracle in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from . import kernels
from .statevector import StateVector

ANSATZE = ("paper_literal", "ry_variational")

_HALF_PI = np.pi / 2.0


@dataclass(frozen=True)
class CircuitConfig:
    n_qubits: int = 16
    n_layers: int = 3
    ansatz: str = "paper_literal"

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ContractError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.n_layers < 0:
            raise ContractError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.ansatz not in ANSATZE:
            raise ContractError(f"unknown ansatz {self.ansatz!r}; expected one of {ANSATZE}")

    @property
    def weight_count(self) -> int:
        return self.n_layers * self.n_qubits


# -- cached per-width tables -------------------------------------------------

_CHAIN_INV: dict[int, np.ndarray] = {}
_ZSIGNS: dict[int, np.ndarray] = {}


def _chain_inv_perm(n: int) -> np.ndarray:
    """Inverse basis permutation of the full CNOT chain.

    The chain maps basis bits to their prefix XOR: out_j = b_0 ^ ... ^ b_j.
    Returns inv such that new_amplitudes = old_amplitudes[inv].
    """
    if n not in _CHAIN_INV:
        b = np.arange(1 << n, dtype=np.int64)
        fwd = np.zeros_like(b)
        prefix = np.zeros_like(b)
        for j in range(n):
            bit = (b >> (n - 1 - j)) & 1
            prefix = prefix ^ bit
            fwd |= prefix << (n - 1 - j)
        inv = np.empty_like(fwd)
        inv[fwd] = b
        _CHAIN_INV[n] = inv
    return _CHAIN_INV[n]


def _zsigns(n: int) -> np.ndarray:
    """(2^n, n) matrix of +-1: sign of Z on qubit q for each basis state."""
    if n not in _ZSIGNS:
        b = np.arange(1 << n, dtype=np.int64)
        signs = np.empty((1 << n, n))
        for q in range(n):
            signs[:, q] = 1.0 - 2.0 * ((b >> (n - 1 - q)) & 1)
        _ZSIGNS[n] = signs
    return _ZSIGNS[n]


# -- engine ------------------------------------------------------------------

def _encode_product_state(inputs: np.ndarray) -> np.ndarray:
    """State after RY(x_i) on every qubit of |0...0>: a real product state."""
    amp = np.ones(1)
    for x in inputs:
        amp = np.multiply.outer(amp, np.array([np.cos(x / 2.0), np.sin(x / 2.0)])).ravel()
    return amp.astype(np.complex128)


def _apply_layer(state: np.ndarray, cfg: CircuitConfig, w: np.ndarray,
                 scratch: np.ndarray) -> None:
    """One weight column plus the CNOT chain, in place."""
    n = cfg.n_qubits
    if cfg.ansatz == "paper_literal":
        # one diagonal multiply for the whole RZ column:
        # RZ(t) puts e^{-it/2} on |0> and e^{+it/2} on |1>  =>  exp(-i/2 * signs @ w)
        phases = np.exp(-0.5j * (_zsigns(n) @ w))
        kernels.phase_multiply_inplace(state, phases)
    else:
        for q in range(n):
            kernels.ry_inplace(state, q, w[q], n)
    if n > 1:
        kernels.permute_inplace(state, _chain_inv_perm(n), scratch)


def _apply_layers(state: np.ndarray, cfg: CircuitConfig, weights: np.ndarray,
                  start_layer: int, scratch: np.ndarray,
                  shift: tuple[int, int, float] | None = None) -> None:
    """Run layers [start_layer, L) in place, optionally shifting one weight."""
    for layer in range(start_layer, cfg.n_layers):
        w = weights[layer]
        if shift is not None and shift[0] == layer:
            w = w.copy()
            w[shift[1]] += shift[2]
        _apply_layer(state, cfg, w, scratch)


def _validate(cfg: CircuitConfig, inputs, weights) -> tuple[np.ndarray, np.ndarray]:
    inputs = np.asarray(inputs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if inputs.shape != (cfg.n_qubits,):
        raise ContractError(
            f"expected {cfg.n_qubits} encoding angles, got shape {inputs.shape}")
    if weights.shape != (cfg.n_layers, cfg.n_qubits):
        raise ContractError(
            f"expected weights of shape ({cfg.n_layers}, {cfg.n_qubits}), got {weights.shape}")
    if not np.all(np.isfinite(inputs)) or not np.all(np.isfinite(weights)):
        raise ContractError("circuit angles must be finite")
    return inputs, weights


def run_circuit(cfg: CircuitConfig, inputs, weights) -> np.ndarray:
    """Pauli-Z expectations of the full circuit, one value per qubit."""
    inputs, weights = _validate(cfg, inputs, weights)
    state = _encode_product_state(inputs)
    scratch = np.empty_like(state)
    _apply_layers(state, cfg, weights, 0, scratch)
    out = np.empty(cfg.n_qubits)
    kernels.expvals_z(state, cfg.n_qubits, out)
    return out


def run_circuit_gates(cfg: CircuitConfig, inputs, weights) -> np.ndarray:
    """Gate-by-gate reference of run_circuit (slow; used for cross-checks)."""
    inputs, weights = _validate(cfg, inputs, weights)
    sv = StateVector(cfg.n_qubits)
    for q in range(cfg.n_qubits):
        sv.apply_ry(q, inputs[q])
    for layer in range(cfg.n_layers):
        for q in range(cfg.n_qubits):
            if cfg.ansatz == "paper_literal":
                sv.apply_rz(q, weights[layer, q])
            else:
                sv.apply_ry(q, weights[layer, q])
        for q in range(cfg.n_qubits - 1):
            sv.apply_cnot(q, q + 1)
    return sv.expect_z()


def parameter_shift_grad(cfg: CircuitConfig, inputs, weights, upstream
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Parameter-shift gradients contracted with an upstream cotangent.

    For every rotation angle phi (encoding and weights alike),
    d<Z_i>/dphi = (<Z_i>(phi + pi/2) - <Z_i>(phi - pi/2)) / 2; the returned
    arrays are sum_i upstream[i] * d<Z_i>/dphi per angle. Weight shifts
    restart from a cached per-layer checkpoint instead of re-running the
    whole circuit.
    """
    inputs, weights = _validate(cfg, inputs, weights)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (cfg.n_qubits,):
        raise ContractError(f"upstream must have shape ({cfg.n_qubits},), got {upstream.shape}")

    n, n_layers = cfg.n_qubits, cfg.n_layers
    scratch = np.empty(1 << n, dtype=np.complex128)
    expv = np.empty(n)

    # checkpoints[l] = state entering layer l
    state = _encode_product_state(inputs)
    checkpoints = []
    for layer in range(n_layers):
        checkpoints.append(state.copy())
        _apply_layer(state, cfg, weights[layer], scratch)

    def _expectations(st: np.ndarray) -> np.ndarray:
        kernels.expvals_z(st, n, expv)
        return expv.copy()

    d_inputs = np.empty(n)
    shifted = inputs.copy()
    for i in range(n):
        halves = []
        for delta in (_HALF_PI, -_HALF_PI):
            shifted[i] = inputs[i] + delta
            st = _encode_product_state(shifted)
            _apply_layers(st, cfg, weights, 0, scratch)
            halves.append(_expectations(st))
        shifted[i] = inputs[i]
        d_inputs[i] = upstream @ ((halves[0] - halves[1]) / 2.0)

    d_weights = np.zeros((n_layers, n))
    for layer in range(n_layers):
        for i in range(n):
            halves = []
            for delta in (_HALF_PI, -_HALF_PI):
                st = checkpoints[layer].copy()
                _apply_layers(st, cfg, weights, layer, scratch, shift=(layer, i, delta))
                halves.append(_expectations(st))
            d_weights[layer, i] = upstream @ ((halves[0] - halves[1]) / 2.0)

    return d_inputs, d_weights
