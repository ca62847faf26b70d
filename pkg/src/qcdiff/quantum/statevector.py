"""Exact statevector register with RY / RZ / CNOT gate application."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from . import kernels


class StateVector:
    """2^n complex128 amplitudes, initialized to the all-zeros basis state.

    Qubit 0 owns the most significant bit of the basis index, matching the
    usual left-to-right tensor-product ordering.
    """

    def __init__(self, n_qubits: int):
        if n_qubits < 1:
            raise ContractError(f"n_qubits must be positive, got {n_qubits}")
        self.n_qubits = int(n_qubits)
        self.amplitudes = np.zeros(1 << self.n_qubits, dtype=np.complex128)
        self.amplitudes[0] = 1.0

    def _check_qubit(self, qubit: int) -> None:
        if not (0 <= qubit < self.n_qubits):
            raise ContractError(f"qubit index {qubit} out of range for {self.n_qubits} qubits")

    def apply_ry(self, qubit: int, theta: float) -> None:
        self._check_qubit(qubit)
        kernels.ry_inplace(self.amplitudes, qubit, float(theta), self.n_qubits)

    def apply_rz(self, qubit: int, theta: float) -> None:
        self._check_qubit(qubit)
        kernels.rz_inplace(self.amplitudes, qubit, float(theta), self.n_qubits)

    def apply_cnot(self, control: int, target: int) -> None:
        self._check_qubit(control)
        self._check_qubit(target)
        if control == target:
            raise ContractError(f"cnot control and target must differ, both {control}")
        kernels.cnot_inplace(self.amplitudes, control, target, self.n_qubits)

    def expect_z(self) -> np.ndarray:
        """Pauli-Z expectation of every qubit, each in [-1, 1]."""
        out = np.empty(self.n_qubits)
        kernels.expvals_z(self.amplitudes, self.n_qubits, out)
        return out

    def norm_sq(self) -> float:
        return kernels.norm_sq(self.amplitudes)
