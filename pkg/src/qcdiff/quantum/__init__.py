from .attention import circuit_expectations, quantum_attention_forward
from .circuit import ANSATZE, CircuitConfig, parameter_shift_grad, run_circuit, run_circuit_gates
from .statevector import StateVector

__all__ = [
    "ANSATZE",
    "CircuitConfig",
    "StateVector",
    "circuit_expectations",
    "parameter_shift_grad",
    "quantum_attention_forward",
    "run_circuit",
    "run_circuit_gates",
]
