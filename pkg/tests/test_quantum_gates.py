import numpy as np
import pytest

from oracles import expand_1q, expand_cnot, ry_matrix, rz_matrix

from qcdiff.errors import ContractError
from qcdiff.quantum import StateVector
from qcdiff.quantum import kernels


def test_initial_state_is_all_zeros_basis():
    sv = StateVector(3)
    want = np.zeros(8, dtype=complex)
    want[0] = 1.0
    assert np.array_equal(sv.amplitudes, want)


def test_ry_zero_is_identity(rng):
    sv = StateVector(2)
    sv.apply_ry(0, 1.3)
    sv.apply_ry(1, -0.4)
    before = sv.amplitudes.copy()
    sv.apply_ry(0, 0.0)
    assert np.array_equal(sv.amplitudes, before)


def test_ry_pi_flips_qubit():
    sv = StateVector(1)
    sv.apply_ry(0, np.pi)
    assert abs(abs(sv.amplitudes[1]) - 1.0) < 1e-15
    assert sv.expect_z()[0] == pytest.approx(-1.0, abs=1e-15)


@pytest.mark.parametrize("theta", [0.3, 1.1, 2.5])
def test_ry_expectation_is_cos_theta(theta):
    sv = StateVector(1)
    sv.apply_ry(0, theta)
    assert abs(sv.expect_z()[0] - np.cos(theta)) < 1e-12


def test_rz_keeps_z_expectation_on_basis_state():
    sv = StateVector(2)
    sv.apply_rz(0, 1.7)
    sv.apply_rz(1, -2.3)
    assert np.allclose(sv.expect_z(), [1.0, 1.0], atol=1e-15)


def test_rz_inverse_pair_restores_amplitudes():
    sv = StateVector(2)
    sv.apply_ry(0, 0.8)
    sv.apply_ry(1, -1.1)
    before = sv.amplitudes.copy()
    sv.apply_rz(0, np.pi / 2)
    sv.apply_rz(0, -np.pi / 2)
    assert np.abs(sv.amplitudes - before).max() < 1e-15


@pytest.mark.parametrize("theta", [0.4, 1.9, -2.2])
def test_rz_rotates_x_expectation(theta):
    # on (|0>+|1>)/sqrt(2), <X> goes from 1 to cos(theta)
    sv = StateVector(1)
    sv.apply_ry(0, np.pi / 2)
    sv.apply_rz(0, theta)
    a = sv.amplitudes
    x_exp = 2 * np.real(np.conj(a[0]) * a[1])
    want_state = rz_matrix(theta) @ ry_matrix(np.pi / 2) @ np.array([1, 0], dtype=complex)
    want = 2 * np.real(np.conj(want_state[0]) * want_state[1])
    assert abs(x_exp - want) < 1e-12
    assert abs(x_exp - np.cos(theta)) < 1e-12


def test_cnot_definition():
    sv = StateVector(2)
    sv.apply_ry(0, np.pi)  # |10>
    sv.apply_cnot(0, 1)
    probs = np.abs(sv.amplitudes) ** 2
    assert probs[0b11] == pytest.approx(1.0, abs=1e-15)


def test_cnot_control_off_is_identity():
    sv = StateVector(2)  # |00>
    before = sv.amplitudes.copy()
    sv.apply_cnot(0, 1)
    assert np.array_equal(sv.amplitudes, before)


def test_cnot_is_involution_bit_identical(rng):
    sv = StateVector(4)
    for q in range(4):
        sv.apply_ry(q, rng.uniform(-np.pi, np.pi))
    before = sv.amplitudes.copy()
    sv.apply_cnot(1, 3)
    sv.apply_cnot(1, 3)
    assert np.array_equal(sv.amplitudes, before)


def test_cnot_reversed_direction_matches_dense(rng):
    sv = StateVector(3)
    for q in range(3):
        sv.apply_ry(q, rng.uniform(-np.pi, np.pi))
    dense = sv.amplitudes.copy()
    sv.apply_cnot(2, 0)
    dense = expand_cnot(2, 0, 3) @ dense
    assert np.abs(sv.amplitudes - dense).max() < 1e-14


def test_gate_index_contracts():
    sv = StateVector(2)
    with pytest.raises(ContractError):
        sv.apply_ry(2, 0.1)
    with pytest.raises(ContractError):
        sv.apply_rz(-1, 0.1)
    with pytest.raises(ContractError):
        sv.apply_cnot(1, 1)


@pytest.mark.parametrize("n", [1, 3, 16])
def test_norm_conserved_under_random_gate_sequence(rng, n):
    sv = StateVector(n)
    for _ in range(60):
        kind = rng.integers(3)
        q = int(rng.integers(n))
        if kind == 0:
            sv.apply_ry(q, rng.uniform(-4, 4))
        elif kind == 1:
            sv.apply_rz(q, rng.uniform(-4, 4))
        elif n > 1:
            t = int(rng.integers(n - 1))
            sv.apply_cnot(t, t + 1)
    assert abs(sv.norm_sq() - 1.0) < 1e-12


def test_gates_match_dense_oracle(rng):
    n = 3
    sv = StateVector(n)
    dense = np.zeros(8, dtype=complex)
    dense[0] = 1.0
    moves = [("ry", 0, 0.7), ("rz", 1, -1.2), ("ry", 2, 2.1), ("cnot", 0, 1),
             ("rz", 0, 0.5), ("cnot", 1, 2), ("ry", 1, -0.9)]
    for kind, a, b in moves:
        if kind == "ry":
            sv.apply_ry(a, b)
            dense = expand_1q(ry_matrix(b), a, n) @ dense
        elif kind == "rz":
            sv.apply_rz(a, b)
            dense = expand_1q(rz_matrix(b), a, n) @ dense
        else:
            sv.apply_cnot(a, int(b))
            dense = expand_cnot(a, int(b), n) @ dense
    assert np.abs(sv.amplitudes - dense).max() < 1e-12


def test_numba_and_numpy_kernels_agree(rng):
    n = 5
    state = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    state /= np.linalg.norm(state)
    for q in range(n):
        a = state.copy()
        b = state.copy()
        kernels.ry_inplace(a, q, 0.6 + q, n)
        kernels.ry_inplace_np(b, q, 0.6 + q, n)
        assert np.abs(a - b).max() < 1e-15
        a2, b2 = a.copy(), a.copy()
        kernels.rz_inplace(a2, q, -1.1 * q - 0.2, n)
        kernels.rz_inplace_np(b2, q, -1.1 * q - 0.2, n)
        assert np.abs(a2 - b2).max() < 1e-15
    a3, b3 = state.copy(), state.copy()
    kernels.cnot_inplace(a3, 1, 3, n)
    kernels.cnot_inplace_np(b3, 1, 3, n)
    assert np.array_equal(a3, b3)
    out_a, out_b = np.empty(n), np.empty(n)
    kernels.expvals_z(state, n, out_a)
    kernels.expvals_z_np(state, n, out_b)
    assert np.abs(out_a - out_b).max() < 1e-12
