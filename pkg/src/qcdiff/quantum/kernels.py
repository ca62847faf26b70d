"""Low-level statevector kernels.

Amplitudes live in a 1-d complex128 array of length 2^n with qubit 0 as the
most significant bit of the basis index. Every kernel exists twice: a plain
numpy reference (always available, used as a cross-check in tests) and a
numba-jitted version that the engine binds when numba imports cleanly. Set
``QCDIFF_NO_NUMBA=1`` to force the numpy path.

All kernels mutate in place, run single-threaded, and avoid fastmath, so
repeated evaluation is bit-identical.
"""

from __future__ import annotations

import os

import numpy as np


# -- numpy reference implementations ----------------------------------------

def ry_inplace_np(a: np.ndarray, qubit: int, theta: float, n: int) -> None:
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    v = a.reshape(1 << qubit, 2, 1 << (n - qubit - 1))
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = c * a0 - s * a1
    v[:, 1, :] = s * a0 + c * a1


def rz_inplace_np(a: np.ndarray, qubit: int, theta: float, n: int) -> None:
    v = a.reshape(1 << qubit, 2, 1 << (n - qubit - 1))
    v[:, 0, :] *= complex(np.cos(theta / 2.0), -np.sin(theta / 2.0))
    v[:, 1, :] *= complex(np.cos(theta / 2.0), np.sin(theta / 2.0))


def cnot_inplace_np(a: np.ndarray, control: int, target: int, n: int) -> None:
    idx = np.arange(a.shape[0])
    cbit = (idx >> (n - 1 - control)) & 1
    tbit = (idx >> (n - 1 - target)) & 1
    src = idx[(cbit == 1) & (tbit == 0)]
    dst = src | (1 << (n - 1 - target))
    tmp = a[src].copy()
    a[src] = a[dst]
    a[dst] = tmp


def permute_inplace_np(a: np.ndarray, inv: np.ndarray, scratch: np.ndarray) -> None:
    np.take(a, inv, out=scratch)
    a[:] = scratch


def phase_multiply_inplace_np(a: np.ndarray, phases: np.ndarray) -> None:
    a *= phases


def expvals_z_np(a: np.ndarray, n: int, out: np.ndarray) -> None:
    p = (a.real * a.real + a.imag * a.imag)
    for q in range(n):
        v = p.reshape(1 << q, 2, 1 << (n - q - 1))
        out[q] = v[:, 0, :].sum() - v[:, 1, :].sum()


def norm_sq_np(a: np.ndarray) -> float:
    return float((a.real * a.real + a.imag * a.imag).sum())


# -- numba fast path ---------------------------------------------------------

USING_NUMBA = False

if not os.environ.get("QCDIFF_NO_NUMBA"):
    try:
        import numba

        @numba.njit(cache=True, nogil=True)
        def _ry(a, qubit, theta, n):
            c = np.cos(theta / 2.0)
            s = np.sin(theta / 2.0)
            right = 1 << (n - qubit - 1)
            step = right << 1
            for base in range(0, 1 << n, step):
                for j in range(base, base + right):
                    k = j + right
                    a0 = a[j]
                    a1 = a[k]
                    a[j] = c * a0 - s * a1
                    a[k] = s * a0 + c * a1

        @numba.njit(cache=True, nogil=True)
        def _rz(a, qubit, theta, n):
            ph0 = complex(np.cos(theta / 2.0), -np.sin(theta / 2.0))
            ph1 = ph0.conjugate()
            right = 1 << (n - qubit - 1)
            step = right << 1
            for base in range(0, 1 << n, step):
                for j in range(base, base + right):
                    a[j] = a[j] * ph0
                    a[j + right] = a[j + right] * ph1

        @numba.njit(cache=True, nogil=True)
        def _cnot(a, control, target, n):
            cmask = 1 << (n - 1 - control)
            tmask = 1 << (n - 1 - target)
            for b in range(a.shape[0]):
                if (b & cmask) != 0 and (b & tmask) == 0:
                    k = b | tmask
                    tmp = a[b]
                    a[b] = a[k]
                    a[k] = tmp

        @numba.njit(cache=True, nogil=True)
        def _permute(a, inv, scratch):
            for i in range(a.shape[0]):
                scratch[i] = a[inv[i]]
            a[:] = scratch

        @numba.njit(cache=True, nogil=True)
        def _phase_multiply(a, phases):
            for i in range(a.shape[0]):
                a[i] = a[i] * phases[i]

        @numba.njit(cache=True, nogil=True)
        def _expvals_z(a, n, out):
            for q in range(n):
                out[q] = 0.0
            for b in range(a.shape[0]):
                p = a[b].real * a[b].real + a[b].imag * a[b].imag
                for q in range(n):
                    if (b >> (n - 1 - q)) & 1:
                        out[q] -= p
                    else:
                        out[q] += p

        @numba.njit(cache=True, nogil=True)
        def _norm_sq(a):
            acc = 0.0
            for i in range(a.shape[0]):
                acc += a[i].real * a[i].real + a[i].imag * a[i].imag
            return acc

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via QCDIFF_NO_NUMBA
        pass

if USING_NUMBA:
    ry_inplace = _ry
    rz_inplace = _rz
    cnot_inplace = _cnot
    permute_inplace = _permute
    phase_multiply_inplace = _phase_multiply
    expvals_z = _expvals_z
    norm_sq = _norm_sq
else:  # pragma: no cover
    ry_inplace = ry_inplace_np
    rz_inplace = rz_inplace_np
    cnot_inplace = cnot_inplace_np
    permute_inplace = permute_inplace_np
    phase_multiply_inplace = phase_multiply_inplace_np
    expvals_z = expvals_z_np
    norm_sq = norm_sq_np
