"""Differentiable primitives for the denoiser networks.

Each op validates shapes, computes the forward value with vectorized numpy,
and registers an exact backward rule on the tape. Convolutions go through
sliding-window views (an im2col-style path); tests pin them against naive
loop oracles and the conv/conv-transpose adjoint identity.

Broadcasting is deliberately restricted to the channelwise (N, C) patterns
the model needs; everything else demands exact shape agreement.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, DimensionError
from .tensor import Tensor


def _shapes(*tensors: Tensor) -> str:
    return " vs ".join(str(t.data.shape) for t in tensors)


# ---------------------------------------------------------------------------
# dense / elementwise
# ---------------------------------------------------------------------------

def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map: out[n, o] = sum_i x[n, i] * w[i, o] + b[o]."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise DimensionError(f"linear: x {x.data.shape} incompatible with w {w.data.shape}")
    if b.data.shape != (w.data.shape[1],):
        raise DimensionError(f"linear: bias {b.data.shape} does not match w {w.data.shape}")
    out = x.data @ w.data + b.data

    def bw(g):
        return g @ w.data.T, x.data.T @ g, g.sum(axis=0)

    return Tensor.from_op(out, (x, w, b), "linear", bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add: shape mismatch {_shapes(a, b)}")
    return Tensor.from_op(a.data + b.data, (a, b), "add", lambda g: (g, g))


def add_channelwise(x: Tensor, s: Tensor) -> Tensor:
    """x[n,c,h,w] + s[n,c], broadcast over the spatial axes."""
    _check_channelwise(x, s, "add_channelwise")
    out = x.data + s.data[:, :, None, None]

    def bw(g):
        return g, g.sum(axis=(2, 3))

    return Tensor.from_op(out, (x, s), "add_channelwise", bw)


def broadcast_mul_channelwise(x: Tensor, s: Tensor) -> Tensor:
    """x[n,c,h,w] * s[n,c]; the attention-style channel gate."""
    _check_channelwise(x, s, "broadcast_mul_channelwise")
    out = x.data * s.data[:, :, None, None]

    def bw(g):
        return g * s.data[:, :, None, None], (g * x.data).sum(axis=(2, 3))

    return Tensor.from_op(out, (x, s), "broadcast_mul_channelwise", bw)


def _check_channelwise(x: Tensor, s: Tensor, op: str) -> None:
    if x.data.ndim != 4 or s.data.ndim != 2 or x.data.shape[:2] != s.data.shape:
        raise DimensionError(f"{op}: x {x.data.shape} incompatible with s {s.data.shape}")


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "silu":
        return silu(x)
    raise ContractError(f"unknown activation kind {kind!r}")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(np.where(mask, x.data, 0.0), (x,), "relu", lambda g: (g * mask,))


def silu(x: Tensor) -> Tensor:
    # exponent kept <= 0 so exp never overflows for large-magnitude inputs
    ex = np.exp(-np.abs(x.data))
    sig = np.where(x.data >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))
    out = x.data * sig

    def bw(g):
        # d/dx x*sigmoid(x) = sigmoid(x) * (1 + x * (1 - sigmoid(x)))
        return (g * sig * (1.0 + x.data * (1.0 - sig)),)

    return Tensor.from_op(out, (x,), "silu", bw)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: (N, C, H, W) -> (N, C)."""
    if x.data.ndim != 4:
        raise DimensionError(f"global_avg_pool expects NCHW, got {x.data.shape}")
    n, c, h, w = x.data.shape
    out = x.data.mean(axis=(2, 3))

    def bw(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.data.shape).copy(),)

    return Tensor.from_op(out, (x,), "global_avg_pool", bw)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two NCHW maps along the channel axis (skip connections)."""
    if a.data.ndim != 4 or b.data.ndim != 4:
        raise DimensionError(f"concat_channels expects NCHW, got {_shapes(a, b)}")
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2:] != b.data.shape[2:]:
        raise DimensionError(f"concat_channels: incompatible shapes {_shapes(a, b)}")
    ca = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def bw(g):
        return g[:, :ca], g[:, ca:]

    return Tensor.from_op(out, (a, b), "concat_channels", bw)


def tensor_sum(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())
    return Tensor.from_op(out, (x,), "sum", lambda g: (np.broadcast_to(g, x.data.shape).copy(),))


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared difference over all elements (scalar output)."""
    if pred.data.shape != target.data.shape:
        raise DimensionError(f"mse_loss: shape mismatch {_shapes(pred, target)}")
    diff = pred.data - target.data
    out = np.asarray(np.mean(diff * diff))
    scale = 2.0 / diff.size

    def bw(g):
        gd = g * scale * diff
        return gd, -gd

    return Tensor.from_op(out, (pred, target), "mse_loss", bw)


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _conv_windows(arr: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(N, C, H, W) -> strided view (N, C, H', W', kh, kw)."""
    win = sliding_window_view(arr, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def _pad_spatial(arr: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return arr
    return np.pad(arr, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d(x: Tensor, k: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Strided cross-correlation with zero padding.

    x: (N, C, H, W), k: (F, C, kh, kw), b: (F,) -> (N, F, H', W') with
    H' = floor((H + 2 pad - kh) / stride) + 1.
    """
    if x.data.ndim != 4 or k.data.ndim != 4:
        raise DimensionError(f"conv2d: expected 4-d x and k, got {_shapes(x, k)}")
    n, c, h, w = x.data.shape
    f, ck, kh, kw = k.data.shape
    if ck != c:
        raise DimensionError(f"conv2d: input channels {x.data.shape} do not match kernel {k.data.shape}")
    if b.data.shape != (f,):
        raise DimensionError(f"conv2d: bias {b.data.shape} does not match kernel {k.data.shape}")
    if stride < 1 or pad < 0:
        raise ContractError(f"conv2d: invalid stride={stride} pad={pad}")
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1
    if h + 2 * pad < kh or w + 2 * pad < kw or h_out < 1 or w_out < 1:
        raise DimensionError(
            f"conv2d: kernel {k.data.shape} too large for input {x.data.shape} with pad={pad}")

    xp = _pad_spatial(x.data, pad)
    win = _conv_windows(xp, kh, kw, stride)
    # materialize im2col so the contraction runs as one BLAS matmul
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * h_out * w_out, c * kh * kw)
    kmat = k.data.reshape(f, c * kh * kw)
    out = (cols @ kmat.T).reshape(n, h_out, w_out, f).transpose(0, 3, 1, 2)
    out = out + b.data[None, :, None, None]

    def bw(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * h_out * w_out, f)
        dk = (g2.T @ cols).reshape(f, c, kh, kw)
        db = g.sum(axis=(0, 2, 3))
        dwin = (g2 @ kmat).reshape(n, h_out, w_out, c, kh, kw)
        dxp = np.zeros_like(xp)
        for u in range(kh):
            for v in range(kw):
                dxp[:, :, u:u + stride * (h_out - 1) + 1:stride,
                    v:v + stride * (w_out - 1) + 1:stride] += dwin[:, :, :, :, u, v].transpose(0, 3, 1, 2)
        dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
        return dx, dk, db

    return Tensor.from_op(out, (x, k, b), "conv2d", bw)


def conv_transpose2d(x: Tensor, k: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Adjoint of conv2d's linear map (fractionally strided convolution).

    x: (N, C, H, W), k: (C, F, kh, kw), b: (F,) -> (N, F, H', W') with
    H' = (H - 1) * stride - 2 pad + kh.
    """
    if x.data.ndim != 4 or k.data.ndim != 4:
        raise DimensionError(f"conv_transpose2d: expected 4-d x and k, got {_shapes(x, k)}")
    n, c, h, w = x.data.shape
    ck, f, kh, kw = k.data.shape
    if ck != c:
        raise DimensionError(
            f"conv_transpose2d: input channels {x.data.shape} do not match kernel {k.data.shape}")
    if b.data.shape != (f,):
        raise DimensionError(f"conv_transpose2d: bias {b.data.shape} does not match kernel {k.data.shape}")
    if stride < 1 or pad < 0:
        raise ContractError(f"conv_transpose2d: invalid stride={stride} pad={pad}")
    h_out = (h - 1) * stride - 2 * pad + kh
    w_out = (w - 1) * stride - 2 * pad + kw
    if h_out < 1 or w_out < 1:
        raise DimensionError(
            f"conv_transpose2d: output {h_out}x{w_out} not positive for input {x.data.shape}, "
            f"kernel {k.data.shape}, stride={stride}, pad={pad}")

    h_full = (h - 1) * stride + kh
    w_full = (w - 1) * stride + kw
    xmat = np.ascontiguousarray(x.data.transpose(0, 2, 3, 1)).reshape(n * h * w, c)
    kmat = k.data.reshape(c, f * kh * kw)
    prod = (xmat @ kmat).reshape(n, h, w, f, kh, kw)
    buf = np.zeros((n, f, h_full, w_full))
    for u in range(kh):
        for v in range(kw):
            buf[:, :, u:u + stride * (h - 1) + 1:stride,
                v:v + stride * (w - 1) + 1:stride] += prod[:, :, :, :, u, v].transpose(0, 3, 1, 2)
    out = buf[:, :, pad:pad + h_out, pad:pad + w_out] + b.data[None, :, None, None]

    def bw(g):
        gbuf = np.zeros((n, f, h_full, w_full))
        gbuf[:, :, pad:pad + h_out, pad:pad + w_out] = g
        gcols = np.ascontiguousarray(
            _conv_windows(gbuf, kh, kw, stride).transpose(0, 2, 3, 1, 4, 5)).reshape(
                n * h * w, f * kh * kw)
        dx = (gcols @ kmat.T).reshape(n, h, w, c).transpose(0, 3, 1, 2)
        dk = (xmat.T @ gcols).reshape(c, f, kh, kw)
        db = g.sum(axis=(0, 2, 3))
        return dx, dk, db

    return Tensor.from_op(out, (x, k, b), "conv_transpose2d", bw)


# ---------------------------------------------------------------------------
# raw (non-taped) kernels, reused by the frozen metric extractor
# ---------------------------------------------------------------------------

def conv2d_raw(x: np.ndarray, k: np.ndarray, b: np.ndarray, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Forward-only conv2d on plain arrays; same arithmetic as conv2d."""
    x = np.asarray(x, dtype=np.float64)
    f, c, kh, kw = k.shape
    xp = _pad_spatial(x, pad)
    win = _conv_windows(xp, kh, kw, stride)
    n, _, h_out, w_out = win.shape[0], win.shape[1], win.shape[2], win.shape[3]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * h_out * w_out, c * kh * kw)
    out = (cols @ k.reshape(f, -1).T).reshape(n, h_out, w_out, f).transpose(0, 3, 1, 2)
    return out + b[None, :, None, None]
