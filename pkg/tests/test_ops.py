import numpy as np
import pytest

from oracles import naive_conv2d, naive_conv_transpose2d, naive_matmul

from qcdiff import ops
from qcdiff.errors import ContractError, DimensionError
from qcdiff.tensor import Tensor, backward


def T(a, grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


# -- linear --------------------------------------------------------------------


def test_linear_identity_weights():
    out = ops.linear(T([[1.0, 2.0]]), T([[1.0, 0.0], [0.0, 1.0]]), T([0.0, 0.0]))
    assert np.array_equal(out.data, [[1.0, 2.0]])


def test_linear_zero_weights_bias_passthrough():
    out = ops.linear(T([[1.0, 2.0]]), T(np.zeros((2, 2))), T([3.0, 4.0]))
    assert np.array_equal(out.data, [[3.0, 4.0]])


def test_linear_matches_triple_loop_matmul(rng):
    x = rng.normal(size=(2, 3))
    w = rng.normal(size=(3, 2))
    b = rng.normal(size=2)
    out = ops.linear(T(x), T(w), T(b)).data
    assert np.abs(out - (naive_matmul(x, w) + b)).max() < 1e-12


def test_linear_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(1, 2\).*\(3, 2\)"):
        ops.linear(T([[1.0, 2.0]]), T(np.zeros((3, 2))), T(np.zeros(2)))


# -- conv2d --------------------------------------------------------------------


def test_conv2d_identity_kernel(rng):
    x = rng.normal(size=(1, 1, 3, 3))
    out = ops.conv2d(T(x), T(np.ones((1, 1, 1, 1))), T(np.zeros(1)), stride=1, pad=0)
    assert np.array_equal(out.data, x)


def test_conv2d_all_ones_sums_window():
    x = np.ones((1, 1, 3, 3))
    out = ops.conv2d(T(x), T(np.ones((1, 1, 3, 3))), T(np.zeros(1)), stride=1, pad=0)
    assert out.data.shape == (1, 1, 1, 1)
    assert out.data.reshape(()) == 9.0


def test_conv2d_matches_naive_oracle(rng):
    x = rng.normal(size=(2, 2, 5, 5))
    k = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    got = ops.conv2d(T(x), T(k), T(b), stride=2, pad=1).data
    want = naive_conv2d(x, k, b, 2, 1)
    assert np.abs(got - want).max() < 1e-12


def test_conv2d_rejects_non_positive_output():
    with pytest.raises(DimensionError):
        ops.conv2d(T(np.ones((1, 1, 2, 2))), T(np.ones((1, 1, 5, 5))), T(np.zeros(1)))


# -- conv_transpose2d ------------------------------------------------------------


def test_conv_transpose_identity():
    x = np.arange(9.0).reshape(1, 1, 3, 3)
    out = ops.conv_transpose2d(T(x), T(np.ones((1, 1, 1, 1))), T(np.zeros(1)), stride=1, pad=0)
    assert np.array_equal(out.data, x)


def test_conv_transpose_block_upsampling():
    x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    out = ops.conv_transpose2d(T(x), T(np.ones((1, 1, 2, 2))), T(np.zeros(1)), stride=2, pad=0)
    want = np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)  # each pixel tiled 2x2
    assert out.data.shape == (1, 1, 4, 4)
    assert np.array_equal(out.data, want)


def test_conv_transpose_matches_naive_oracle(rng):
    x = rng.normal(size=(2, 3, 4, 4))
    k = rng.normal(size=(3, 2, 4, 4))
    b = rng.normal(size=2)
    got = ops.conv_transpose2d(T(x), T(k), T(b), stride=2, pad=1).data
    want = naive_conv_transpose2d(x, k, b, 2, 1)
    assert np.abs(got - want).max() < 1e-12


@pytest.mark.parametrize("stride,pad,hw,kh", [(1, 0, 5, 3), (2, 1, 7, 3), (2, 1, 8, 4), (1, 1, 6, 3)])
def test_conv_adjoint_identity(rng, stride, pad, hw, kh):
    # <conv(x, k), y> == <x, convT(y, k)> when the sizes round-trip exactly
    x = rng.normal(size=(2, 3, hw, hw))
    k = rng.normal(size=(4, 3, kh, kh))
    h_out = (hw + 2 * pad - kh) // stride + 1
    assert (h_out - 1) * stride - 2 * pad + kh == hw, "test sizes must round-trip"
    y = rng.normal(size=(2, 4, h_out, h_out))
    cx = ops.conv2d(T(x), T(k), T(np.zeros(4)), stride, pad).data
    cty = ops.conv_transpose2d(T(y), T(k), T(np.zeros(3)), stride, pad).data
    assert abs((cx * y).sum() - (x * cty).sum()) < 1e-10


# -- elementwise / reductions -----------------------------------------------------


def test_relu_values():
    out = ops.activation(T([-1.0, 2.0]), "relu")
    assert np.array_equal(out.data, [0.0, 2.0])


def test_silu_zero():
    assert ops.activation(T([0.0]), "silu").data[0] == 0.0


def test_activation_unknown_kind():
    with pytest.raises(ContractError):
        ops.activation(T([0.0]), "gelu")


def test_global_avg_pool_constant():
    x = np.full((1, 2, 3, 3), 5.0)
    assert np.array_equal(ops.global_avg_pool(T(x)).data, np.full((1, 2), 5.0))


def test_global_avg_pool_mean():
    x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    assert ops.global_avg_pool(T(x)).data.reshape(()) == 2.5


def test_broadcast_mul_ones_is_identity(rng):
    x = rng.normal(size=(2, 3, 4, 4))
    out = ops.broadcast_mul_channelwise(T(x), T(np.ones((2, 3))))
    assert np.array_equal(out.data, x)


def test_broadcast_mul_zeros(rng):
    x = rng.normal(size=(2, 3, 4, 4))
    out = ops.broadcast_mul_channelwise(T(x), T(np.zeros((2, 3))))
    assert np.array_equal(out.data, np.zeros_like(x))


def test_broadcast_mul_matches_loop_oracle(rng):
    x = rng.normal(size=(2, 3, 4, 4))
    s = rng.normal(size=(2, 3))
    got = ops.broadcast_mul_channelwise(T(x), T(s)).data
    want = np.empty_like(x)
    for n in range(2):
        for c in range(3):
            for i in range(4):
                for j in range(4):
                    want[n, c, i, j] = x[n, c, i, j] * s[n, c]
    assert np.abs(got - want).max() < 1e-12


def test_broadcast_mul_shape_mismatch():
    with pytest.raises(DimensionError):
        ops.broadcast_mul_channelwise(T(np.ones((2, 3, 4, 4))), T(np.ones((2, 2))))


def test_mse_loss_zero_when_equal(rng):
    x = rng.normal(size=(3, 3))
    assert ops.mse_loss(T(x), T(x.copy())).item() == 0.0


def test_mse_loss_unit():
    assert ops.mse_loss(T([1.0, 1.0]), T([0.0, 0.0])).item() == 1.0


def test_mse_loss_shape_mismatch():
    with pytest.raises(DimensionError):
        ops.mse_loss(T(np.ones(3)), T(np.ones(4)))


def test_concat_channels_roundtrip(rng):
    a = rng.normal(size=(2, 3, 4, 4))
    b = rng.normal(size=(2, 2, 4, 4))
    ta, tb = T(a, grad=True), T(b, grad=True)
    out = ops.concat_channels(ta, tb)
    assert out.data.shape == (2, 5, 4, 4)
    backward(ops.tensor_sum(out))
    assert np.array_equal(ta.grad, np.ones_like(a))
    assert np.array_equal(tb.grad, np.ones_like(b))
