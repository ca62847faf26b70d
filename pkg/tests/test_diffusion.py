import numpy as np
import pytest

from qcdiff.diffusion import forward_sample, reverse_sample, train_step
from qcdiff.errors import ContractError, DimensionError
from qcdiff.optim import AdamState, EmaShadow
from qcdiff.rng import stream_rng
from qcdiff.schedule import NoiseSchedule, build_cosine_schedule
from qcdiff.tensor import Tensor
from qcdiff.unet import UNet, UNetConfig


class StubModel:
    """Duck-typed stand-in for UNet in objective-level tests."""

    def __init__(self, fn, channels=1):
        self.fn = fn
        self.params = {}
        self.cfg = type("Cfg", (), {"in_channels": channels})()

    def forward(self, x_t, t):
        return Tensor(self.fn(x_t.data, t))


def test_forward_sample_zero_noise_scales_input(rng):
    sched = build_cosine_schedule(100, 0.008)
    x0 = rng.normal(size=(2, 1, 4, 4))
    out = forward_sample(x0, 30, np.zeros_like(x0), sched)
    assert np.array_equal(out, sched.sqrt_alpha_bar[30] * x0)


def test_forward_sample_terminal_step_is_pure_noise(rng):
    sched = build_cosine_schedule(50, 0.008)
    x0 = rng.normal(size=(3, 1, 4, 4))
    eps = rng.normal(size=(3, 1, 4, 4))
    out = forward_sample(x0, 50, eps, sched)
    assert np.array_equal(out, eps)  # alpha_bar[T] == 0 exactly


def test_forward_sample_hypothetical_unit_alpha_bar(rng):
    # doctored schedule with alpha_bar = 1 at t=1: x_t must equal x0 exactly
    beta = np.array([0.0, 0.5])
    alpha_bar = np.array([1.0, 1.0])
    sched = NoiseSchedule(timesteps=1, s=0.008, beta=beta, alpha_bar=alpha_bar)
    x0 = rng.normal(size=(2, 1, 3, 3))
    eps = rng.normal(size=(2, 1, 3, 3))
    assert np.array_equal(forward_sample(x0, 1, eps, sched), x0)


def test_forward_sample_per_element_timesteps(rng):
    sched = build_cosine_schedule(100, 0.008)
    x0 = rng.normal(size=(3, 1, 2, 2))
    eps = rng.normal(size=(3, 1, 2, 2))
    t = np.array([1, 50, 100])
    out = forward_sample(x0, t, eps, sched)
    for i, ti in enumerate(t):
        want = forward_sample(x0[i:i + 1], int(ti), eps[i:i + 1], sched)
        assert np.array_equal(out[i:i + 1], want)


def test_forward_sample_moment_match(rng):
    # empirical mean/std of x_t over many draws vs the closed-form marginal
    sched = build_cosine_schedule(100, 0.008)
    t = 60
    x0 = np.full((100_000, 1, 1, 1), 0.7)
    eps = rng.standard_normal(x0.shape)
    xt = forward_sample(x0, t, eps, sched).ravel()
    want_mean = sched.sqrt_alpha_bar[t] * 0.7
    want_var = 1.0 - sched.alpha_bar[t]
    se_mean = np.sqrt(want_var / xt.size)
    assert abs(xt.mean() - want_mean) < 3 * se_mean
    se_var = want_var * np.sqrt(2.0 / (xt.size - 1))
    assert abs(xt.var() - want_var) < 3 * se_var


def test_forward_sample_contracts(rng):
    sched = build_cosine_schedule(10, 0.008)
    x0 = np.zeros((2, 1, 2, 2))
    with pytest.raises(ContractError):
        forward_sample(x0, 0, np.zeros_like(x0), sched)
    with pytest.raises(ContractError):
        forward_sample(x0, 11, np.zeros_like(x0), sched)
    with pytest.raises(DimensionError):
        forward_sample(x0, 1, np.zeros((2, 1, 2, 3)), sched)


# -- train_step -------------------------------------------------------------


def test_train_step_zero_model_loss_is_mean_eps_squared():
    sched = build_cosine_schedule(200, 0.008)
    model = StubModel(lambda x, t: np.zeros_like(x))
    x0 = np.zeros((8, 1, 4, 4))
    rng1 = np.random.default_rng(99)
    loss = train_step(model, x0, sched, AdamState({}), EmaShadow({}), rng1)
    rng2 = np.random.default_rng(99)
    rng2.integers(1, 201, size=8)
    eps = rng2.standard_normal(x0.shape)
    assert loss == pytest.approx(float((eps ** 2).mean()), rel=1e-12)
    assert abs(loss - 1.0) < 0.2  # E[eps^2] = 1 within Monte-Carlo slack


def test_train_step_oracle_passthrough_gives_zero_loss():
    sched = build_cosine_schedule(100, 0.008)
    x0 = np.zeros((4, 1, 3, 3))
    rng_preview = np.random.default_rng(5)
    rng_preview.integers(1, 101, size=4)
    eps = rng_preview.standard_normal(x0.shape)
    model = StubModel(lambda x, t: eps)
    loss = train_step(model, x0, sched, AdamState({}), EmaShadow({}), np.random.default_rng(5))
    assert loss == 0.0


def test_train_step_deterministic_sequence(rng):
    sched = build_cosine_schedule(50, 0.008)
    x0 = rng.normal(size=(6, 1, 8, 8)).clip(-1, 1)

    def run():
        net = UNet.create(UNetConfig(in_channels=1), seed=3)
        opt = AdamState(net.params, lr=3e-4)
        ema = EmaShadow(net.params)
        noise_rng = stream_rng(3, "noise")
        return [train_step(net, x0, sched, opt, ema, noise_rng) for _ in range(3)]

    assert run() == run()


def test_train_step_channel_mismatch():
    sched = build_cosine_schedule(10, 0.008)
    model = StubModel(lambda x, t: x, channels=3)
    with pytest.raises(ContractError):
        train_step(model, np.zeros((2, 1, 4, 4)), sched, AdamState({}), EmaShadow({}),
                   np.random.default_rng(0))


# -- reverse_sample ------------------------------------------------------------


def test_reverse_sample_single_step_closed_form():
    sched = build_cosine_schedule(1, 0.008)
    model = StubModel(lambda x, t: np.zeros_like(x))
    rng1 = np.random.default_rng(11)
    out = reverse_sample(model, sched, 2, rng1, image_hw=4)
    rng2 = np.random.default_rng(11)
    x1 = rng2.standard_normal((2, 1, 4, 4))
    want = np.clip(x1 / np.sqrt(sched.alpha[1]), -1.0, 1.0)
    assert np.array_equal(out, want)


def test_reverse_sample_deterministic_and_bounded():
    net = UNet.create(UNetConfig(in_channels=1), seed=0)
    sched = build_cosine_schedule(5, 0.008)
    a = reverse_sample(net, sched, 3, np.random.default_rng(4))
    b = reverse_sample(net, sched, 3, np.random.default_rng(4))
    assert np.array_equal(a, b)
    assert a.shape == (3, 1, 28, 28)
    assert a.min() >= -1.0 and a.max() <= 1.0


def test_reverse_sample_rejects_bad_n():
    net = UNet.create(UNetConfig(in_channels=1), seed=0)
    sched = build_cosine_schedule(2, 0.008)
    with pytest.raises(ContractError):
        reverse_sample(net, sched, 0, np.random.default_rng(0))
