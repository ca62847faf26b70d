import numpy as np
import pytest

from qcdiff.errors import ContractError
from qcdiff.schedule import BETA_CLIP, build_cosine_schedule


def test_alpha_bar_endpoints():
    sched = build_cosine_schedule(200, 0.008)
    assert sched.alpha_bar[-1] == 0.0
    # direct evaluation of the cosine at t=0, s=0.008
    want = np.cos((0.008 / 1.008) * np.pi / 2) ** 2
    assert sched.alpha_bar[0] == pytest.approx(want, abs=0)
    assert abs(sched.alpha_bar[0] - 0.99984) < 1e-5
    assert 0.999 < sched.alpha_bar[0] <= 1.0


@pytest.mark.parametrize("timesteps", [1, 10, 200, 1000])
def test_alpha_bar_strictly_decreasing(timesteps):
    sched = build_cosine_schedule(timesteps, 0.008)
    assert np.all(np.diff(sched.alpha_bar) < 0)


@pytest.mark.parametrize("timesteps", [10, 200, 1000])
def test_beta_range(timesteps):
    sched = build_cosine_schedule(timesteps, 0.008)
    betas = sched.beta[1:]
    assert np.all(betas > 0)
    assert np.all(betas <= BETA_CLIP)


def test_consistency_identity_where_unclipped():
    sched = build_cosine_schedule(500, 0.008)
    for t in range(1, 501):
        if sched.beta[t] < BETA_CLIP:  # clipped entries intentionally break it
            lhs = sched.alpha_bar[t]
            rhs = sched.alpha_bar[t - 1] * (1.0 - sched.beta[t])
            assert abs(lhs - rhs) < 1e-12


def test_normalized_variant_starts_at_one():
    sched = build_cosine_schedule(100, 0.008, normalize=True)
    assert sched.alpha_bar[0] == 1.0
    assert sched.alpha_bar[-1] == 0.0
    assert np.all(np.diff(sched.alpha_bar) < 0)


def test_contract_errors():
    with pytest.raises(ContractError):
        build_cosine_schedule(0, 0.008)
    with pytest.raises(ContractError):
        build_cosine_schedule(10, 0.0)
    with pytest.raises(ContractError):
        build_cosine_schedule(10, -1.0)


def test_check_t_bounds():
    sched = build_cosine_schedule(10, 0.008)
    sched.check_t(1)
    sched.check_t(10)
    with pytest.raises(ContractError):
        sched.check_t(0)
    with pytest.raises(ContractError):
        sched.check_t(11)
    with pytest.raises(ContractError):
        sched.check_t(np.array([1, 11]))


def test_derived_arrays_consistent():
    sched = build_cosine_schedule(50, 0.008)
    assert np.allclose(sched.alpha[1:], 1.0 - sched.beta[1:], atol=0)
    assert np.allclose(sched.sqrt_alpha_bar ** 2, sched.alpha_bar, atol=1e-15)
