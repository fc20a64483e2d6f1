import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchwall.environment import EnvModel, sample_env
from quenchwall.errors import InvalidInput, InvalidTilt
from quenchwall.laws import DensityLaw, FiniteLaw, GaussianLaw
from quenchwall.rng import RngStream
from quenchwall.tilt import (direct_growth_estimate, fast_growth_estimate, gaussian_tail,
                             gaussian_tail_bounds, growth_level, tilt, tilt_schedule,
                             tilted_mean_bracket_check, tilted_moments)


def test_bernoulli_tilt():
    t = tilt(FiniteLaw((0.0, 1.0), (0.5, 0.5)), 1.0)
    assert t.law.probs[1] == pytest.approx(math.e / (1 + math.e), rel=1e-14)
    assert t.psi == pytest.approx((1 + math.e) / 2, rel=1e-14)


def test_gaussian_tilt_is_shift():
    t = tilt(GaussianLaw(0.0, 1.0), 0.4)
    assert (t.law.mu, t.law.sigma2) == (pytest.approx(0.4), pytest.approx(1.0))
    assert t.mean == pytest.approx(0.4)
    assert tilt(GaussianLaw(), 0.0).law == GaussianLaw()


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.5))
def test_rademacher_tilted_mean_is_tanh(theta):
    m, v, _ = tilted_moments(FiniteLaw.rademacher(), theta)
    assert m == pytest.approx(math.tanh(theta), abs=1e-14)
    assert v == pytest.approx(1 - math.tanh(theta) ** 2, abs=1e-14)


def test_laplace_tilt_matches_asymmetric_laplace():
    # e^{theta x - |x|} normalised has mean 2 theta / (1 - theta^2)
    m, _, _ = tilted_moments(DensityLaw.laplace(1.0), 0.3)
    assert m == pytest.approx(0.6 / 0.91, rel=1e-8)
    with pytest.raises(InvalidTilt):
        tilt(DensityLaw.laplace(1.0), 1.5)


@pytest.mark.parametrize("law", [GaussianLaw(), FiniteLaw.rademacher(),
                                 FiniteLaw((-1.0, 2.0), (2 / 3, 1 / 3))])
def test_bracket_holds(law):
    rep = tilted_mean_bracket_check(law, np.linspace(0, 0.5, 11))
    assert rep.holds and rep.K > 0
    assert rep.c_low <= 1 + 1e-12 or rep.c_high >= 1 - 1e-12


def test_bracket_rejects_bad_input():
    with pytest.raises(InvalidTilt):
        tilted_mean_bracket_check(GaussianLaw(), [0.9])
    with pytest.raises(InvalidInput):
        tilted_mean_bracket_check(FiniteLaw((0.0, 1.0), (0.5, 0.5)), [0.1])


def test_tilt_schedule():
    b = tilt_schedule(10, 0.5)
    assert b[0] == 0 and b[1] == 0
    assert b[2] == pytest.approx(0.5 * math.log(math.log(3)) / math.sqrt(3))
    assert np.all(b >= 0)
    assert np.all(tilt_schedule(4, 0.5, "constant", b=0.2) == 0.2)
    with pytest.raises(InvalidInput):
        tilt_schedule(4, 0.5, "other")
    assert growth_level(2, 1.0) == 0.0


def test_gaussian_tail_values():
    lo, hi = gaussian_tail_bounds(1.0)
    assert lo == pytest.approx(0.1209853622596, rel=1e-10)
    assert hi == pytest.approx(0.2419707245191, rel=1e-10)
    assert gaussian_tail(1.0) == pytest.approx(0.1586552539315, rel=1e-10)
    assert gaussian_tail(3.0) == pytest.approx(0.0013498980316, rel=1e-9)
    with pytest.raises(InvalidInput):
        gaussian_tail_bounds(0.0)


def test_importance_sampler_matches_direct_mc():
    env = sample_env(EnvModel("two-point-random-bias", {"biases": [0.25, 0.75]}), 40, RngStream(21))
    N, c = 40, 0.8
    fast = fast_growth_estimate(env, N, c, 40_000, RngStream(22))
    direct = direct_growth_estimate(env, N, c, 200_000, RngStream(23))
    assert fast.flag == "" and direct.flag == ""
    assert abs(fast.log_p - direct.log_p) <= 4 * math.hypot(fast.stderr, direct.stderr)


def test_importance_sampler_on_gaussian_environment():
    env = sample_env(EnvModel("gaussian-random-mean", {"mean_var": 0.5, "step_var": 1.0}), 30, RngStream(24))
    fast = fast_growth_estimate(env, 30, 0.8, 40_000, RngStream(25))
    direct = direct_growth_estimate(env, 30, 0.8, 200_000, RngStream(26))
    assert abs(fast.log_p - direct.log_p) <= 4 * math.hypot(fast.stderr, direct.stderr)
