import math

import numpy as np
import pytest

from quenchwall.environment import EnvModel, sample_env
from quenchwall.errors import InvalidModel
from quenchwall.laws import DensityLaw, FiniteLaw, GaussianLaw, law_from_dict, law_to_dict
from quenchwall.rng import RngStream


def test_finite_law_moments_and_tilt():
    law = FiniteLaw((-1.0, 2.0), (2 / 3, 1 / 3))
    assert law.mean == pytest.approx(0.0, abs=1e-15)
    assert law.var == pytest.approx(2.0)
    t = law.tilted(0.3)
    z = 2 / 3 * math.exp(-0.3) + 1 / 3 * math.exp(0.6)
    assert t.probs[1] == pytest.approx(1 / 3 * math.exp(0.6) / z, rel=1e-14)
    assert law.log_psi(0.3) == pytest.approx(math.log(z), rel=1e-14)


def test_gaussian_law_tilt():
    t = GaussianLaw(0.0, 1.0).tilted(0.7)
    assert (t.mu, t.sigma2) == (pytest.approx(0.7), pytest.approx(1.0))
    assert GaussianLaw(0.0, 1.0).log_psi(0.7) == pytest.approx(0.245)


def test_laplace_moments():
    lap = DensityLaw.laplace(1.0)
    assert lap.mean == pytest.approx(0.0, abs=1e-10)
    assert lap.var == pytest.approx(2.0, rel=1e-8)
    # E exp(theta X) = 1 / (1 - theta^2) for |theta| < 1
    assert lap.log_psi(0.4) == pytest.approx(-math.log(1 - 0.16), rel=1e-8)


def test_law_dict_roundtrip():
    for law in (FiniteLaw((-1.0, 1.0), (0.5, 0.5)), GaussianLaw(0.2, 3.0)):
        assert law_from_dict(law_to_dict(law)) == law


def test_two_point_environment_conditional_means():
    m = EnvModel("two-point-random-bias", {"biases": [0.25, 0.75]})
    env = sample_env(m, 2000, RngStream(1))
    assert set(np.round(env.cond_means, 12)) == {-0.5, 0.5}
    assert np.allclose(np.diff(env.wall), -env.cond_means, atol=0)
    # W increments are minus the conditional means, exactly
    assert np.array_equal(env.wall[1:], np.cumsum(-env.cond_means))


def test_degenerate_gaussian_environment():
    m = EnvModel("gaussian-random-mean", {"mean_var": 0.0, "step_var": 1.0})
    env = sample_env(m, 100, RngStream(2))
    assert np.all(env.wall == 0)
    assert m.w_var == 0 and m.ratio == 0


def test_unit_ratio_environment():
    r = 1 / math.sqrt(2)
    m = EnvModel("two-point-random-bias", {"biases": [(1 - r) / 2, (1 + r) / 2]})
    assert m.b_var == pytest.approx(0.5)
    assert m.w_var == pytest.approx(0.5)
    assert m.ratio == pytest.approx(1.0)


def test_environment_b_is_centred():
    m = EnvModel("two-point-random-bias", {"biases": [0.25, 0.75]})
    env = sample_env(m, 50, RngStream(3))
    b = env.sample_b(RngStream(4), 40_000)
    assert abs(b[:, -1].mean()) < 4 * math.sqrt(m.b_var * 50 / 40_000)


def test_invalid_environment():
    with pytest.raises(InvalidModel):
        EnvModel("two-point-random-bias", {"biases": [1.5]})
    with pytest.raises(InvalidModel):
        EnvModel("no-such-family", {})
