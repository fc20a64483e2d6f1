import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchwall.errors import InvalidInput, OutOfRange
from quenchwall.paths import (OuParams, PathSample, TimeGrid, bridge_noncrossing, ou_from_bm,
                              sample_bm, sample_ou)
from quenchwall.rng import RngStream, task_stream


def test_degenerate_grid():
    path = sample_bm(TimeGrid([0.0]), RngStream(1))
    assert path.values.tolist() == [0.0]


def test_bm_moments_at_two():
    x = sample_bm(TimeGrid([0.0, 1.0, 2.0]), RngStream(2), size=100_000)[:, 2]
    n = x.size
    assert abs(x.mean()) < 3 * math.sqrt(2 / n)
    # Var of the sample variance of N(0, 2) is 2 * 2^2 / (n - 1)
    assert abs(x.var(ddof=1) - 2.0) < 3 * math.sqrt(8 / (n - 1))


def test_bm_determinism():
    g = TimeGrid.uniform(4.0, 0.25)
    a = sample_bm(g, task_stream(7, 3))
    b = sample_bm(g, task_stream(7, 3))
    c = sample_bm(g, task_stream(7, 4))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_graded_grid_contains_dyadic_horizons():
    g = TimeGrid.graded(64.0, 2.0**-4)
    for k in range(7):
        assert g.index_of(2.0**k) >= 0
    assert g.times[0] == 0 and g.times[-1] == 64.0
    assert np.all(np.diff(g.times) > 0)


def test_ou_transition_closed_form():
    mean, var = OuParams(1.0, 1.0).transition(2.0, math.log(2))
    assert mean == pytest.approx(1.0, abs=1e-15)
    assert var == pytest.approx(0.375, abs=1e-15)


def test_ou_stationary_variance():
    p = OuParams(1.0, 1.0)
    x = sample_ou(p, 0.0, TimeGrid([0.0, 50.0]), RngStream(5), size=100_000)[:, -1]
    n = x.size
    assert abs(x.var(ddof=1) - 0.5) < 3 * math.sqrt(2 * 0.25 / (n - 1))


def test_ou_noiseless_limit():
    mean, var = OuParams(0.7, 1e-12).transition(3.0, 2.0)
    assert mean == pytest.approx(3.0 * math.exp(-1.4), rel=1e-14)
    assert var < 1e-20


@pytest.mark.parametrize("mu,sigma,dt", [(1.0, 1.0, 0.1), (0.5, 2.0, 1.0), (2.0, 0.5, 0.01)])
def test_ou_one_step_moments(mu, sigma, dt):
    x0 = 1.5
    x = sample_ou(OuParams(mu, sigma), x0, TimeGrid([0.0, dt]), RngStream(11), size=100_000)[:, -1]
    m = x0 * math.exp(-mu * dt)
    v = sigma**2 / (2 * mu) * (1 - math.exp(-2 * mu * dt))
    n = x.size
    assert abs(x.mean() - m) < 4 * math.sqrt(v / n)
    assert abs(x.var(ddof=1) - v) < 4 * v * math.sqrt(2 / (n - 1))


def test_ou_from_bm_time_zero_and_law():
    bm = sample_bm(TimeGrid.uniform(2.0, 2.0**-6), RngStream(3))
    assert ou_from_bm(0.8, 0.5, 1.0, 0.0, bm) == pytest.approx(0.8)
    # x = 0, mu = 1/2: exp(-t/2) N(0, e^t - 1) = N(0, 1 - e^-t)
    t = 1.0
    paths = sample_bm(TimeGrid([0.0, math.expm1(t)]), RngStream(4), size=50_000)
    vals = np.exp(-t / 2) * paths[:, -1]
    target = 1 - math.exp(-t)
    assert abs(vals.var(ddof=1) - target) < 4 * target * math.sqrt(2 / vals.size)
    ref = sample_ou(OuParams(0.5, 1.0), 0.0, TimeGrid([0.0, t]), RngStream(5), size=50_000)[:, -1]
    from scipy.stats import ks_2samp
    assert ks_2samp(vals, ref).pvalue > 0.01


def test_ou_from_bm_depends_on_mu_and_checks_range():
    bm = sample_bm(TimeGrid.uniform(10.0, 2.0**-4), RngStream(6))
    assert ou_from_bm(1.0, 0.3, 1.0, 1.0, bm) != ou_from_bm(1.0, 0.6, 1.0, 1.0, bm)
    with pytest.raises(OutOfRange):
        ou_from_bm(1.0, 1.0, 1.0, 5.0, bm)


def test_bridge_examples():
    assert bridge_noncrossing(1.0, 1.0, 1.0, 1.0) == pytest.approx(1 - math.exp(-2), rel=1e-15)
    assert bridge_noncrossing(0.0, 1.0, 1.0, 1.0) == 0.0
    assert bridge_noncrossing(3.0, 3.0, 0.01, 1.0) == 1.0
    with pytest.raises(InvalidInput):
        bridge_noncrossing(1.0, 1.0, 0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-4, 10), st.floats(0.1, 4))
def test_bridge_is_a_probability_and_monotone(a, b, dt, v):
    p = bridge_noncrossing(a, b, dt, v)
    assert 0.0 <= p <= 1.0
    assert bridge_noncrossing(a + 0.1, b, dt, v) >= p


def test_bridge_matches_simulated_bridges():
    # independent route: simulate Brownian bridges on a fine grid
    gen = np.random.default_rng(0)
    n, m, a, b = 20_000, 400, 0.5, 0.7
    t = np.linspace(0, 1, m + 1)
    w = np.concatenate([np.zeros((n, 1)), np.cumsum(gen.standard_normal((n, m)) / math.sqrt(m), axis=1)], axis=1)
    bridge = a + w - t * w[:, -1:] + t * (b - a)
    frac = float(np.mean(bridge.min(axis=1) > 0))
    exact = bridge_noncrossing(a, b, 1.0, 1.0)
    # discrete monitoring overstates survival slightly
    assert exact - 0.02 < frac < exact + 0.04


def test_path_value_at_interpolates():
    p = PathSample(TimeGrid([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
    assert p.value_at(0.5) == pytest.approx(1.0)
    assert p.scaled(3.0).values.tolist() == [0.0, 6.0, 0.0]
