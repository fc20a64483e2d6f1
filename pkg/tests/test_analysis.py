import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchwall.analysis import (ExponentFit, QuenchedAggregate, aggregate_quenched, convexity_midpoint,
                                 disorder_relevance_report, fit_exponent, fits_from_jsonl, fits_to_jsonl,
                                 jensen_check, joint_agreement, scan_beta, window_robustness)
from quenchwall.engine.curves import SurvivalCurve
from quenchwall.errors import InvalidInput


def _curve(hs, logp, se=None):
    c = SurvivalCurve()
    for i, (h, lp) in enumerate(zip(hs, logp)):
        c.append(float(h), float(lp), 0.0 if se is None else float(se[i]))
    return c


HS = 2.0 ** np.arange(1, 11)


def test_exact_power_law_is_recovered():
    f = fit_exponent(_curve(HS, -(0.7 * np.log(HS) + 0.3)))
    assert f.gamma_hat == pytest.approx(0.7, abs=1e-12)
    assert f.r2 == pytest.approx(1.0)
    g = fit_exponent(_curve(HS, -(0.7 * np.log(HS) + 0.2 + 1.5 / HS)), window=(2, 1024), correction=1.0)
    assert g.gamma_hat == pytest.approx(0.7, abs=1e-12)


def test_time_scale_fit():
    hs = np.arange(10.0, 110.0, 10.0)
    f = fit_exponent(_curve(hs, -0.25 * hs - 1.0), scale="time")
    assert f.gamma_hat == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(InvalidInput):
        fit_exponent(_curve(hs, -0.25 * hs), scale="time", correction=1.0)


def test_infeasible_and_short_curves():
    lp = -(0.5 * np.log(HS))
    lp[-1] = -math.inf
    f = fit_exponent(_curve(HS, lp))
    assert f.infeasible and f.gamma_hat == math.inf
    with pytest.raises(InvalidInput):
        fit_exponent(_curve(HS[:3], -np.log(HS[:3])), window=(2, 8))


def test_window_robustness_flags_curvature():
    curved = _curve(HS, -(0.5 * np.log(HS) + 5 / HS))
    assert window_robustness(curved).passed is False


def _fit(g, se=0.01, i=0):
    return ExponentFit(g, se, "log-time", (1.0, 2.0), 1.0, 5, wall_id=i)


def test_single_wall_aggregate_is_degenerate():
    agg = aggregate_quenched([_fit(0.6)])
    assert agg.mean == 0.6 and agg.ci95 == (0.6, 0.6) and agg.halfwidth == 0


def test_aggregate_excludes_infeasible():
    fits = [_fit(0.5), _fit(0.7), ExponentFit(math.inf, 0.0, "log-time", (1.0, 2.0), math.nan, 5, True)]
    agg = aggregate_quenched(fits)
    assert agg.excluded == 1 and agg.mean == pytest.approx(0.6)
    with pytest.raises(InvalidInput):
        aggregate_quenched(fits[2:])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 2.0), min_size=2, max_size=12), st.randoms(use_true_random=False))
def test_aggregate_is_order_independent(gs, rnd):
    fits = [_fit(g, 0.001, i) for i, g in enumerate(gs)]
    shuffled = list(fits)
    rnd.shuffle(shuffled)
    a, b = aggregate_quenched(fits), aggregate_quenched(shuffled)
    assert a.mean == b.mean and a.ci95 == b.ci95
    assert a.ci95[0] <= a.mean <= a.ci95[1]


def test_fit_jsonl_roundtrip():
    fits = [_fit(0.5, 0.01, 0), _fit(0.6, 0.02, 1)]
    assert fits_from_jsonl(fits_to_jsonl(fits)) == fits


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jensen_holds_on_any_sample(seed):
    gen = np.random.default_rng(seed)
    logp = -gen.exponential(3.0, size=(int(gen.integers(1, 20)), 5))
    assert jensen_check(logp).all()


def _agg(mean, half):
    return QuenchedAggregate([], mean, (mean - half, mean + half), 10)


def test_joint_agreement_is_stricter_than_overlap():
    a, b = _agg(1.0, 0.1), _agg(1.18, 0.1)
    assert a.overlaps(b)
    ok, diff, half = joint_agreement(a, b)
    assert not ok and diff == pytest.approx(-0.18) and half == pytest.approx(math.sqrt(0.02))
    ok, _, _ = joint_agreement(_agg(2.0, 0.1), _agg(1.05, 0.1), scale_a=0.5)
    assert ok


def test_scan_beta_verdicts():
    table = {-1.0: _agg(0.9, 0.1), 0.0: _agg(0.5, 0.01), 1.0: _agg(0.85, 0.1), 2.0: _agg(1.5, 0.2)}
    scan = scan_beta(table.keys(), table)
    assert scan.verdict("symmetry").passed
    assert scan.verdict("convexity").passed
    assert scan.verdict("monotone").passed
    ok, info = convexity_midpoint(table[0.0], _agg(1.5, 0.01), table[2.0])
    assert not ok and info["gap"] == pytest.approx(0.5)


def test_disorder_relevance_checks_parameters():
    q = _agg(1.3, 0.1)
    assert disorder_relevance_report(q, 1.0).passed
    with pytest.raises(InvalidInput):
        disorder_relevance_report(q, 1.0, {"mu1": 1.0}, {"mu1": 2.0})
