import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchwall.engine.oracle import exhaustive_feasible
from quenchwall.errors import InvalidSpec
from quenchwall.laws import FiniteLaw, GaussianLaw
from quenchwall.rng import RngStream, task_stream
from quenchwall.walls import (Perturbation, WallRealization, WallSpec, check_feasibility,
                              check_realization, realize_wall, wall_segment)


def test_zero_wall():
    w = realize_wall(WallSpec("zero"), 10.0, RngStream(0))
    assert np.all(w.values.values == 0)


def test_scaled_brownian_is_beta_times_underlying():
    w = realize_wall(WallSpec("scaled-brownian", beta=2.0), 4.0, RngStream(1))
    assert np.array_equal(w.values.values, 2.0 * w.underlying.values)


def test_scaling_consistency_across_beta():
    a = realize_wall(WallSpec("scaled-brownian", beta=0.5), 4.0, RngStream(9))
    b = realize_wall(WallSpec("scaled-brownian", beta=3.0), 4.0, RngStream(9))
    assert np.allclose(a.values.values / 0.5, b.values.values / 3.0, rtol=0, atol=1e-14)


def test_iid_wall_lag_one_correlation():
    w = realize_wall(WallSpec("iid", law=GaussianLaw()), 10_000.0, RngStream(2))
    v = w.values.values[1:]
    r = np.corrcoef(v[:-1], v[1:])[0, 1]
    assert abs(r) < 4 / math.sqrt(v.size)


def test_realization_determinism_and_json_roundtrip():
    spec = WallSpec("scaled-ou", beta=1.5, mu=0.7)
    a = realize_wall(spec, 8.0, task_stream(3, 1))
    b = realize_wall(spec, 8.0, task_stream(3, 1))
    assert np.array_equal(a.values.values, b.values.values)
    c = WallRealization.from_json(a.to_json())
    assert np.array_equal(a.values.values, c.values.values)


def test_feasibility_examples():
    pm1 = FiniteLaw.rademacher()
    assert check_feasibility(pm1, WallSpec("random-walk", law=pm1), 1.0).status == "always-feasible"
    pm2 = FiniteLaw((-2.0, 2.0), (0.5, 0.5))
    assert check_feasibility(pm1, WallSpec("random-walk", law=pm2), 1.0).status == "infeasible"
    assert check_feasibility(GaussianLaw(), WallSpec("random-walk", law=pm2), 1.0).feasible


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.integers(0, 3))
def test_realization_check_matches_exhaustive_search(seed, n, x):
    b_law = FiniteLaw((-1.0, 1.0), (0.5, 0.5))
    w_law = FiniteLaw((-1.0, 2.0), (0.5, 0.5))
    wall = realize_wall(WallSpec("random-walk", law=w_law), float(n), RngStream(seed))
    fast = check_realization(1.0, wall.barrier(), float(x)).feasible
    assert fast == exhaustive_feasible(b_law, wall.barrier(), float(x), n)


def test_perturbation_values():
    f = Perturbation(amplitude=1.0, eps=0.1)
    assert f(16.0) == pytest.approx(16**0.4)
    spec = WallSpec("scaled-brownian", beta=1.0, perturbation=f)
    w = realize_wall(spec, 16.0, RngStream(4))
    assert w.barrier([16.0])[0] == pytest.approx(w.values.value_at(16.0) + 3.0314331, abs=1e-6)
    with pytest.raises(InvalidSpec):
        Perturbation(amplitude=1.0, eps=0.6)


def test_wall_segment_starts_at_zero():
    w = realize_wall(WallSpec("scaled-ou"), 10.0, RngStream(5))
    seg = wall_segment(w, 2.0, 5.0, extra_times=[3.3])
    assert seg.grid.times[0] == 0.0 and seg.grid.times[-1] == pytest.approx(3.0)
    s = np.array([0.0, 0.37, 1.3, 2.9, 3.0])
    assert np.allclose(seg.values.value_at(s), w.values.value_at(s + 2.0), rtol=0, atol=1e-12)
    assert seg.grid.index_of(1.3) >= 0


def test_invalid_specs():
    with pytest.raises(InvalidSpec):
        WallSpec("nope")
    with pytest.raises(InvalidSpec):
        WallSpec("random-walk")
    with pytest.raises(InvalidSpec):
        WallSpec("scaled-brownian", beta=math.inf)
