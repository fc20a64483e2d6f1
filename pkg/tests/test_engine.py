import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from quenchwall.engine import kernels
from quenchwall.engine.curves import EndWindow, SurvivalCurve
from quenchwall.engine.grid import (GaussianStep, GridConfig, GridDensity, LatticeStep, Process,
                                    grid_propagate, grid_survival)
from quenchwall.engine.oracle import (AllOf, Always, Atom, brute_force_survival, coordinate,
                                      fkg_brute_check, random_event)
from quenchwall.engine.smc import direct_mc_survival, smc_survival
from quenchwall.errors import SizeLimitError
from quenchwall.laws import FiniteLaw, GaussianLaw
from quenchwall.rng import RngStream, task_stream
from quenchwall.walls import Perturbation, WallSpec, realize_wall

PM1 = FiniteLaw.rademacher()


def _zero_walk_wall(n):
    return realize_wall(WallSpec("random-walk", beta=0.0, law=PM1), float(n), RngStream(0))


# ---------------------------------------------------------------- oracle

def test_enumeration_examples():
    assert brute_force_survival(PM1, [0, 0, 0], 1.0, 2, exact=True) == Fraction(3, 4)
    win = EndWindow(0.0, math.inf)
    assert brute_force_survival(PM1, [0, 0, 0], 1.0, 2, win, exact=True) == Fraction(1, 4)
    assert brute_force_survival(PM1, [0.0], 1.0, 0) == 1.0
    assert brute_force_survival(PM1, [2.0], 1.0, 0) == 0.0


def test_enumeration_float_matches_fractions():
    law = FiniteLaw((-1.0, 0.0, 2.0), (0.5, 0.25, 0.25))
    w = [0, 0, 1, 1, 2, 2, 3]
    f = brute_force_survival(law, w, 1.0, 6)
    q = brute_force_survival(law, w, 1.0, 6, exact=True)
    assert f == pytest.approx(float(q), rel=1e-14)


def test_fkg_example_and_trivial_cases():
    a = Atom((0.0, 1.0), 0.0)       # B_2 >= 0
    b = coordinate(1, 0.0, 2)       # B_1 >= 0
    p_ab, p_a, p_b, holds = fkg_brute_check(PM1, 2, a, b)
    assert (p_ab, p_a, p_b) == (0.5, 0.75, 0.5) and holds
    p_ab, p_a, p_b, _ = fkg_brute_check(PM1, 4, Always(), b.__class__((1.0, 1.0, 0.0, 0.0), 0.0))
    assert p_ab == pytest.approx(p_b)
    gen = np.random.default_rng(3)
    e = random_event(gen, 5)
    p_ab, p_a, _, holds = fkg_brute_check(PM1, 5, e, e)
    assert p_ab == pytest.approx(p_a) and holds
    with pytest.raises(SizeLimitError):
        fkg_brute_check(PM1, 13, e, e)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fkg_on_random_increasing_events(seed):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(2, 9))
    _, _, _, holds = fkg_brute_check(PM1, n, random_event(gen, n), random_event(gen, n))
    assert holds


# ---------------------------------------------------------------- grid

def test_lattice_step_two_steps():
    s = GridDensity.point(1.0, 1.0, exact=True)
    st_ = LatticeStep.from_law(PM1)
    for _ in range(2):
        s = grid_propagate(s, st_, 0.0, 0.0)
    assert s.total == pytest.approx(0.75, rel=1e-15)


def test_unconstrained_step_keeps_mass():
    s = GridDensity.point(0.0, 0.01)
    s2 = grid_propagate(s, GaussianStep.walk(1.0), -math.inf, -math.inf)
    assert s2.log_mass_total == pytest.approx(0.0, abs=1e-12)
    x = s2.positions
    assert float(np.dot(s2.masses, x)) == pytest.approx(0.0, abs=1e-10)
    assert float(np.dot(s2.masses, x * x)) == pytest.approx(1.0, rel=1e-4)


def test_single_gaussian_step_with_and_without_bridge():
    s = GridDensity.point(1.0, 0.002)
    cell = grid_propagate(s, GaussianStep.walk(1.0), 0.0, 0.0, GridConfig(dx=0.002))
    assert cell.total == pytest.approx(0.8413447460685429, abs=2e-6)
    bridged = grid_propagate(s, GaussianStep.bm(1.0, bridge=True), 0.0, 0.0, GridConfig(dx=0.002))
    # P(min of BM over [0, 1] > -1) = 2 Phi(1) - 1
    assert bridged.total < cell.total
    assert bridged.total == pytest.approx(math.erf(1 / math.sqrt(2)), abs=2e-5)


@pytest.mark.parametrize("x0", [0.5, 1.0, 2.0])
def test_zero_wall_bm_matches_ballot_formula(x0):
    hs = [2.0**k for k in range(0, 9)]
    wall = realize_wall(WallSpec("zero", grid="graded"), hs[-1], RngStream(0))
    curve = grid_survival(wall, x0, hs)
    exact = np.log([math.erf(x0 / math.sqrt(2 * h)) for h in hs])
    assert np.allclose(curve.logp, exact, rtol=2e-3, atol=0)


def test_ou_one_sided_survival_matches_quadrature():
    # independent route: P(OU from x stays above 0 up to t) via reflection
    # of the OU transition density, integrated numerically
    mu, x0, t = 1.0, 1.0, 2.0
    m = math.exp(-mu * t)
    v = (1 - math.exp(-2 * mu * t)) / (2 * mu)

    def dens(y, c):
        return math.exp(-(y - c) ** 2 / (2 * v)) / math.sqrt(2 * math.pi * v)

    exact, _ = integrate.quad(lambda y: dens(y, m * x0) - dens(y, -m * x0), 0, math.inf, epsabs=1e-13)
    wall = realize_wall(WallSpec("zero", dt=2.0**-7), t, RngStream(0))
    lp = grid_survival(wall, x0, [t], process=Process("ou", mu, 1.0), config=GridConfig(dx=0.005)).logp[0]
    assert math.exp(lp) == pytest.approx(exact, rel=2e-3)


def test_window_full_range_equals_no_window_on_constant_scale():
    wall = realize_wall(WallSpec("scaled-brownian", grid="graded"), 64.0, RngStream(3))
    hs = [4.0, 16.0, 64.0]
    a = grid_survival(wall, 1.0, hs)
    b = grid_survival(wall, 1.0, hs, EndWindow(0.0, math.inf, "constant"))
    # the window readout splits the edge cell, so agreement is to quadrature accuracy
    assert np.allclose(a.logp, b.logp, rtol=0, atol=1e-6)


def random_discrete_instance(seed):
    gen = np.random.default_rng(seed)
    k = int(gen.integers(2, 4))
    vals = np.sort(gen.choice(np.arange(-2, 3), size=k, replace=False)).astype(float)
    pr = gen.dirichlet(np.ones(k))
    law = FiniteLaw(tuple(vals), tuple(pr / pr.sum()))
    wl = FiniteLaw((-1.0, 1.0), (0.5, 0.5))
    n = int(gen.integers(1, 11 if k == 3 else 17))
    return law, wl, n, float(gen.integers(0, 3)), float(gen.choice([0.5, 1.0]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_grid_matches_enumeration(seed):
    law, wl, n, x0, beta = random_discrete_instance(seed)
    wall = realize_wall(WallSpec("random-walk", beta=beta, law=wl), float(n), RngStream(seed))
    exact = brute_force_survival(law, wall.barrier(), x0, n)
    lp = grid_survival(wall, x0, [float(n)], process=Process("walk", law=law)).logp[0]
    p = math.exp(lp) if lp > -math.inf else 0.0
    assert abs(p - exact) <= 1e-12 * max(exact, 1e-300) or (exact == 0 and p == 0)


def test_infeasible_instance_dies_at_blocking_horizon():
    wall_law = FiniteLaw((2.0, 3.0), (0.5, 0.5))
    wall = realize_wall(WallSpec("random-walk", beta=1.0, law=wall_law), 8.0, RngStream(1))
    curve = grid_survival(wall, 1.0, [1.0, 2.0, 4.0, 8.0], process=Process("walk", law=PM1))
    # the all-up path 1 + n falls below the wall (>= 2n) at n = 1 or 2
    assert curve.logp[-1] == -math.inf
    assert curve.died


def test_raising_the_barrier_never_helps():
    wall = realize_wall(WallSpec("scaled-brownian", grid="graded"), 64.0, RngStream(5))
    hs = [8.0, 32.0, 64.0]
    base = grid_survival(wall, 1.0, hs)
    up = grid_survival(wall, 1.0, hs, barrier=wall.barrier() + 0.1)
    down_spec = WallSpec("scaled-brownian", grid="graded", perturbation=Perturbation(amplitude=-1.0, eps=0.1))
    down = grid_survival(realize_wall(down_spec, 64.0, RngStream(5)), 1.0, hs)
    assert np.all(up.logp <= base.logp + 1e-12)
    assert np.all(down.logp >= base.logp - 1e-12)


def test_mixing_barriers_is_convex():
    w1 = realize_wall(WallSpec("scaled-brownian", grid="graded"), 32.0, RngStream(6))
    w2 = realize_wall(WallSpec("scaled-brownian", grid="graded"), 32.0, RngStream(7))
    h1, h2 = w1.barrier(), w2.barrier()
    lams = [0.0, 0.25, 0.5, 0.75, 1.0]
    cost = [-grid_survival(w1, 3.0, [32.0], barrier=l * h1 + (1 - l) * h2).logp[0] for l in lams]
    chord = [l * cost[-1] + (1 - l) * cost[0] for l in lams]
    assert all(c <= ch + 1e-6 for c, ch in zip(cost, chord))


def test_survival_is_non_increasing():
    wall = realize_wall(WallSpec("scaled-brownian", grid="graded"), 256.0, RngStream(8))
    lp = grid_survival(wall, 1.0, [2.0**k for k in range(9)]).logp
    assert np.all(np.diff(lp) <= 1e-12)


def test_backends_agree():
    b = kernels.backends()
    if "compiled" not in b:
        pytest.skip("compiled kernel not built")
    wall = realize_wall(WallSpec("scaled-brownian", grid="graded"), 64.0, RngStream(9))
    hs = [4.0, 16.0, 64.0]
    a = grid_survival(wall, 1.0, hs, config=GridConfig(backend="python"))
    c = grid_survival(wall, 1.0, hs, config=GridConfig(backend="compiled"))
    assert np.allclose(a.logp, c.logp, rtol=1e-12, atol=1e-12)


def test_curve_csv_roundtrip():
    c = SurvivalCurve(wall_id=3, seed=5)
    c.append(1.0, -0.1, 0.01)
    c.append(2.0, -math.inf, 0.0, "grid", "died")
    back = SurvivalCurve.from_csv(c.to_csv())
    assert len(back) == 1 and back[0].logp.tolist() == [-0.1, -math.inf]
    assert "quenchwall.curve/1" in c.to_csv()


# ---------------------------------------------------------------- particles

def test_smc_matches_enumeration():
    n, x0 = 8, 2.0
    wall = _zero_walk_wall(n)
    exact = float(brute_force_survival(PM1, np.zeros(n + 1), x0, n))
    # 20 replicates so the estimated stderr is itself reliable
    c = smc_survival(wall, x0, [float(n)], None, 5000, RngStream(1), Process("walk", law=PM1), replicates=20)
    assert abs(c.logp[0] - math.log(exact)) <= 4 * c.stderr[0]


def test_smc_single_particle_and_determinism():
    wall = realize_wall(WallSpec("random-walk", beta=0.0, law=PM1), 4.0, RngStream(0))
    c = smc_survival(wall, 100.0, [4.0], None, 1, RngStream(2), Process("walk", law=PM1))
    assert c.logp[0] == 0.0 and c.entries[0].flag == "low-ess" and math.isnan(c.stderr[0])
    w = realize_wall(WallSpec("scaled-brownian", grid="graded"), 16.0, RngStream(3))
    a = smc_survival(w, 1.0, [4.0, 16.0], None, 500, task_stream(1, 0), replicates=2)
    b = smc_survival(w, 1.0, [4.0, 16.0], None, 500, task_stream(1, 0), replicates=2)
    assert a.to_csv() == b.to_csv()


def test_smc_mean_consistent_with_grid_on_gaussian_instance():
    w = realize_wall(WallSpec("scaled-brownian", grid="graded", dt=2.0**-4), 64.0, RngStream(4))
    g = grid_survival(w, 1.0, [64.0]).logp[0]
    c = smc_survival(w, 1.0, [64.0], None, 1000, RngStream(5), replicates=50)
    assert abs(c.logp[0] - g) <= 3 * c.stderr[0] + 0.01


def test_direct_mc_matches_enumeration_and_certain_event():
    n = 6
    wall = _zero_walk_wall(n)
    exact = float(brute_force_survival(PM1, np.zeros(n + 1), 1.0, n))
    c = direct_mc_survival(wall, 1.0, [float(n)], None, 200_000, RngStream(6), Process("walk", law=PM1))
    assert abs(math.exp(c.logp[0]) - exact) <= 3 * math.sqrt(exact * (1 - exact) / 200_000)
    sure = direct_mc_survival(wall, 1.0, [float(n)], None, 1000, RngStream(7), Process("walk", law=PM1),
                              barrier=-math.inf)
    assert sure.logp[0] == 0.0
