"""The acceptance suite.

One check per criterion, shared by ``quenchwall validate`` and the test
suite.  Checks that compare experiments (the beta scan, the OU block
estimates) share them through a :class:`Suite` cache, so each experiment
runs once per suite.  Every log-time fit uses the ``N^-1`` correction
regressor; every experiment has a fixed seed listed in :data:`SEEDS`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
import time
from typing import Callable, Optional, Sequence

import numpy as np

from ..analysis import convexity_midpoint, joint_agreement
from ..engine.curves import EndWindow
from ..engine.grid import GridConfig, Process, grid_survival
from ..engine.oracle import brute_force_survival, fkg_brute_check, random_event
from ..engine.smc import smc_survival
from ..environment import EnvModel
from ..excursions import block_logprob, decompose
from ..laws import FiniteLaw, GaussianLaw, law_to_dict
from ..rng import ROLE_MC, ROLE_SMC, ROLE_WALL, task_stream
from ..spectral import solve
from ..tilt import gaussian_tail, gaussian_tail_bounds, theta_max, tilted_mean_bracket_check
from ..walls import WallSpec, check_feasibility, check_realization, realize_wall
from .config import ExperimentConfig
from .runner import RunRecord, run_experiment

CRITERION_SCHEMA = "quenchwall.criterion/1"

# fixed before any run; one seed per experiment
SEEDS = {
    "ballot": 101, "iid": 102, "bm+1": 103, "bm-1": 104, "bm0": 105, "bm+2": 106,
    "ou-blocks": 107, "env": 108, "oracle": 110, "subadditive": 111, "fkg": 112,
    "infeasible": 115,
}
CORRECTION = 1.0
QUENCHED_WALLS = 40
OU_WALLS = 20
OU_HORIZON = 1000.0
# the two-point bias environment with Var W = Var B = 1/2
_R = 1 / math.sqrt(2)
ENV_UNIT_RATIO = {"family": "two-point-random-bias", "params": {"biases": [(1 - _R) / 2, (1 + _R) / 2]}}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: Optional[float] = None

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"schema": CRITERION_SCHEMA, "number": self.number, "name": self.name,
                "passed": self.passed, "detail": self.detail, "seconds": self.seconds,
                "budget": self.budget}


@dataclass
class Suite:
    """Experiment cache plus the worker count."""

    jobs: int = 1
    records: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def record(self, key: str, config: ExperimentConfig) -> RunRecord:
        if key not in self.records:
            self.records[key] = run_experiment(config, jobs=self.jobs)
        return self.records[key]

    def bm(self, beta: float) -> RunRecord:
        key = {1.0: "bm+1", -1.0: "bm-1", 0.0: "bm0", 2.0: "bm+2"}[float(beta)]
        cfg = ExperimentConfig(name=f"accept-{key}", process="bm",
                               wall={"kind": "scaled-brownian", "grid": "graded"}, beta=float(beta),
                               horizon_min=4, horizon_max=4096, n_walls=QUENCHED_WALLS,
                               seed=SEEDS[key], fit_correction=CORRECTION)
        return self.record(key, cfg)

    def ou_blocks(self) -> RunRecord:
        cfg = ExperimentConfig(name="accept-ou-blocks", process="ou",
                               wall={"kind": "scaled-ou", "mu": 1.0, "sigma": 1.0}, beta=1.0,
                               horizons=[OU_HORIZON], estimator="kingman", fit_scale="time",
                               n_walls=OU_WALLS, seed=SEEDS["ou-blocks"])
        return self.record("ou-blocks", cfg)

    def delta_ou(self) -> float:
        if "delta" not in self.extras:
            self.extras["delta"] = solve(1.0, 1.0, 1.0).lambda1
        return self.extras["delta"]


def _ci(agg) -> str:
    return f"{agg.mean:.4f} [{agg.ci95[0]:.4f}, {agg.ci95[1]:.4f}]"


# ---------------------------------------------------------------- criteria

def c01_ballot(suite: Suite):
    cfg = ExperimentConfig(name="accept-ballot", process="bm", wall={"kind": "zero", "grid": "graded"},
                           horizon_min=64, horizon_max=4096, n_walls=1, seed=SEEDS["ballot"],
                           fit_window=[64, 4096], fit_correction=CORRECTION)
    fit = suite.record("ballot", cfg).fits[0]
    ok = abs(fit.gamma_hat - 0.5) <= 0.02
    return ok, f"gamma(0) = {fit.gamma_hat:.5f}, target 0.50 +- 0.02"


def c02_iid(suite: Suite):
    gauss = law_to_dict(GaussianLaw(0.0, 1.0))
    cfg = ExperimentConfig(name="accept-iid", process="rw", walk_law=gauss,
                           wall={"kind": "iid", "law": gauss}, horizon_min=16, horizon_max=4096,
                           n_walls=QUENCHED_WALLS, seed=SEEDS["iid"], fit_correction=CORRECTION)
    agg = suite.record("iid", cfg).aggregate
    return agg.contains(0.5), f"aggregate {_ci(agg)} contains 0.5: {agg.contains(0.5)}"


def c03_relevance(suite: Suite):
    agg = suite.bm(1.0).aggregate
    return agg.ci95[0] > 0.5, f"gamma(1) {_ci(agg)}, lower bound > 0.5"


def c04_symmetry(suite: Suite):
    a, b = suite.bm(1.0).aggregate, suite.bm(-1.0).aggregate
    return a.overlaps(b), f"gamma(1) {_ci(a)} vs gamma(-1) {_ci(b)}"


def c05_convexity(suite: Suite):
    left, mid, right = (suite.bm(b).aggregate for b in (0.0, 1.0, 2.0))
    ok, info = convexity_midpoint(left, mid, right)
    return ok, (f"gamma(1) - (gamma(0) + gamma(2))/2 = {info['gap']:.4f} <= slack {info['slack']:.4f}; "
                f"gamma(0) {left.mean:.4f}, gamma(2) {right.mean:.4f}")


def c06_spectral(suite: Suite):
    parts, ok = [], True
    for mu, beta in ((1.0, 1.0), (2.0, 0.5), (0.5, 1.0)):
        t0 = time.perf_counter()
        res = solve(mu, mu, beta)
        dt = time.perf_counter() - t0
        good = abs(res.lambda1 - mu) <= 0.02 * mu and dt < 120
        ok &= good
        parts.append(f"({mu:g},{mu:g},{beta:g}) -> {res.lambda1:.5f} in {dt:.1f}s")
    return ok, "; ".join(parts)


def c07_quenched_vs_annealed(suite: Suite):
    agg = suite.ou_blocks().aggregate
    delta = suite.delta_ou()
    return agg.ci95[0] > delta, f"gamma_11(1) {_ci(agg)} vs spectral delta {delta:.5f}"


def c08_bm_ou_bridge(suite: Suite):
    ou, bm = suite.ou_blocks().aggregate, suite.bm(1.0).aggregate
    ok, diff, half = joint_agreement(ou, bm, scale_a=0.5)
    return ok, (f"gamma_11(1)/2 = {ou.mean / 2:.4f} vs gamma(1) = {bm.mean:.4f}; "
                f"|diff| {abs(diff):.4f} <= joint half-width {half:.4f}")


def c09_ratio_invariance(suite: Suite):
    model = EnvModel.from_dict(ENV_UNIT_RATIO)
    cfg = ExperimentConfig(name="accept-env", process="rw-env",
                           wall={"kind": "environment", "env": ENV_UNIT_RATIO}, beta=1.0,
                           horizon_min=4, horizon_max=4096, n_walls=QUENCHED_WALLS,
                           seed=SEEDS["env"], fit_correction=CORRECTION)
    env = suite.record("env", cfg).aggregate
    bm = suite.bm(1.0).aggregate
    ok, diff, half = joint_agreement(env, bm)
    ok &= math.isclose(model.ratio, 1.0, rel_tol=1e-12)
    return ok, (f"ratio {model.ratio:.6f}: env {_ci(env)} vs bm {_ci(bm)}; "
                f"|diff| {abs(diff):.4f} <= {half:.4f}")


def random_instance(gen):
    """A small walk-over-wall problem on a common integer lattice."""
    k = int(gen.integers(2, 4))
    vals = np.sort(gen.choice(np.arange(-2, 3), size=k, replace=False)).astype(float)
    probs = gen.dirichlet(np.ones(k))
    law = FiniteLaw(tuple(vals), tuple(probs / probs.sum()))
    wk = int(gen.integers(2, 4))
    wvals = np.sort(gen.choice(np.arange(-2, 3), size=wk, replace=False)).astype(float)
    wprobs = gen.dirichlet(np.ones(wk))
    wall_law = FiniteLaw(tuple(wvals), tuple(wprobs / wprobs.sum()))
    n_max = 16 if k == 2 else 12
    N = int(gen.integers(4, n_max + 1))
    x0 = float(gen.integers(0, 4))
    beta = float(gen.choice([0.5, 1.0]))
    window = None if gen.random() < 0.5 else EndWindow(float(gen.integers(-1, 2)), math.inf, "constant")
    return law, wall_law, N, x0, beta, window


def c10_oracle(suite: Suite, n_instances: int = 25, particles: int = 500, replicates: int = 64):
    worst_rel, worst_z, bad = 0.0, 0.0, []
    for i in range(n_instances):
        gen = task_stream(SEEDS["oracle"], i, 0, ROLE_MC).generator()
        law, wall_law, N, x0, beta, window = random_instance(gen)
        spec = WallSpec("random-walk", beta=beta, law=wall_law)
        wall = realize_wall(spec, float(N), task_stream(SEEDS["oracle"], i, 0, ROLE_WALL))
        proc = Process("walk", law=law)
        exact = brute_force_survival(law, wall.barrier(), x0, N, window)
        lp = grid_survival(wall, x0, [float(N)], window, GridConfig(), proc).logp[0]
        p = math.exp(lp) if lp > -math.inf else 0.0
        rel = abs(p - exact) / exact if exact > 0 else abs(p)
        worst_rel = max(worst_rel, rel)
        if rel > 1e-12:
            bad.append(f"grid#{i}")
        if exact == 0:
            continue
        smc = smc_survival(wall, x0, [float(N)], window, particles,
                           task_stream(SEEDS["oracle"], i, 0, ROLE_SMC), proc, replicates=replicates)
        # the grid tolerance floors the standard error: an event of
        # probability one gives a replicate spread at rounding level
        z = abs(smc.logp[0] - math.log(exact)) / max(smc.stderr[0], 1e-12)
        worst_z = max(worst_z, z)
        if z > 3:
            bad.append(f"smc#{i}")
    ok = not bad
    return ok, (f"{n_instances} instances: worst grid relative error {worst_rel:.2e} (<= 1e-12), "
                f"worst SMC |z| {worst_z:.2f} (<= 3)" + ("" if ok else f"; failing {bad}"))


def c11_subadditivity(suite: Suite, n_walls: int = 20, n_max: int = 8, tol: float = 1e-6):
    checked, worst, bad = 0, -math.inf, []
    for w in range(n_walls):
        horizon = 60.0
        while True:
            wall = realize_wall(WallSpec("scaled-ou", beta=1.0), horizon,
                                task_stream(SEEDS["subadditive"], w, 0, ROLE_WALL))
            dec = decompose(wall.underlying)
            if dec.n >= n_max:
                break
            horizon *= 2
        q = {(m, n): block_logprob(wall, dec, m, n).q
             for m in range(n_max) for n in range(m + 1, n_max + 1)}
        for (l, n), qln in q.items():
            for m in range(l + 1, n):
                excess = qln - (q[l, m] + q[m, n])
                worst = max(worst, excess)
                checked += 1
                if excess > tol:
                    bad.append((w, l, m, n))
    return not bad, (f"{checked} triples on {n_walls} walls; largest q_ln - q_lm - q_mn = {worst:.3g} "
                     f"(<= {tol:g})" + ("" if not bad else f"; violations {bad[:5]}"))


def c12_fkg(suite: Suite, n_pairs: int = 100):
    worst, bad = math.inf, []
    for i in range(n_pairs):
        gen = task_stream(SEEDS["fkg"], i, 0, ROLE_MC).generator()
        N = int(gen.integers(2, 11))
        if i % 2 == 0:
            law = FiniteLaw.rademacher()
        else:
            k = 3 if N <= 9 else 2
            vals = np.sort(gen.choice(np.arange(-3, 4), size=k, replace=False)).astype(float)
            pr = gen.dirichlet(np.ones(k))
            law = FiniteLaw(tuple(vals), tuple(pr / pr.sum()))
        a, b = random_event(gen, N), random_event(gen, N)
        p_ab, p_a, p_b, holds = fkg_brute_check(law, N, a, b)
        worst = min(worst, p_ab - p_a * p_b)
        if not holds:
            bad.append(i)
    return not bad, f"{n_pairs} event pairs; min P(AB) - P(A)P(B) = {worst:.3g}" + (
        "" if not bad else f"; violations {bad}")


def c13_tilted_mean(suite: Suite):
    cases = {
        "gaussian": (GaussianLaw(0.0, 1.0), lambda t: t),
        "rademacher": (FiniteLaw.rademacher(), math.tanh),
        "two-point(-1,2)": (FiniteLaw((-1.0, 2.0), (2 / 3, 1 / 3)), None),
    }
    ok, parts = True, []
    for name, (law, exact) in cases.items():
        thetas = np.linspace(0.0, theta_max(law), 31)
        rep = tilted_mean_bracket_check(law, thetas)
        good = rep.holds
        if exact is not None:
            # closed-form tilted mean as an independent route
            good &= bool(np.allclose(rep.means, [exact(t) for t in thetas], rtol=1e-12, atol=1e-14))
        ok &= good
        parts.append(f"{name}: K={rep.K:.3g}, max dev {rep.deviations.max():.3g}, "
                     f"c in [{rep.c_low:.3f}, {rep.c_high:.3f}]")
    return ok, "; ".join(parts)


def c14_gaussian_tail(suite: Suite):
    xs = np.round(np.arange(1, 101) * 0.1, 10)
    bad = []
    for x in xs:
        lo, hi = gaussian_tail_bounds(float(x))
        tail = gaussian_tail(float(x))
        ref = 0.5 * math.erfc(float(x) / math.sqrt(2))
        if not (lo <= tail <= hi and lo <= ref <= hi and math.isclose(tail, ref, rel_tol=1e-12)):
            bad.append(float(x))
    lo, hi = gaussian_tail_bounds(10.0)
    return not bad, f"{xs.size} points in [0.1, 10]; upper/lower at 10 = {hi / lo:.5f}" + (
        "" if not bad else f"; fails at {bad}")


def c15_infeasible(suite: Suite):
    """Walls on which no path survives must give log P = -inf and gamma = +inf.

    With +-1 walker steps and wall steps in {-1, 2} the supports violate
    sup S_B >= sup S_W, so some walls block every path.  Each wall is
    classified independently by :func:`check_realization` (the all-up path
    survives or not) and the engine must agree wall by wall.
    """
    b_law = FiniteLaw.rademacher()
    w_law = FiniteLaw((-1.0, 2.0), (2 / 3, 1 / 3))
    wall = {"kind": "random-walk", "law": law_to_dict(w_law)}
    x0 = 1.0
    status = check_feasibility(b_law, WallSpec.from_dict(wall), x0)
    cfg = ExperimentConfig(name="accept-infeasible", process="rw", walk_law=law_to_dict(b_law), wall=wall,
                           beta=1.0, x0=x0, horizon_min=4, horizon_max=1024, n_walls=16,
                           seed=SEEDS["infeasible"], fit_correction=CORRECTION)
    rec = suite.record("infeasible", cfg)
    spec = cfg.wall_spec()
    mismatch, blocked = [], 0
    for i, fit in enumerate(rec.fits):
        w = realize_wall(spec, cfg.horizon_list()[-1], task_stream(cfg.seed, i, 0, ROLE_WALL))
        dead = not check_realization(b_law.support[1], w.barrier(), x0).feasible
        blocked += dead
        engine_dead = fit.infeasible and fit.gamma_hat == math.inf and rec.curves[i].died
        if dead != engine_dead:
            mismatch.append(i)
    n_inf = sum(f.infeasible for f in rec.fits)
    excluded = rec.aggregate.excluded if rec.aggregate is not None else len(rec.fits)
    ok = (not status.feasible) and blocked > 0 and not mismatch and excluded == n_inf
    return ok, (f"law-level status {status.status}; {blocked}/{len(rec.fits)} walls block every path, "
                f"engine gives gamma = +inf on exactly those: {not mismatch}; "
                f"aggregate excludes {excluded}")


CRITERIA: dict = {
    1: ("ballot baseline", c01_ballot, 60.0),
    2: ("iid wall irrelevance", c02_iid, 600.0),
    3: ("relevance of disorder", c03_relevance, 1800.0),
    4: ("symmetry", c04_symmetry, None),
    5: ("convexity midpoint", c05_convexity, None),
    6: ("spectral identity", c06_spectral, None),
    7: ("quenched > annealed (OU)", c07_quenched_vs_annealed, 1800.0),
    8: ("BM-OU bridge", c08_bm_ou_bridge, None),
    9: ("ratio invariance", c09_ratio_invariance, None),
    10: ("oracle equivalence", c10_oracle, 60.0),
    11: ("subadditivity", c11_subadditivity, None),
    12: ("FKG", c12_fkg, None),
    13: ("tilted mean", c13_tilted_mean, None),
    14: ("Gaussian tail bracket", c14_gaussian_tail, None),
    15: ("infeasibility branch", c15_infeasible, None),
}
QUICK = (10, 11, 12, 13, 14, 15)


def run_criterion(number: int, suite: Optional[Suite] = None) -> CriterionResult:
    name, fn, budget = CRITERIA[number]
    suite = suite or Suite()
    t0 = time.perf_counter()
    ok, detail = fn(suite)
    dt = time.perf_counter() - t0
    if budget is not None and dt > budget:
        ok = False
        detail += f"; over the {budget:.0f}s budget"
    return CriterionResult(number, name, bool(ok), detail, dt, budget)


def run_suite(numbers: Optional[Sequence[int]] = None, jobs: int = 1,
              progress: Optional[Callable[[CriterionResult], None]] = None) -> list:
    suite = Suite(jobs=jobs)
    out = []
    for k in (numbers or sorted(CRITERIA)):
        res = run_criterion(k, suite)
        out.append(res)
        if progress is not None:
            progress(res)
    return out


def results_jsonl(results: Sequence[CriterionResult]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in results)
