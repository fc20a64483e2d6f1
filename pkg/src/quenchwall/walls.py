"""Quenched walls: wall specs, realization, perturbation and feasibility.

A wall is sampled once, frozen, and then shared by every estimator that
works on the same replica.  The realized ``values`` already include the
strength ``beta``; the perturbation ``f`` and start offset ``g`` are kept
symbolic and applied by the survival engine so the raw wall can be reused.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
from typing import Optional

import numpy as np

from .environment import EnvModel, EnvRealization, sample_env
from .errors import InvalidSpec, OutOfRange
from .laws import StepLaw, law_from_dict, law_to_dict
from .paths import DEFAULT_DT, OuParams, PathSample, TimeGrid, sample_bm, sample_ou
from .rng import RngStream, as_generator

WALL_SCHEMA = "quenchwall.wall/1"
KINDS = ("zero", "scaled-brownian", "scaled-ou", "random-walk", "iid", "environment")
CONTINUOUS_KINDS = ("zero", "scaled-brownian", "scaled-ou")


@dataclass(frozen=True)
class Perturbation:
    """f(t) = amplitude * t**(1/2 - eps), or a table interpolated linearly."""

    amplitude: float = 0.0
    eps: float = 0.25
    table: Optional[tuple] = None  # ((t0, f0), (t1, f1), ...)

    def __post_init__(self):
        if self.table is not None:
            tab = tuple((float(t), float(v)) for t, v in self.table)
            ts = [t for t, _ in tab]
            if not tab or ts[0] != 0.0 or tab[0][1] != 0.0 or any(b <= a for a, b in zip(ts, ts[1:])):
                raise InvalidSpec("perturbation table must start at (0, 0) with increasing times")
            object.__setattr__(self, "table", tab)
        elif not 0 < self.eps < 0.5:
            # eps >= 1/2 would violate f(0) = 0 or the growth condition
            raise InvalidSpec("perturbation exponent needs 0 < eps < 1/2")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.table is not None:
            ts, vs = zip(*self.table)
            out = np.interp(t, ts, vs)
        else:
            out = self.amplitude * np.power(t, 0.5 - self.eps)
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        if self.table is not None:
            return {"table": [list(r) for r in self.table]}
        return {"amplitude": self.amplitude, "eps": self.eps}


@dataclass(frozen=True)
class Offset:
    """Start offset g(t) = level + log_coef * log(1 + t); inf g = level > 0."""

    level: float = 1.0
    log_coef: float = 0.0

    def __post_init__(self):
        if not (self.level > 0 and self.log_coef >= 0 and math.isfinite(self.level + self.log_coef)):
            raise InvalidSpec("offset needs level > 0 and log_coef >= 0")

    @property
    def is_constant(self) -> bool:
        return self.log_coef == 0

    def __call__(self, t: float) -> float:
        return self.level + self.log_coef * math.log1p(t)

    def to_dict(self):
        return {"level": self.level, "log_coef": self.log_coef}


@dataclass(frozen=True)
class WallSpec:
    """What to sample.

    ``kind`` is one of :data:`KINDS`.  Kind-specific fields: ``mu``/``sigma``
    (scaled-ou), ``law`` (random-walk, iid), ``env`` (environment).  ``dt``
    and ``grid`` control the time discretization of continuous kinds
    (``grid`` is "uniform" or "graded"); discrete kinds live on integers.
    """

    kind: str = "zero"
    beta: float = 1.0
    mu: float = 1.0
    sigma: float = 1.0
    y0: float = 0.0
    law: Optional[StepLaw] = None
    env: Optional[EnvModel] = None
    perturbation: Optional[Perturbation] = None
    offset: Optional[Offset] = None
    dt: float = DEFAULT_DT
    grid: str = "uniform"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown wall kind {self.kind!r}")
        if not math.isfinite(self.beta):
            raise InvalidSpec("beta must be finite")
        if self.kind in ("random-walk", "iid") and self.law is None:
            raise InvalidSpec(f"{self.kind} walls need a step law")
        if self.kind == "environment" and self.env is None:
            raise InvalidSpec("environment walls need an EnvModel")
        if self.kind == "scaled-ou" and not (self.mu > 0 and self.sigma > 0):
            raise InvalidSpec("OU wall needs mu > 0 and sigma > 0")
        if self.grid not in ("uniform", "graded") or not self.dt > 0:
            raise InvalidSpec("grid must be 'uniform' or 'graded' with dt > 0")
        if self.kind == "iid" and self.beta != 1.0:
            raise InvalidSpec("iid walls take their scale from the law, not beta")

    @property
    def continuous(self) -> bool:
        return self.kind in CONTINUOUS_KINDS

    def time_grid(self, horizon: float) -> TimeGrid:
        if not self.continuous:
            return TimeGrid(np.arange(int(math.ceil(horizon - 1e-9)) + 1, dtype=float))
        if self.grid == "graded":
            return TimeGrid.graded(horizon, self.dt)
        return TimeGrid.uniform(horizon, self.dt)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "beta": self.beta, "dt": self.dt, "grid": self.grid}
        if self.kind == "scaled-ou":
            d.update(mu=self.mu, sigma=self.sigma, y0=self.y0)
        if self.law is not None:
            d["law"] = law_to_dict(self.law)
        if self.env is not None:
            d["env"] = self.env.to_dict()
        if self.perturbation is not None:
            d["perturbation"] = self.perturbation.to_dict()
        if self.offset is not None:
            d["offset"] = self.offset.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WallSpec":
        d = dict(d)
        if "law" in d:
            d["law"] = law_from_dict(d["law"])
        if "env" in d:
            d["env"] = EnvModel.from_dict(d["env"])
        if "perturbation" in d:
            p = d["perturbation"]
            d["perturbation"] = Perturbation(table=tuple(map(tuple, p["table"]))) if "table" in p else Perturbation(**p)
        if "offset" in d:
            d["offset"] = Offset(**d["offset"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None


@dataclass(frozen=True, eq=False)
class WallRealization:
    """A frozen wall.  ``values`` is the barrier ``beta * W`` without f and g."""

    spec: WallSpec
    horizon: float
    values: PathSample
    rng: RngStream
    underlying: PathSample
    env: Optional[EnvRealization] = field(default=None, repr=False)
    extra_times: tuple = ()

    @property
    def grid(self) -> TimeGrid:
        return self.values.grid

    def barrier(self, times=None) -> np.ndarray:
        """``beta W_t + f(t)`` on ``times`` (default: the wall grid)."""
        t = self.grid.times if times is None else np.asarray(times, float)
        b = np.asarray(self.values.value_at(t), dtype=float)
        if self.spec.perturbation is not None:
            b = b + self.spec.perturbation(t)
        return b

    def to_json(self) -> str:
        return json.dumps({
            "schema": WALL_SCHEMA,
            "spec": self.spec.to_dict(),
            "horizon": self.horizon,
            "rng": self.rng.to_dict(),
            "extra_times": list(self.extra_times),
            "times": self.grid.to_list(),
            "values": self.values.values.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "WallRealization":
        """Rebuild by re-realizing from (spec, seed) and checking the stored values."""
        d = json.loads(text)
        if d.get("schema") != WALL_SCHEMA:
            raise InvalidSpec(f"expected schema {WALL_SCHEMA}, got {d.get('schema')!r}")
        wall = realize_wall(WallSpec.from_dict(d["spec"]), d["horizon"], RngStream.from_dict(d["rng"]),
                            d.get("extra_times", ()))
        if not np.array_equal(wall.values.values, np.asarray(d["values"], float)):
            raise InvalidSpec("stored wall values do not match the re-realized wall")
        return wall


def realize_wall(spec: WallSpec, horizon: float, rng: RngStream, extra_times=()) -> WallRealization:
    """Sample the wall of ``spec`` on ``[0, horizon]``.

    ``extra_times`` are merged into the time grid of continuous walls (for
    reporting horizons that are not grid points).  They change the draws,
    so they are part of the realization's identity.
    """
    if not horizon > 0:
        raise InvalidSpec("horizon must be positive")
    if not isinstance(rng, RngStream):
        raise InvalidSpec("walls need an RngStream so that they can be replayed")
    grid = spec.time_grid(horizon)
    extra = tuple(float(t) for t in extra_times if 0 < t < horizon)
    if extra and spec.continuous:
        grid = grid.with_points(extra)
    else:
        extra = ()
    gen = as_generator(rng)
    env = None
    if spec.kind == "zero":
        w = np.zeros(len(grid))
    elif spec.kind == "scaled-brownian":
        w = sample_bm(grid, gen).values
    elif spec.kind == "scaled-ou":
        w = sample_ou(OuParams(spec.mu, spec.sigma), spec.y0, grid, gen).values
    elif spec.kind == "random-walk":
        w = np.concatenate([[0.0], np.cumsum(spec.law.sample(gen, len(grid) - 1))])
    elif spec.kind == "iid":
        w = np.concatenate([[0.0], spec.law.sample(gen, len(grid) - 1)])
    else:
        env = sample_env(spec.env, len(grid) - 1, gen)
        w = np.array(env.wall)
    under = PathSample(grid, w)
    vals = under if spec.kind == "iid" else PathSample(grid, spec.beta * w)
    return WallRealization(spec, float(horizon), vals, rng, under, env, extra)


def apply_perturbation(wall: WallRealization, t: float) -> float:
    """Effective barrier ``beta W_t + f(t)`` at a single time."""
    if t < 0 or t > wall.horizon * (1 + 1e-12):
        raise OutOfRange(f"t={t} outside [0, {wall.horizon}]")
    return float(wall.barrier([t])[0])


# ---------------------------------------------------------------- feasibility

@dataclass(frozen=True)
class Feasibility:
    status: str  # always-feasible | feasible-at-x | infeasible
    witness: Optional[int] = None

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


def _sup(law: StepLaw) -> float:
    return law.support[1]


def wall_step_sup(spec: WallSpec) -> float:
    """Upper end of the support of the wall increments (with beta applied)."""
    if spec.kind == "zero":
        return 0.0
    if spec.kind in ("scaled-brownian", "scaled-ou"):
        return math.inf if spec.beta != 0 else 0.0
    if spec.kind == "random-walk":
        lo, hi = spec.law.support
        if spec.beta == 0:
            return 0.0
        return spec.beta * hi if spec.beta > 0 else spec.beta * lo
    if spec.kind == "environment":
        # W increments are -E(X|mu) over the finitely many environment states
        e = _env_cond_means(spec.env)
        return float(np.max(-spec.beta * e))
    raise InvalidSpec("feasibility is defined for walk-type walls only")


def _env_cond_means(model: EnvModel) -> np.ndarray:
    p = model.params
    if model.family == "two-point-random-bias":
        return p["step"] * (2 * np.asarray(p["biases"], float) - 1)
    if model.family == "shifted-bernoulli-mixture":
        return np.asarray(p["shifts"], float)
    if p["mean_var"] > 0:
        return np.array([-math.inf, math.inf])
    return np.array([0.0])


def check_feasibility(b_law: Optional[StepLaw], w_spec: WallSpec, x: float) -> Feasibility:
    """Law-level test: is survival possible for every wall realization?

    Always feasible iff the supports satisfy sup S_B >= sup S_W.  Otherwise
    a wall that keeps taking near-maximal steps blocks every path, and the
    witness is the first index at which it does so from height ``x``.
    """
    if w_spec.kind == "iid":
        raise InvalidSpec("feasibility is defined for walk-type walls only")
    if b_law is None:
        if w_spec.kind != "environment":
            raise InvalidSpec("a B step law is required unless the wall is an environment")
        b_sup = _env_b_sup(w_spec.env)
    else:
        b_sup = _sup(b_law)
    w_sup = wall_step_sup(w_spec)
    if math.isinf(b_sup) or b_sup >= w_sup:
        return Feasibility("always-feasible")
    gap = w_sup - b_sup
    witness = int(math.floor(max(x, 0.0) / gap)) + 1
    return Feasibility("infeasible", witness)


def _env_b_sup(model: EnvModel) -> float:
    """sup of the support of B increments, over environment states."""
    p = model.params
    if model.family == "gaussian-random-mean":
        return math.inf
    if model.family == "two-point-random-bias":
        b = np.asarray(p["biases"], float)
        e = p["step"] * (2 * b - 1)
        up = np.where(b > 0, p["step"], -p["step"])
        return float(np.max(up - e))
    return p["scale"] * (1 - p["q"])


def check_realization(max_steps, wall_values, x: float) -> Feasibility:
    """Realization-level test on integer times.

    ``max_steps[k-1]`` is the largest possible k-th increment of B.  The
    path taking every maximal step dominates all others, so survival is
    possible iff it survives; otherwise the witness is its first failure.
    """
    w = np.asarray(wall_values, dtype=float)
    top = x + np.concatenate([[0.0], np.cumsum(np.broadcast_to(max_steps, (w.size - 1,)))])
    bad = np.nonzero(top < w - 1e-9)[0]
    if bad.size:
        return Feasibility("infeasible", int(bad[0]))
    return Feasibility("feasible-at-x")


def wall_segment(wall: WallRealization, t0: float, t1: float, extra_times=()) -> WallRealization:
    """The wall restricted to ``[t0, t1]`` and shifted to start at time 0.

    Between grid points the wall is linear, so inserting ``t0``, ``t1`` and
    ``extra_times`` by interpolation does not change it.
    """
    if not (0 <= t0 < t1 <= wall.horizon * (1 + 1e-12)):
        raise OutOfRange(f"segment [{t0}, {t1}] not inside [0, {wall.horizon}]")
    t = wall.grid.times
    inner = t[(t > t0) & (t < t1)]
    pts = np.union1d(np.concatenate([[t0], inner, [t1]]), [e for e in extra_times if t0 < e < t1])
    # drop interior points that nearly coincide with an inserted one
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * max(1.0, t1)])
    pts = pts[keep]
    if pts[-1] != t1:
        pts[-1] = t1
    grid = TimeGrid(pts - t0)
    vals = PathSample(grid, wall.values.value_at(pts))
    under = PathSample(grid, wall.underlying.value_at(pts))
    return WallRealization(wall.spec, float(t1 - t0), vals, wall.rng, under, None)
