"""Particle estimators: sequential Monte Carlo and plain Monte Carlo."""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidInput
from ..paths import OuParams, bridge_noncrossing
from ..rng import RngStream, as_generator
from .curves import EPS, EndWindow, SurvivalCurve, in_window
from .grid import Process, _check_times, start_point


def _barrier(wall, barrier) -> np.ndarray:
    n = len(wall.grid)
    if barrier is None:
        return wall.barrier()
    b = np.broadcast_to(np.asarray(barrier, dtype=float), (n,))
    return np.array(b)


def advance(process: Process, wall, k: int, dt: float, x: np.ndarray, gen) -> np.ndarray:
    """Sample the walker one grid step ahead from positions ``x``."""
    if process.kind == "bm":
        return x + math.sqrt(dt) * gen.standard_normal(x.size)
    if process.kind == "ou":
        mean, var = OuParams(process.mu, process.sigma).transition(x, dt)
        return mean + math.sqrt(var) * gen.standard_normal(x.size)
    law = process.law if process.kind == "walk" else wall.env.b_step_law(k)
    return x + law.sample(gen, x.size)


def survival_factor(process: Process, x_old, x_new, b_old, b_new, dt, bridge: bool = True):
    """Weight of each move: bridge non-crossing probability or exact indicator."""
    if b_new == -math.inf:
        return np.ones_like(x_new)
    if process.continuous and bridge and b_old > -math.inf:
        return bridge_noncrossing(x_old - b_old, x_new - b_new, dt, process.var_rate())
    return (x_new - b_new >= -EPS).astype(float)


def _window_ref(window: EndWindow, x0: float, wall_value: float) -> float:
    return wall_value + (x0 if window.relative_to_start() else 0.0)


@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    weights: np.ndarray
    log_mass: float = 0.0
    died: bool = False

    @property
    def ess(self) -> float:
        if self.died:
            return 0.0
        return float(1.0 / np.sum(self.weights**2))

    @property
    def size(self) -> int:
        return self.positions.size

    def reweight(self, g: np.ndarray) -> None:
        w = self.weights * g
        s = float(w.sum())
        if not s > 0:
            self.died = True
            self.log_mass = -math.inf
            return
        self.log_mass += math.log(s)
        self.weights = w / s

    def resample(self, gen) -> None:
        """Systematic resampling."""
        m = self.size
        u = (gen.random() + np.arange(m)) / m
        c = np.cumsum(self.weights)
        c[-1] = 1.0
        idx = np.searchsorted(c, u, side="right")
        self.positions = self.positions[np.minimum(idx, m - 1)]
        self.weights = np.full(m, 1.0 / m)

    def mass_in(self, lo, hi, ref) -> float:
        if self.died:
            return 0.0
        return float(np.sum(self.weights[in_window(self.positions - ref, lo, hi)]))


def _smc_once(wall, x0, idx, horizons, window, M, gen, process, threshold, barrier, bridge):
    times = wall.grid.times
    raw = wall.values.values
    ens = ParticleEnsemble(np.full(M, float(x0)), np.full(M, 1.0 / M))
    if x0 - barrier[0] < -EPS:
        ens.died = True
        ens.log_mass = -math.inf
    out, min_ess = [], float(M)
    targets = dict(zip(idx, horizons))

    def read(k):
        if ens.died:
            return -math.inf
        if window is None:
            return ens.log_mass
        lo, hi = window.bounds(targets[k])
        f = ens.mass_in(lo, hi, _window_ref(window, x0, raw[k]))
        return ens.log_mass + math.log(f) if f > 0 else -math.inf

    if 0 in targets:
        out.append(read(0))
    for k in range(1, idx[-1] + 1):
        if not ens.died:
            dt = times[k] - times[k - 1]
            b_old = barrier[k - 1] if process.continuous else -math.inf
            new = advance(process, wall, k, dt, ens.positions, gen)
            g = survival_factor(process, ens.positions, new, b_old, barrier[k], dt, bridge)
            ens.positions = new
            ens.reweight(g)
            if not ens.died:
                min_ess = min(min_ess, ens.ess)
                if ens.ess < threshold * M and M > 1:
                    ens.resample(gen)
        if k in targets:
            out.append(read(k))
    return out, min_ess


def smc_survival(wall, x0: Optional[float], horizons: Sequence[float], window: Optional[EndWindow],
                 M: int, rng, process: Optional[Process] = None, threshold: float = 0.5,
                 replicates: int = 1, barrier=None, bridge: bool = True, wall_id: int = 0) -> SurvivalCurve:
    """Sequential importance sampling with systematic resampling.

    Each replicate is an unbiased estimate of the survival probability.
    With ``replicates > 1`` the reported value is the log of their mean and
    the standard error comes from their spread (delta method); with a
    single replicate the standard error is reported as NaN.
    """
    if M < 1 or replicates < 1:
        raise InvalidInput("need M >= 1 and replicates >= 1")
    process = process or Process.default_for(wall)
    horizons = [float(h) for h in horizons]
    idx = _check_times(wall, horizons)
    x0 = start_point(wall, x0, horizons[-1])
    b = _barrier(wall, barrier)
    base = rng if isinstance(rng, RngStream) else None
    gen0 = None if base is not None else as_generator(rng)
    runs, ess = [], []
    for r in range(replicates):
        gen = base.split(r).generator() if base is not None else gen0
        lp, e = _smc_once(wall, x0, idx, horizons, window, M, gen, process, threshold, b, bridge)
        runs.append(lp)
        ess.append(e)
    runs = np.array(runs)
    curve = SurvivalCurve(wall_id=wall_id, seed=getattr(base, "seed", 0))
    low = M < 2 or min(ess) < 2
    for j, h in enumerate(horizons):
        col = runs[:, j]
        p = np.exp(col)
        pm = float(p.mean())
        flag = "low-ess" if low else ""
        if pm == 0:
            curve.append(h, -math.inf, 0.0, "smc", "died")
            continue
        if replicates > 1:
            se = float(p.std(ddof=1) / math.sqrt(replicates) / pm)
        else:
            se = math.nan
        curve.append(h, math.log(pm), se, "smc", flag)
    curve.meta["min_ess"] = float(min(ess))
    curve.meta["replicate_logp"] = runs.tolist()
    return curve


def direct_mc_survival(wall, x0: Optional[float], horizons: Sequence[float], window: Optional[EndWindow],
                       samples: int, rng, process: Optional[Process] = None, barrier=None,
                       bridge: bool = True, chunk: int = 20000, wall_id: int = 0) -> SurvivalCurve:
    """Fraction of independent paths surviving; continuous-time crossings
    between grid points are decided by a Bernoulli draw with the bridge
    probability.  The log-scale standard error is sqrt((1 - p) / (n p))."""
    if samples < 1:
        raise InvalidInput("samples must be >= 1")
    process = process or Process.default_for(wall)
    horizons = [float(h) for h in horizons]
    idx = _check_times(wall, horizons)
    x0 = start_point(wall, x0, horizons[-1])
    b = _barrier(wall, barrier)
    gen = as_generator(rng)
    times = wall.grid.times
    raw = wall.values.values
    counts = np.zeros(len(horizons), dtype=np.int64)
    targets = {k: j for j, k in enumerate(idx)}
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        done += m
        x = np.full(m, float(x0))
        alive = np.full(m, x0 - b[0] >= -EPS)
        if 0 in targets:
            counts[targets[0]] += _count(alive, x, window, horizons[targets[0]], x0, raw[0])
        for k in range(1, idx[-1] + 1):
            dt = times[k] - times[k - 1]
            b_old = b[k - 1] if process.continuous else -math.inf
            new = advance(process, wall, k, dt, x, gen)
            g = survival_factor(process, x, new, b_old, b[k], dt, bridge)
            if process.continuous and bridge:
                alive &= gen.random(m) < g
            else:
                alive &= g > 0
            x = new
            if k in targets:
                counts[targets[k]] += _count(alive, x, window, horizons[targets[k]], x0, raw[k])
    curve = SurvivalCurve(wall_id=wall_id, seed=getattr(rng, "seed", 0))
    for h, c in zip(horizons, counts):
        if c == 0:
            curve.append(h, -math.inf, 0.0, "mc", "zero-count")
            continue
        p = c / samples
        curve.append(h, math.log(p), math.sqrt((1 - p) / (samples * p)), "mc")
    curve.meta["counts"] = counts.tolist()
    curve.meta["samples"] = samples
    return curve


def _count(alive, x, window, horizon, x0, wall_value) -> int:
    if window is None:
        return int(alive.sum())
    lo, hi = window.bounds(horizon)
    return int(np.sum(alive & in_window(x - _window_ref(window, x0, wall_value), lo, hi)))
