"""Time grids, sample paths and exact samplers for Brownian motion and OU."""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Iterable

import numpy as np

from .errors import InvalidInput, OutOfRange
from .rng import as_generator

DEFAULT_DT = 2.0**-6


class TimeGrid:
    """Strictly increasing, non-negative times."""

    __slots__ = ("times",)

    def __init__(self, times):
        t = np.array(times, dtype=float).reshape(-1)
        if t.size == 0:
            raise InvalidInput("empty time grid")
        if not np.all(np.isfinite(t)) or t[0] < 0:
            raise InvalidInput("times must be finite and non-negative")
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("times must be strictly increasing")
        t.setflags(write=False)
        self.times = t

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __repr__(self):
        return f"TimeGrid(n={len(self)}, [{self.times[0]:g}, {self.times[-1]:g}])"

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @classmethod
    def uniform(cls, horizon: float, dt: float = DEFAULT_DT) -> "TimeGrid":
        if horizon <= 0 or dt <= 0:
            raise InvalidInput("horizon and dt must be positive")
        n = int(math.floor(horizon / dt + 1e-9))
        t = np.arange(n + 1) * dt
        if horizon - t[-1] > 1e-9 * max(1.0, horizon):
            t = np.append(t, horizon)
        else:
            t[-1] = horizon if abs(t[-1] - horizon) < 1e-9 * max(1.0, horizon) else t[-1]
        return cls(t)

    @classmethod
    def graded(cls, horizon: float, dt: float = DEFAULT_DT, pivot: float = 1.0) -> "TimeGrid":
        """Step ``dt`` up to ``pivot``, then ``dt * 2**k`` on ``[pivot 2**k, pivot 2**(k+1)]``.

        The relative step stays in ``[dt/2, dt]`` so the number of points per
        octave is constant; every ``pivot * 2**k`` is a grid point.
        """
        if horizon <= 0 or dt <= 0 or pivot <= 0:
            raise InvalidInput("horizon, dt and pivot must be positive")
        per = int(round(1.0 / dt))
        if abs(per * dt - 1.0) > 1e-12:
            raise InvalidInput("graded grids need 1/dt to be an integer")
        pieces = [np.arange(int(round(pivot / dt))) * dt]
        start = pivot
        while start < horizon:
            pieces.append(start + np.arange(per) * (start * dt))
            start *= 2.0
        t = np.concatenate(pieces + [[start]])
        t = t[t < horizon * (1 - 1e-12)]
        return cls(np.append(t, horizon))

    def with_points(self, extra: Iterable[float]) -> "TimeGrid":
        """Union with ``extra`` (points closer than 1e-9 relative are merged)."""
        extra = np.asarray(list(extra), dtype=float)
        t = np.union1d(self.times, extra)
        keep = np.ones(t.size, bool)
        keep[1:] = np.diff(t) > 1e-9 * np.maximum(1.0, t[1:])
        # keep the requested point when a near-duplicate pair is merged
        out = t[keep]
        for e in extra:
            i = np.argmin(np.abs(out - e))
            if abs(out[i] - e) <= 1e-9 * max(1.0, e):
                out[i] = e
        return TimeGrid(out)

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t - 1e-9 * max(1.0, abs(t))))
        if i >= len(self) or abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise OutOfRange(f"time {t} is not a grid point")
        return i

    def to_list(self) -> list:
        return self.times.tolist()


@dataclass(frozen=True, eq=False)
class PathSample:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != len(self.grid):
            raise InvalidInput("values and grid lengths differ")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("path values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def value_at(self, t):
        """Linear interpolation; raises OutOfRange outside the grid."""
        t_arr = np.asarray(t, dtype=float)
        lo, hi = self.times[0], self.times[-1]
        tol = 1e-9 * max(1.0, hi)
        if np.any(t_arr < lo - tol) or np.any(t_arr > hi + tol):
            raise OutOfRange(f"time outside [{lo}, {hi}]")
        out = np.interp(t_arr, self.times, self.values)
        return float(out) if out.ndim == 0 else out

    def scaled(self, c: float) -> "PathSample":
        return PathSample(self.grid, c * self.values)


@dataclass(frozen=True)
class OuParams:
    """Parameters of dX = sigma dW - mu X dt."""

    mu: float
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.sigma > 0):
            raise InvalidInput("OU parameters need mu > 0 and sigma > 0")

    @property
    def stationary_var(self) -> float:
        return self.sigma**2 / (2 * self.mu)

    def transition(self, x, dt):
        """Mean and variance of X_{t+dt} given X_t = x."""
        a = math.exp(-self.mu * dt)
        return x * a, self.sigma**2 * (-math.expm1(-2 * self.mu * dt)) / (2 * self.mu)


def _as_grid(grid) -> TimeGrid:
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def sample_bm(grid, rng, size: int | None = None) -> PathSample | np.ndarray:
    """Standard Brownian motion on ``grid``.

    With ``size`` given, returns an array of ``size`` independent paths
    (one per row) instead of a PathSample.
    """
    grid = _as_grid(grid)
    gen = as_generator(rng)
    dts = np.diff(grid.times, prepend=0.0)
    shape = (len(grid),) if size is None else (size, len(grid))
    inc = gen.standard_normal(shape) * np.sqrt(dts)
    vals = np.cumsum(inc, axis=-1)
    return PathSample(grid, vals) if size is None else vals


def sample_ou(params: OuParams, x0: float, grid, rng, size: int | None = None):
    """OU path started at ``x0`` at time 0, exact Gaussian transitions."""
    grid = _as_grid(grid)
    gen = as_generator(rng)
    t = grid.times
    dts = np.diff(t, prepend=0.0)
    a = np.exp(-params.mu * dts)
    sd = params.sigma * np.sqrt(-np.expm1(-2 * params.mu * dts) / (2 * params.mu))
    shape = (len(grid),) if size is None else (size, len(grid))
    z = gen.standard_normal(shape)
    out = np.empty(shape)
    x = np.full(shape[:-1], float(x0)) if size is not None else float(x0)
    for k in range(len(grid)):
        x = a[k] * x + sd[k] * z[..., k]
        out[..., k] = x
    return PathSample(grid, out) if size is None else out


def ou_from_bm(x: float, mu: float, sigma: float, t, bm: PathSample):
    """OU value at time ``t`` from a Brownian path via the exponential time change."""
    if not (mu > 0 and sigma > 0):
        raise InvalidInput("mu and sigma must be positive")
    t_arr = np.asarray(t, dtype=float)
    s = np.expm1(2 * mu * t_arr)
    if np.any(s > bm.times[-1] * (1 + 1e-12)):
        raise OutOfRange(f"Brownian path ends at {bm.times[-1]}, need time {float(np.max(s))}")
    w = bm.value_at(s)
    damp = np.exp(-mu * t_arr)
    out = x * damp + sigma / math.sqrt(2 * mu) * damp * w
    return float(out) if np.ndim(out) == 0 else out


def bridge_noncrossing(a, b, dt, var_rate):
    """Probability that a Brownian bridge from height ``a`` to ``b`` above a
    (linear) barrier stays above it over a step ``dt``; vectorised."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(np.asarray(dt) <= 0) or np.any(np.asarray(var_rate) <= 0):
        raise InvalidInput("dt and var_rate must be positive")
    pos = (a > 0) & (b > 0)
    with np.errstate(over="ignore", invalid="ignore"):
        p = -np.expm1(-2.0 * np.where(pos, a * b, 0.0) / (var_rate * dt))
    out = np.where(pos, p, 0.0)
    return float(out) if out.ndim == 0 else out
