"""Deterministic transfer-operator engine.

The killed sub-probability measure of the walker is carried as point masses
on a uniform lattice ``anchor + k dx``.  One call of :func:`grid_propagate`
applies one transition of the walker, removes the mass that fails the
barrier and renormalises, moving the removed fraction into ``log_mass``.
Its total mass ``exp(log_mass)`` is the survival probability so far.

Two lattice semantics are used.  For finite-support walks the lattice is
the walk's own lattice and every comparison is exact (``exact=True``).  For
Gaussian steps a node stands for the cell around it: the killing at a
discrete monitoring time keeps the fraction of the cell above the barrier,
and continuous monitoring multiplies by the Brownian-bridge non-crossing
probability of the segment between the two endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
import math
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidInput, OutOfRange
from ..laws import FiniteLaw, GaussianLaw, StepLaw
from ..paths import OuParams
from . import kernels
from .curves import EPS, EndWindow, SurvivalCurve, cell_fraction, in_window


@dataclass(frozen=True)
class GridConfig:
    """Numerical parameters of the grid engine.

    dx : initial lattice spacing for Gaussian steps.
    nsig : half-width of the Gaussian kernel band in standard deviations.
    min_nodes_per_sigma : the lattice is coarsened (dx doubled) while a step's
        standard deviation spans at least twice this many nodes.
    bridge : continuous monitoring with the bridge factor; when False the
        barrier is only checked at grid times.
    trim : tail mass (per side) dropped after each step; it is counted as
        killed, so the estimate is conservative.
    """

    dx: float = 0.02
    nsig: float = 8.0
    min_nodes_per_sigma: float = 6.0
    coarsen: bool = True
    bridge: bool = True
    trim: float = 1e-16
    backend: Optional[str] = None

    def __post_init__(self):
        if not (self.dx > 0 and self.nsig > 0 and self.min_nodes_per_sigma > 0 and self.trim >= 0):
            raise InvalidInput("grid config values must be positive")


# ---------------------------------------------------------------- steps

@dataclass(frozen=True)
class GaussianStep:
    """Increment ``N(scale x + shift - x, var)``; ``bridge_var`` enables
    continuous monitoring over a segment whose Brownian variance it is."""

    var: float
    scale: float = 1.0
    shift: float = 0.0
    bridge_var: Optional[float] = None

    @classmethod
    def bm(cls, dt: float, bridge: bool = True) -> "GaussianStep":
        return cls(dt, 1.0, 0.0, dt if bridge else None)

    @classmethod
    def ou(cls, params: OuParams, dt: float, bridge: bool = True) -> "GaussianStep":
        _, var = params.transition(0.0, dt)
        return cls(var, math.exp(-params.mu * dt), 0.0, params.sigma**2 * dt if bridge else None)

    @classmethod
    def walk(cls, var: float, mean: float = 0.0) -> "GaussianStep":
        return cls(var, 1.0, mean, None)


@dataclass(frozen=True)
class LatticeStep:
    """Increment ``shift + spacing * k`` with probability ``probs[i]`` for ``k = offsets[i]``."""

    offsets: tuple
    probs: tuple
    spacing: float
    shift: float = 0.0

    @classmethod
    def from_law(cls, law: FiniteLaw, spacing: Optional[float] = None) -> "LatticeStep":
        v = law.v
        base = float(v.min())
        if spacing is None:
            spacing = lattice_spacing(law)
        k = np.rint((v - base) / spacing)
        if not np.allclose(k * spacing + base, v, rtol=0, atol=1e-12):
            raise InvalidInput(f"support of {law} is not on a lattice of spacing {spacing}")
        return cls(tuple(int(i) for i in k), tuple(float(p) for p in law.probs), float(spacing), base)


def lattice_spacing(law: FiniteLaw) -> float:
    """Largest spacing ``h`` such that all atoms differ by multiples of ``h``."""
    v = sorted(set(float(x) for x in law.values))
    if len(v) == 1:
        return 1.0
    diffs = [Fraction(b - a).limit_denominator(1 << 20) for a, b in zip(v, v[1:])]
    den = reduce(lambda p, q: p * q // math.gcd(p, q), (d.denominator for d in diffs))
    h = reduce(math.gcd, (int(d * den) for d in diffs)) / den
    if not np.allclose(np.rint((np.array(v) - v[0]) / h) * h, np.array(v) - v[0], rtol=0, atol=1e-12):
        raise InvalidInput("support is not on a common lattice")
    return h


# ---------------------------------------------------------------- state

@dataclass
class GridDensity:
    """Normalised masses at ``anchor + (k0 + i) dx`` and the log of their total."""

    anchor: float
    dx: float
    k0: int
    masses: np.ndarray
    log_mass: float = 0.0
    died: bool = False
    exact: bool = False
    truncated: float = 0.0

    @classmethod
    def point(cls, x0: float, dx: float, exact: bool = False) -> "GridDensity":
        return cls(float(x0), float(dx), 0, np.ones(1), 0.0, False, exact)

    @property
    def positions(self) -> np.ndarray:
        return self.anchor + (self.k0 + np.arange(self.masses.size)) * self.dx

    @property
    def xmin(self) -> float:
        return self.anchor + self.k0 * self.dx

    @property
    def xmax(self) -> float:
        return self.anchor + (self.k0 + self.masses.size - 1) * self.dx

    @property
    def log_mass_total(self) -> float:
        return self.log_mass

    @property
    def total(self) -> float:
        return math.exp(self.log_mass)

    def dead(self) -> "GridDensity":
        return replace(self, masses=np.zeros(0), log_mass=-math.inf, died=True)

    def coarsened(self) -> "GridDensity":
        """Double dx; odd nodes split evenly between their neighbours."""
        k = self.k0 + np.arange(self.masses.size)
        kc_lo = np.floor_divide(k, 2)
        odd = (k % 2) == 1
        lo_c = int(kc_lo[0])
        out = np.zeros(int(kc_lo[-1]) + 2 - lo_c)
        np.add.at(out, kc_lo - lo_c, np.where(odd, 0.5 * self.masses, self.masses))
        np.add.at(out, kc_lo[odd] + 1 - lo_c, 0.5 * self.masses[odd])
        if out[-1] == 0:
            out = out[:-1]
        return replace(self, dx=2 * self.dx, k0=lo_c, masses=out)

    def window_fraction(self, lo: float, hi: float, ref: float) -> float:
        """Mass fraction with ``position - ref`` in ``(lo, hi)``."""
        if self.died:
            return 0.0
        q = self.positions - ref
        if lo == -math.inf and hi == math.inf:
            return 1.0
        if self.exact:
            w = in_window(q, lo, hi)
        else:
            w = cell_fraction(q, self.dx, lo, hi)
        return float(math.fsum(self.masses * w))


def _finalize(state: GridDensity, out: np.ndarray, k_lo: int, trim: float) -> GridDensity:
    s = float(out.sum())
    if not s > 0 or not math.isfinite(s):
        return state.dead()
    out = out / s
    log_mass = state.log_mass + math.log(s)
    nz = np.nonzero(out)[0]
    lo, hi = int(nz[0]), int(nz[-1]) + 1
    dropped = 0.0
    if trim > 0:
        c = np.cumsum(out[lo:hi])
        cut_lo = int(np.searchsorted(c, trim, side="right"))
        r = np.cumsum(out[lo:hi][::-1])
        cut_hi = int(np.searchsorted(r, trim, side="right"))
        if cut_lo + cut_hi < hi - lo:
            dropped = (c[cut_lo - 1] if cut_lo else 0.0) + (r[cut_hi - 1] if cut_hi else 0.0)
            lo, hi = lo + cut_lo, hi - cut_hi
    masses = out[lo:hi]
    if dropped > 0:
        masses = masses / (1.0 - dropped)
        log_mass += math.log1p(-dropped)
    return replace(state, k0=k_lo + lo, masses=masses, log_mass=log_mass,
                   truncated=state.truncated + dropped)


def grid_propagate(state: GridDensity, step, barrier_now: float, barrier_next: float,
                   config: GridConfig = GridConfig()) -> GridDensity:
    """One transition of the killed measure.

    Mass ending below ``barrier_next`` is removed; for Gaussian steps with a
    ``bridge_var`` the paths crossing the linear barrier between the two
    times are discounted too.  A barrier of ``-inf`` means no constraint.
    """
    if state.died:
        return state
    if isinstance(step, LatticeStep):
        return _lattice_propagate(state, step, barrier_next)
    if not isinstance(step, GaussianStep):
        raise InvalidInput(f"unknown step descriptor {type(step).__name__}")
    if state.exact:
        raise InvalidInput("Gaussian steps need a cell (non-exact) grid")
    sd = math.sqrt(step.var)
    if sd == 0:
        raise InvalidInput("Gaussian step with zero variance")
    if config.coarsen:
        while sd / state.dx >= 2 * config.min_nodes_per_sigma and state.masses.size > 1:
            state = state.coarsened()
    dx = state.dx
    free = barrier_next == -math.inf
    if free:
        mode = kernels.MODE_FREE
    elif step.bridge_var is not None and barrier_now > -math.inf:
        mode = kernels.MODE_BRIDGE
    else:
        mode = kernels.MODE_CELL
    lo_pos = step.scale * state.xmin + step.shift - config.nsig * sd
    hi_pos = step.scale * state.xmax + step.shift + config.nsig * sd
    if not free:
        lo_pos = max(lo_pos, barrier_next - dx)
    if hi_pos < lo_pos:
        return state.dead()
    k_lo = int(math.floor((lo_pos - state.anchor) / dx))
    k_hi = int(math.ceil((hi_pos - state.anchor) / dx))
    fn = kernels.backends()[config.backend] if config.backend else kernels.gauss_step
    out = fn(np.ascontiguousarray(state.masses), state.xmin, dx, step.scale, step.shift, sd,
             config.nsig, barrier_now, barrier_next,
             step.bridge_var if step.bridge_var is not None else 1.0, mode,
             state.anchor + k_lo * dx, k_hi - k_lo + 1)
    return _finalize(state, out, k_lo, config.trim)


def _lattice_propagate(state: GridDensity, step: LatticeStep, barrier_next: float) -> GridDensity:
    ratio = step.spacing / state.dx
    r = int(round(ratio))
    if abs(ratio - r) > 1e-9 or r < 1:
        raise InvalidInput(f"step spacing {step.spacing} is not a multiple of dx={state.dx}")
    offs = np.asarray(step.offsets, dtype=np.int64) * r
    k_min = int(offs.min())
    n_out = state.masses.size + int(offs.max()) - k_min
    out = kernels.lattice_step(state.masses, offs, step.probs, k_min, n_out)
    new = replace(state, anchor=state.anchor + step.shift)
    k_lo = state.k0 + k_min
    if barrier_next > -math.inf:
        pos = new.anchor + (k_lo + np.arange(n_out)) * new.dx
        out[pos - barrier_next < -EPS] = 0.0
    return _finalize(new, out, k_lo, 0.0)


# ---------------------------------------------------------------- processes

@dataclass(frozen=True)
class Process:
    """The walker.

    kind "bm": Brownian motion, continuous monitoring on the wall grid.
    kind "ou": OU with ``mu``/``sigma``.
    kind "walk": i.i.d. steps of ``law`` at integer times.
    kind "env": steps of the centred walk of the wall's environment.
    """

    kind: str = "bm"
    mu: float = 1.0
    sigma: float = 1.0
    law: Optional[StepLaw] = None

    def __post_init__(self):
        if self.kind not in ("bm", "ou", "walk", "env"):
            raise InvalidInput(f"unknown process kind {self.kind!r}")
        if self.kind == "walk" and self.law is None:
            object.__setattr__(self, "law", GaussianLaw(0.0, 1.0))
        if self.kind == "ou":
            OuParams(self.mu, self.sigma)

    @classmethod
    def default_for(cls, wall) -> "Process":
        kind = wall.spec.kind
        if kind in ("zero", "scaled-brownian"):
            return cls("bm")
        if kind == "scaled-ou":
            return cls("ou", 1.0, 1.0)
        if kind == "environment":
            return cls("env")
        return cls("walk")

    @property
    def continuous(self) -> bool:
        return self.kind in ("bm", "ou")

    @property
    def exact(self) -> bool:
        return self.kind in ("walk", "env") and self._finite_steps

    @property
    def _finite_steps(self) -> bool:
        if self.kind == "walk":
            return isinstance(self.law, FiniteLaw)
        return True

    def var_rate(self) -> float:
        return self.sigma**2 if self.continuous else 1.0

    def steps(self, wall, times: np.ndarray, config: GridConfig):
        """Yield the step descriptor for each consecutive pair of times."""
        dts = np.diff(times)
        if self.kind == "bm":
            for dt in dts:
                yield GaussianStep.bm(float(dt), config.bridge)
        elif self.kind == "ou":
            p = OuParams(self.mu, self.sigma)
            for dt in dts:
                yield GaussianStep.ou(p, float(dt), config.bridge)
        elif self.kind == "walk":
            if isinstance(self.law, FiniteLaw):
                st = LatticeStep.from_law(self.law)
            else:
                st = GaussianStep.walk(self.law.var, self.law.mean)
            for _ in dts:
                yield st
        else:
            env = wall.env
            if env is None:
                raise InvalidInput("process 'env' needs an environment wall")
            spacing = None
            for k in range(1, dts.size + 1):
                law = env.b_step_law(k)
                if isinstance(law, FiniteLaw):
                    if spacing is None:
                        spacing = lattice_spacing(law)
                    yield LatticeStep.from_law(law, spacing)
                else:
                    yield GaussianStep.walk(law.var, law.mean)

    def initial_dx(self, wall, config: GridConfig) -> float:
        if self.kind == "walk" and isinstance(self.law, FiniteLaw):
            return lattice_spacing(self.law)
        if self.kind == "env" and wall.env is not None and wall.env.n > 0:
            law = wall.env.b_step_law(1)
            if isinstance(law, FiniteLaw):
                return lattice_spacing(law)
        return config.dx


def _check_times(wall, horizons) -> list:
    idx = []
    for h in horizons:
        if h > wall.horizon * (1 + 1e-12):
            raise OutOfRange(f"horizon {h} beyond the wall horizon {wall.horizon}")
        idx.append(wall.grid.index_of(float(h)))
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise InvalidInput("horizons must be strictly increasing")
    return idx


def start_point(wall, x0: Optional[float], horizon: float) -> float:
    """Start height: the wall's offset g(horizon) if it has one, else ``x0``."""
    off = wall.spec.offset
    if off is not None:
        return off(horizon)
    return 1.0 if x0 is None else float(x0)


def grid_survival(wall, x0: Optional[float], horizons: Sequence[float], window: Optional[EndWindow] = None,
                  config: GridConfig = GridConfig(), process: Optional[Process] = None,
                  wall_id: int = 0, barrier=None) -> SurvivalCurve:
    """log P(x0 + walker stays above the barrier up to N, end condition | wall) for N in ``horizons``.

    The barrier is ``beta W + f`` on the wall grid.  A non-constant offset
    g in the wall spec means one run per horizon, started at g(N).
    ``barrier`` overrides the barrier values on the wall grid (scalar or array).
    """
    process = process or Process.default_for(wall)
    horizons = [float(h) for h in horizons]
    _check_times(wall, horizons)
    off = wall.spec.offset
    curve = SurvivalCurve(wall_id=wall_id, seed=wall.rng.seed)
    if off is not None and not off.is_constant:
        diag = []
        for h in horizons:
            sub = _run(wall, start_point(wall, x0, h), [h], window, config, process, barrier)
            curve.append(h, *sub.entries[0])
            diag.append(sub.diag)
        curve.meta["diagnostics"] = diag
        return curve
    res = _run(wall, start_point(wall, x0, horizons[-1]), horizons, window, config, process, barrier)
    for h, e in zip(horizons, res.entries):
        curve.append(h, *e)
    curve.meta["diagnostics"] = res.diag
    return curve


@dataclass
class _RunResult:
    entries: list = field(default_factory=list)
    diag: dict = field(default_factory=dict)


def _run(wall, x0, horizons, window, config, process, barrier=None) -> _RunResult:
    times = wall.grid.times
    idx = _check_times(wall, horizons)
    if barrier is None:
        barrier = wall.barrier()
    else:
        barrier = np.array(np.broadcast_to(np.asarray(barrier, dtype=float), (len(times),)))
    raw = wall.values.values
    state = GridDensity.point(x0, process.initial_dx(wall, config), process.exact)
    if x0 - barrier[0] < -EPS:
        state = state.dead()
    steps = process.steps(wall, times[: idx[-1] + 1], config)
    out = _RunResult()
    targets = dict(zip(idx, horizons))
    if 0 in targets:
        out.entries.append(_readout(state, window, targets[0], x0, raw[0]))
    for k in range(1, idx[-1] + 1):
        step = next(steps)
        b_now = barrier[k - 1] if process.continuous else -math.inf
        state = grid_propagate(state, step, b_now, barrier[k], config)
        if k in targets:
            out.entries.append(_readout(state, window, targets[k], x0, raw[k]))
    out.diag = {"truncated": state.truncated, "dx": state.dx, "nodes": int(state.masses.size),
                "died": state.died}
    if state.truncated > 1e-10:
        out.diag["warning"] = "truncated mass above 1e-10"
    return out


def _readout(state: GridDensity, window: Optional[EndWindow], horizon: float, x0: float, wall_value: float):
    if state.died:
        return (-math.inf, 0.0, "grid", "died")
    if window is None:
        return (state.log_mass, 0.0, "grid", "")
    lo, hi = window.bounds(horizon)
    ref = wall_value + (x0 if window.relative_to_start() else 0.0)
    frac = state.window_fraction(lo, hi, ref)
    if frac <= 0:
        return (-math.inf, 0.0, "grid", "empty-window")
    return (state.log_mass + math.log(frac), 0.0, "grid", "")
