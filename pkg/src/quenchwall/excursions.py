"""Macroscopic excursions of a recurrent wall and block survival costs.

A wall path ``Y`` (started at 0) is cut at the times ``rho_i``: ``rho_0 = 0``
and ``rho_{i+1}`` is the first zero of ``Y`` after ``rho_i`` that follows a
visit of ``|Y| = threshold``.  Between two cuts the wall makes one
"macroscopic" excursion; ``tau_i`` is the zero from which that excursion
starts, i.e. the last zero before ``rho_{i+1}``.

The block cost ``q_{m,n}`` is minus the log-probability that an OU walker
started at the worst admissible height at ``rho_m`` stays above ``beta Y``
until ``rho_n`` and ends in the window ``I``.  These costs are subadditive
in the block index, so ``q_{0,n} / n`` converges and, divided by the mean
block length, gives the exponential decay rate of the survival probability.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import io
import math
from typing import Optional, Sequence
import warnings

import numpy as np

from .engine.curves import EndWindow
from .engine.grid import GridConfig, Process, grid_survival
from .errors import InvalidInput, OutOfRange
from .paths import PathSample, TimeGrid
from .walls import WallRealization, wall_segment

EXCURSION_SCHEMA = "quenchwall.excursions/1"
EXCURSION_COLUMNS = ("i", "rho_i", "tau_i", "r_i", "M_i", "schema")
# crossing times are linear interpolations; values at them are exact up to this
INTERP_TOL = 1e-6


def _zero_time(t0, t1, v0, v1) -> float:
    if v0 == v1:
        return float(t0)
    return float(t0 + (t1 - t0) * v0 / (v0 - v1))


def _level_time(t0, t1, v0, v1, level) -> float:
    if v1 == v0:
        return float(t1)
    return float(t0 + (t1 - t0) * (level - v0) / (v1 - v0))


@dataclass(frozen=True)
class ExcursionDecomposition:
    """Cut times of a wall path.

    Attributes
    ----------
    rho : array of shape (n + 1,)
        Cut times, ``rho[0]`` is the first zero of the path.
    tau : array of shape (n,)
        ``tau[i]`` is the start of the macroscopic excursion in block i.
    maxima : array of shape (n,)
        ``sup`` of the path over block i.
    path : PathSample
        The decomposed path (needed for :meth:`segment`).
    threshold : float
    """

    rho: np.ndarray
    tau: np.ndarray
    maxima: np.ndarray
    path: PathSample = field(repr=False)
    threshold: float = 1.0

    @property
    def n(self) -> int:
        return int(self.tau.size)

    @property
    def r(self) -> np.ndarray:
        return np.diff(self.rho)

    def __len__(self):
        return self.n

    def segment(self, i: int) -> PathSample:
        """``Y^i(t) = Y(t + rho_i)`` for ``t`` in ``[0, r_i]``."""
        if not 0 <= i < self.n:
            raise OutOfRange(f"block {i} not in 0..{self.n - 1}")
        t0, t1 = self.rho[i], self.rho[i + 1]
        t = self.path.times
        pts = np.concatenate([[t0], t[(t > t0) & (t < t1)], [t1]])
        vals = np.asarray(self.path.value_at(pts), dtype=float)
        vals[0] = vals[-1] = 0.0
        return PathSample(TimeGrid(pts - t0), vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EXCURSION_COLUMNS)
        for i in range(self.n):
            w.writerow([i, repr(float(self.rho[i])), repr(float(self.tau[i])),
                        repr(float(self.r[i])), repr(float(self.maxima[i])), EXCURSION_SCHEMA])
        return buf.getvalue()

    @staticmethod
    def rows_from_csv(text: str) -> list:
        rows = list(csv.DictReader(io.StringIO(text)))
        for r in rows:
            if r.get("schema") != EXCURSION_SCHEMA:
                raise InvalidInput(f"unsupported excursion schema {r.get('schema')!r}")
        return [{k: (int(v) if k == "i" else float(v)) for k, v in r.items() if k != "schema"} for r in rows]


def decompose(wall: PathSample, threshold: float = 1.0) -> ExcursionDecomposition:
    """Cut a wall path into macroscopic excursions.

    The path is taken to be linear between its grid points, so zero and
    threshold crossings are located by linear interpolation.  The
    decomposition stops at the last complete excursion.

    Parameters
    ----------
    wall : PathSample
        Unscaled wall path ``Y``.
    threshold : float
        Level that ``|Y|`` must reach inside each block.
    """
    if not threshold > 0:
        raise InvalidInput("threshold must be positive")
    t = wall.times
    v = np.asarray(wall.values, dtype=float)
    n = t.size
    # first zero of the path
    k = 0
    start = None
    while k < n:
        if v[k] == 0:
            start = float(t[k])
            break
        if k + 1 < n and v[k] * v[k + 1] < 0:
            start = _zero_time(t[k], t[k + 1], v[k], v[k + 1])
            k += 1
            break
        k += 1
    rho, tau, maxima = [], [], []
    if start is None:
        warnings.warn("wall never hits zero; no excursions", RuntimeWarning, stacklevel=2)
        return ExcursionDecomposition(np.array([]), np.array([]), np.array([]), wall, threshold)
    rho.append(start)
    # k is the first grid index strictly after the current cut
    while t[k] <= start and k < n - 1:
        k += 1
    last_zero = start
    seeking_zero = False
    cut = start
    while k < n:
        prev_t = t[k - 1] if t[k - 1] >= cut else cut
        prev_v = v[k - 1] if t[k - 1] >= cut else 0.0
        cur_t, cur_v = t[k], v[k]
        if not seeking_zero:
            if prev_v * cur_v < 0:
                last_zero = _zero_time(prev_t, cur_t, prev_v, cur_v)
            elif cur_v == 0:
                last_zero = float(cur_t)
            if abs(cur_v) >= threshold:
                seeking_zero = True
                # a zero crossing after the threshold time in the same segment
                # is impossible: the segment is monotone
        else:
            z = None
            if cur_v == 0:
                z = float(cur_t)
            elif prev_v * cur_v < 0:
                z = _zero_time(prev_t, cur_t, prev_v, cur_v)
            if z is not None:
                tau.append(last_zero)
                rho.append(z)
                seg = (t > cut) & (t < z)
                maxima.append(float(max(0.0, v[seg].max() if seg.any() else 0.0)))
                cut = z
                last_zero = z
                seeking_zero = False
                if cur_v != 0:
                    # the segment (z, cur_t] starts the next block
                    if abs(cur_v) >= threshold:
                        seeking_zero = True
        k += 1
    if len(rho) == 1:
        warnings.warn("no complete excursion within the horizon", RuntimeWarning, stacklevel=2)
    return ExcursionDecomposition(np.array(rho), np.array(tau), np.array(maxima), wall, threshold)


@dataclass(frozen=True)
class BlockLogProb:
    m: int
    n: int
    q: float
    start: float = math.nan

    def __post_init__(self):
        if not (self.q >= -1e-12 or math.isnan(self.q)):
            raise InvalidInput(f"block cost {self.q} is negative")


def _window(interval) -> EndWindow:
    a, b = interval
    if not (a > 0 and b > a):
        raise InvalidInput("block interval needs 0 < a < b")
    return EndWindow(a, b, "constant")


def _starts(interval, n_starts: int) -> list:
    a, b = interval
    if math.isinf(b):
        return [float(a)]
    # interior points; the infimum over (a, b) is approached at one of them
    return list(a + (b - a) * (np.arange(n_starts) + 0.5) / n_starts)


def _block_run(wall, decomposition, m, n_list, x, window, config, process, zero_wall):
    r0 = float(decomposition.rho[m])
    r1 = float(decomposition.rho[max(n_list)])
    cuts = decomposition.rho[m:max(n_list) + 1]
    seg = wall_segment(wall, r0, r1, extra_times=cuts)
    times = seg.grid.times
    barrier = np.zeros(len(times)) if zero_wall else seg.barrier()
    # Y vanishes at the cut times; interpolation only approximates this
    for c in cuts:
        barrier[seg.grid.index_of(float(c) - r0)] = 0.0
    hs = [float(decomposition.rho[k]) - r0 for k in n_list]
    curve = grid_survival(seg, x, hs, window, config, process, barrier=barrier)
    return curve


def block_logprob(wall: WallRealization, decomposition: ExcursionDecomposition, m: int, n: int,
                  interval=(0.5, math.inf), config: GridConfig = GridConfig(),
                  process: Optional[Process] = None, n_starts: int = 9,
                  start: Optional[float] = None, zero_wall: bool = False) -> BlockLogProb:
    """Cost ``q_{m,n}`` of surviving the blocks ``m .. n-1``.

    The walker starts at the least favourable admissible height at
    ``rho_m`` (the lower end ``a`` when ``b`` is infinite, else the worst
    of ``n_starts`` interior points) and must end in ``(a, b)`` at
    ``rho_n``.  ``start`` forces a given starting height.
    """
    if not 0 <= m < n <= decomposition.n:
        raise OutOfRange(f"need 0 <= m < n <= {decomposition.n}")
    window = _window(interval)
    process = process or Process("ou", wall.spec.mu, wall.spec.sigma)
    starts = [float(start)] if start is not None else _starts(interval, n_starts)
    worst, at = -math.inf, math.nan
    for x in starts:
        lp = _block_run(wall, decomposition, m, [n], x, window, config, process, zero_wall).logp[0]
        q = -lp
        if q > worst:
            worst, at = q, x
    return BlockLogProb(m, n, max(worst, 0.0), at)


@dataclass
class KingmanTrend:
    """Costs ``q_{0,n}`` along one wall and the derived rates.

    ``rate`` is the least-squares slope of ``q_{0,n}`` against ``n``;
    ``mean_length`` the mean block length; ``gamma = rate / mean_length``.
    """

    n: np.ndarray
    q: np.ndarray
    rate: float
    rate_stderr: float
    mean_length: float
    length_stderr: float
    flag: str = ""

    @property
    def ratios(self) -> np.ndarray:
        return self.q / self.n

    @property
    def cesaro(self) -> np.ndarray:
        return np.cumsum(self.ratios) / np.arange(1, self.n.size + 1)

    @property
    def gamma(self) -> float:
        return self.rate / self.mean_length

    @property
    def gamma_stderr(self) -> float:
        g = self.gamma
        return abs(g) * math.hypot(self.rate_stderr / self.rate if self.rate else 0.0,
                                   self.length_stderr / self.mean_length)


def kingman_trend(wall: WallRealization, decomposition: ExcursionDecomposition,
                  config: GridConfig = GridConfig(), n_list: Optional[Sequence[int]] = None,
                  interval=(0.5, math.inf), process: Optional[Process] = None,
                  discard: float = 1 / 3, zero_wall: bool = False) -> KingmanTrend:
    """Costs ``q_{0,n}`` for ``n`` in ``n_list`` (default all blocks) and
    their linear trend in ``n``, fitted after dropping the first ``discard``
    fraction of blocks.

    All ``q_{0,n}`` come from one engine run started at ``a`` at ``rho_0``.
    ``zero_wall`` replaces the wall by 0 while keeping the block times.
    """
    avail = decomposition.n
    flag = ""
    if n_list is None:
        n_list = list(range(1, avail + 1))
    n_list = sorted(int(k) for k in n_list)
    if n_list and n_list[-1] > avail:
        flag = "insufficient-excursions"
        n_list = [k for k in n_list if k <= avail]
    if len(n_list) < 3:
        raise InvalidInput("need at least three block counts within the decomposition")
    window = _window(interval)
    if not math.isinf(interval[1]):
        raise InvalidInput("the trend uses a single start and needs b = inf")
    process = process or Process("ou", wall.spec.mu, wall.spec.sigma)
    curve = _block_run(wall, decomposition, 0, n_list, float(interval[0]), window, config, process, zero_wall)
    q = -curve.logp
    ns = np.array(n_list, dtype=float)
    keep = ns > discard * ns[-1]
    if np.any(~np.isfinite(q[keep])):
        return KingmanTrend(ns, q, math.inf, math.nan, float(decomposition.r.mean()), math.nan, "died")
    X = np.c_[ns[keep], np.ones(keep.sum())]
    coef, res, *_ = np.linalg.lstsq(X, q[keep], rcond=None)
    # q_{0,n} is a cumulative sum, so residuals are correlated; report the
    # increment spread as the slope uncertainty instead of the OLS one
    inc = np.diff(q[keep]) / np.diff(ns[keep])
    rate_se = float(inc.std(ddof=1) / math.sqrt(inc.size)) if inc.size > 1 else math.nan
    r = decomposition.r
    len_se = float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else math.nan
    return KingmanTrend(ns, q, float(coef[0]), rate_se, float(r.mean()), len_se, flag)
