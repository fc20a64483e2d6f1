"""Exponential tilting of step laws.

Tilting a law by ``theta`` reweights it by ``exp(theta x) / psi(theta)``
with ``psi(theta) = E exp(theta X)``.  For a centred law the tilted mean
is ``theta E X^2 + O(theta^2)``; :func:`tilted_mean_bracket_check` checks
this with an explicit constant.  :func:`fast_growth_estimate` uses tilted
steps as an importance sampler for the event that an inhomogeneous walk
is unusually large at time N.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp, ndtr

from .environment import EnvRealization
from .errors import InvalidInput, InvalidTilt
from .laws import DensityLaw, FiniteLaw, GaussianLaw, StepLaw
from .rng import as_generator

# absolute third moment of a standard Gaussian
_GAUSS_ABS3 = 2.0 * math.sqrt(2.0 / math.pi)


def theta_max(law: StepLaw) -> float:
    """Largest tilt for which the Taylor control of the tilted moments holds."""
    return law.c1 / 2


def _check_region(law: StepLaw, theta: float):
    a, b = law.mgf_region()
    if not (a < theta < b) or not math.isfinite(theta):
        raise InvalidTilt(f"theta={theta} outside the MGF region ({a}, {b})")


@dataclass(frozen=True)
class TiltedLaw:
    """``base`` tilted by ``theta``; ``law`` is the tilted step law."""

    base: StepLaw
    theta: float
    log_psi: float
    law: StepLaw = field(repr=False)

    @property
    def psi(self) -> float:
        return math.exp(self.log_psi)

    @property
    def mean(self) -> float:
        return tilted_moments(self.base, self.theta)[0]

    def sample(self, gen, size) -> np.ndarray:
        return self.law.sample(as_generator(gen), size)


def tilt(base: StepLaw, theta: float) -> TiltedLaw:
    """Tilt ``base`` by ``theta`` (closed form for finite and Gaussian laws,
    quadrature for density laws)."""
    theta = float(theta)
    _check_region(base, theta)
    if theta == 0:
        return TiltedLaw(base, 0.0, 0.0, base)
    return TiltedLaw(base, theta, float(base.log_psi(theta)), base.tilted(theta))


def tilted_moments(law: StepLaw, theta: float):
    """``(mean, variance, E|X - mean|^3)`` of ``law`` tilted by ``theta``."""
    _check_region(law, theta)
    if isinstance(law, GaussianLaw):
        s = math.sqrt(law.sigma2)
        return law.mu + theta * law.sigma2, law.sigma2, _GAUSS_ABS3 * s**3
    if isinstance(law, FiniteLaw):
        v, p = law.v, law.p
        a = theta * v
        w = p * np.exp(a - a.max())
        w = w / w.sum()
        m = float(np.dot(w, v))
        d = v - m
        return m, float(np.dot(w, d * d)), float(np.dot(w, np.abs(d) ** 3))
    if isinstance(law, DensityLaw):
        lp = law.log_psi(theta)

        def f(x, g):
            d = law.pdf(x)
            return 0.0 if d == 0 else g(x) * d * math.exp(theta * x - lp)

        def ex(g):
            val, _ = integrate.quad(f, args=(g,), a=law.lo, b=law.hi,
                                    limit=200, epsabs=1e-13, epsrel=1e-12)
            return val

        m = ex(lambda x: x)
        return m, ex(lambda x: (x - m) ** 2), ex(lambda x: abs(x - m) ** 3)
    raise InvalidInput(f"unsupported law {type(law).__name__}")


@dataclass
class BracketReport:
    thetas: np.ndarray
    means: np.ndarray
    deviations: np.ndarray
    K: float
    second_moment: float
    c_low: float
    c_high: float
    holds: bool


def tilted_mean_bracket_check(base: StepLaw, thetas: Sequence[float], n_sup: int = 65) -> BracketReport:
    """Check ``|m(theta) - theta E X^2| <= K theta^2`` for a centred law.

    ``m'' (theta)`` is the third central moment of the tilted law, so by
    Taylor's theorem the bound holds with ``K = sup |kappa_3| / 2`` over
    ``[0, theta_max]``.  ``K`` is taken as half the largest absolute third
    central moment found on ``n_sup`` points of that interval.  The report
    also gives the envelope ``c <= m(theta) / (theta E X^2) <= c~``.
    """
    if abs(base.mean) > 1e-12 * max(1.0, math.sqrt(base.var)):
        raise InvalidInput("the bracket check needs a centred law")
    th = np.asarray(thetas, dtype=float)
    tmax = theta_max(base)
    if th.size == 0 or np.any(th < 0) or np.any(th > tmax + 1e-15):
        raise InvalidTilt(f"thetas must lie in [0, {tmax}]")
    ex2 = base.var
    grid = np.linspace(0.0, tmax, n_sup)
    K = 0.5 * max(tilted_moments(base, float(t))[2] for t in grid)
    means = np.array([tilted_moments(base, float(t))[0] if t > 0 else 0.0 for t in th])
    dev = np.abs(means - th * ex2)
    holds = bool(np.all(dev <= K * th**2 + 1e-15))
    pos = th > 0
    ratio = means[pos] / (th[pos] * ex2) if pos.any() else np.array([1.0])
    return BracketReport(th, means, dev, float(K), ex2, float(ratio.min()), float(ratio.max()), holds)


# ---------------------------------------------------------------- fast growth

def tilt_schedule(N: int, theta0: float, mode: str = "schedule", b: Optional[float] = None) -> np.ndarray:
    """Tilts ``b_1..b_N``.

    mode "schedule": ``b_n = max(theta0 n^-1/2 log log n, 0)`` (zero where
    ``log n <= 1``).  mode "constant": ``b_n = b`` (default ``theta0``).
    """
    if N < 1:
        raise InvalidInput("N must be >= 1")
    if mode == "constant":
        return np.full(N, float(theta0 if b is None else b))
    if mode != "schedule":
        raise InvalidInput(f"unknown tilt mode {mode!r}")
    n = np.arange(1, N + 1, dtype=float)
    ln = np.log(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(ln > 1, np.log(np.where(ln > 1, ln, 1.0)), 0.0)
    return np.maximum(theta0 * ll / np.sqrt(n), 0.0)


def growth_level(N: int, c: float) -> float:
    """``c sqrt(N) log log N``, with the log log read as 0 for N < 3."""
    ll = math.log(math.log(N)) if N >= 3 else 0.0
    return c * math.sqrt(N) * ll


def _step_tables(env: EnvRealization, N: int):
    """Per-step atoms/probabilities for finite laws, or means/variances for Gaussians."""
    laws = [env.b_step_law(k) for k in range(1, N + 1)]
    if all(isinstance(l, FiniteLaw) for l in laws):
        width = max(len(l.values) for l in laws)
        vals = np.zeros((N, width))
        probs = np.zeros((N, width))
        for i, l in enumerate(laws):
            vals[i, : len(l.values)] = l.v
            probs[i, : len(l.values)] = l.p
        return "finite", vals, probs
    if all(isinstance(l, GaussianLaw) for l in laws):
        return "gauss", np.array([l.mu for l in laws]), np.array([l.sigma2 for l in laws])
    raise InvalidInput("mixed or unsupported step laws")


@dataclass
class GrowthEstimate:
    N: int
    level: float
    log_p: float
    stderr: float
    ess: float
    samples: int
    flag: str = ""


def fast_growth_estimate(env: EnvRealization, N: int, c: float, samples: int, rng,
                         theta0: Optional[float] = None, mode: str = "schedule",
                         b: Optional[float] = None, chunk: int = 2000) -> GrowthEstimate:
    """Importance-sampling estimate of ``P(B_N >= c sqrt(N) log log N | environment)``.

    Step n of the centred walk is drawn from its law tilted by ``b_n``
    (see :func:`tilt_schedule`); each sample carries the likelihood ratio
    ``exp(-sum b_n X_n) prod psi_n(b_n)``.  ``ess`` is the effective sample
    size of the weights on the event; below 10 the estimate is flagged.
    """
    if N < 1 or N > env.n:
        raise InvalidInput(f"need 1 <= N <= {env.n}")
    if samples < 2:
        raise InvalidInput("need at least two samples")
    kind, t1, t2 = _step_tables(env, N)
    if theta0 is None:
        theta0 = theta_max(env.b_step_law(1))
    bs = tilt_schedule(N, theta0, mode, b)
    level = growth_level(N, c)
    gen = as_generator(rng)
    if kind == "finite":
        a = bs[:, None] * t1
        with np.errstate(divide="ignore"):
            lw = np.log(t2) + a
        log_psi = logsumexp(lw, axis=1)
        tp = np.exp(lw - log_psi[:, None])
        cdf = np.cumsum(tp, axis=1)
        cdf[:, -1] = 1.0
    else:
        log_psi = bs * t1 + 0.5 * bs * bs * t2
        tmean = t1 + bs * t2
        tsd = np.sqrt(t2)
    sum_log_psi = float(np.sum(log_psi))
    logw_hit = []
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        done += m
        if kind == "finite":
            u = gen.random((m, N))
            idx = (u[:, :, None] > cdf[None, :, :]).sum(axis=2)
            x = np.take_along_axis(np.broadcast_to(t1, (m,) + t1.shape), idx[:, :, None], axis=2)[:, :, 0]
        else:
            x = tmean + tsd * gen.standard_normal((m, N))
        total = x.sum(axis=1)
        lw = -(x @ bs) + sum_log_psi
        logw_hit.append(lw[total >= level - 1e-9])
    lw = np.concatenate(logw_hit)
    if lw.size == 0:
        return GrowthEstimate(N, level, -math.inf, math.nan, 0.0, samples, "zero-count")
    log_sum = float(logsumexp(lw))
    log_p = log_sum - math.log(samples)
    w = np.exp(lw - lw.max())
    ess = float(w.sum() ** 2 / np.sum(w * w))
    # relative standard error of the mean of 1_A * weight
    mean_w = math.exp(log_p - lw.max())
    second = float(np.sum(w * w)) / samples
    var = max(second - mean_w**2, 0.0) / (samples - 1)
    se = math.sqrt(var) / mean_w
    flag = "unreliable" if ess < 10 else ""
    return GrowthEstimate(N, level, log_p, se, ess, samples, flag)


def direct_growth_estimate(env: EnvRealization, N: int, c: float, samples: int, rng) -> GrowthEstimate:
    """Plain Monte Carlo for the same event (reference for small N)."""
    if N < 1 or N > env.n:
        raise InvalidInput(f"need 1 <= N <= {env.n}")
    gen = as_generator(rng)
    level = growth_level(N, c)
    hits = 0
    done = 0
    while done < samples:
        m = min(2000, samples - done)
        done += m
        bpath = env.sample_b(gen, m)
        hits += int(np.sum(bpath[:, N] >= level - 1e-9))
    if hits == 0:
        return GrowthEstimate(N, level, -math.inf, math.nan, 0.0, samples, "zero-count")
    p = hits / samples
    return GrowthEstimate(N, level, math.log(p), math.sqrt((1 - p) / (samples * p)), float(hits), samples)


# ---------------------------------------------------------------- Gaussian tail

def gaussian_tail_bounds(x: float) -> tuple:
    """Lower and upper bounds for ``P(Z >= x)``, ``x > 0``:
    ``phi(x) x / (1 + x^2)`` and ``phi(x) / x``."""
    x = float(x)
    if not x > 0:
        raise InvalidInput("x must be positive")
    phi = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return phi * x / (1 + x * x), phi / x


def gaussian_tail(x: float) -> float:
    """``P(Z >= x)`` by the complementary error function."""
    return float(ndtr(-x))
