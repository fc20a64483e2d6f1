"""Exponents from survival curves and comparisons between experiments.

Two decay scales are used: polynomial decay ``P ~ N^-gamma`` (fitted
against ``log N``, scale "log-time") and exponential decay ``P ~ e^{-gamma t}``
(fitted against ``t``, scale "time").
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
import json
import math
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .engine.curves import SurvivalCurve
from .errors import InvalidInput
from .rng import ROLE_BOOTSTRAP, RngStream, as_generator

FIT_SCHEMA = "quenchwall.fit/1"
AGGREGATE_SCHEMA = "quenchwall.aggregate/1"
SCALES = ("log-time", "time")
Z95 = 1.959963984540054


@dataclass
class ExponentFit:
    """Slope of ``-log P`` against ``log N`` or ``N``.

    ``infeasible`` marks curves that hit probability zero inside the window;
    their exponent is reported as ``+inf``.  ``correction`` is the power
    ``alpha`` of an extra ``N^-alpha`` regressor, if one was used.
    """

    gamma_hat: float
    stderr: float
    scale: str
    window: tuple
    r2: float
    n_points: int = 0
    infeasible: bool = False
    correction: Optional[float] = None
    wall_id: int = 0

    def __post_init__(self):
        if self.scale not in SCALES:
            raise InvalidInput(f"unknown scale {self.scale!r}")
        if not (self.stderr >= 0 or math.isnan(self.stderr)):
            raise InvalidInput("stderr must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["schema"] = FIT_SCHEMA
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExponentFit":
        d = dict(d)
        if d.pop("schema", FIT_SCHEMA) != FIT_SCHEMA:
            raise InvalidInput("unsupported fit schema")
        d["window"] = tuple(d["window"])
        return cls(**d)


def default_window(horizons: Sequence[float]) -> tuple:
    """Drop the lower third of the horizons."""
    h = np.asarray(horizons, dtype=float)
    k = h.size // 3
    return float(h[k]), float(h[-1])


def fit_exponent(curve: SurvivalCurve, scale: str = "log-time", window: Optional[tuple] = None,
                 correction: Optional[float] = None) -> ExponentFit:
    """Weighted least-squares slope of ``-log P``.

    Parameters
    ----------
    curve : SurvivalCurve
    scale : {"log-time", "time"}
    window : (N_min, N_max), optional
        Inclusive horizon range; the default drops the lower third.
    correction : float, optional
        On the log-time scale, add a regressor ``N^-correction`` that absorbs
        the leading finite-size correction of the power law.

    Weights are ``1 / stderr^2`` when every point has a positive finite
    standard error and uniform otherwise.
    """
    if scale not in SCALES:
        raise InvalidInput(f"unknown scale {scale!r}")
    if correction is not None and (scale != "log-time" or not correction > 0):
        raise InvalidInput("a correction term needs the log-time scale and a positive power")
    h = curve.horizons
    if h.size == 0:
        raise InvalidInput("empty curve")
    window = default_window(h) if window is None else (float(window[0]), float(window[1]))
    if not window[0] < window[1]:
        raise InvalidInput("window needs N_min < N_max")
    tol = 1e-9 * max(1.0, window[1])
    sel = (h >= window[0] - tol) & (h <= window[1] + tol)
    if sel.sum() < 4:
        raise InvalidInput(f"need at least 4 points in window {window}, have {int(sel.sum())}")
    hs, lp, se = h[sel], curve.logp[sel], curve.stderr[sel]
    win = (float(hs[0]), float(hs[-1]))
    if np.any(lp == -math.inf):
        return ExponentFit(math.inf, 0.0, scale, win, math.nan, int(sel.sum()), True, correction, curve.wall_id)
    if scale == "log-time":
        if np.any(hs <= 0):
            raise InvalidInput("log-time fits need positive horizons")
        x = np.log(hs)
    else:
        x = hs
    cols = [x, np.ones_like(x)]
    if correction is not None:
        cols.append(hs ** (-correction))
    X = np.column_stack(cols)
    y = -lp
    if np.all(np.isfinite(se)) and np.all(se > 0):
        w = 1.0 / se**2
    else:
        w = np.ones_like(y)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    dof = y.size - X.shape[1]
    rss = float(np.sum(w * resid**2))
    ybar = float(np.sum(w * y) / np.sum(w))
    tss = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    if dof > 0:
        cov = np.linalg.pinv((X * w[:, None]).T @ X) * (rss / dof)
        stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        stderr = math.nan
    return ExponentFit(float(coef[0]), stderr, scale, win, r2, int(y.size), False, correction, curve.wall_id)


@dataclass
class QuenchedAggregate:
    fits: list
    mean: float
    ci95: tuple
    n_walls: int
    excluded: int = 0
    spread: float = 0.0
    pooled: bool = False

    @property
    def halfwidth(self) -> float:
        return (self.ci95[1] - self.ci95[0]) / 2

    def contains(self, value: float) -> bool:
        return self.ci95[0] <= value <= self.ci95[1]

    def overlaps(self, other: "QuenchedAggregate") -> bool:
        return self.ci95[0] <= other.ci95[1] and other.ci95[0] <= self.ci95[1]

    def to_dict(self) -> dict:
        return {"schema": AGGREGATE_SCHEMA, "mean": self.mean, "ci95": list(self.ci95),
                "n_walls": self.n_walls, "excluded": self.excluded, "spread": self.spread,
                "pooled": self.pooled, "fits": [f.to_dict() for f in self.fits]}


def aggregate_quenched(fits: Sequence[ExponentFit], n_boot: int = 1000,
                       rng=None, level: float = 0.95) -> QuenchedAggregate:
    """Mean exponent over walls with a percentile-bootstrap CI.

    Infeasible fits are left out and counted.  The result does not depend
    on the order of ``fits``.  When the per-wall standard errors dominate
    the spread between walls, a normal interval with the pooled variance
    is used instead.
    """
    good = [f for f in fits if not f.infeasible]
    excluded = len(fits) - len(good)
    if not good:
        raise InvalidInput("no feasible fits to aggregate")
    # order-independent: work on the sorted sample
    g = np.sort(np.array([f.gamma_hat for f in good]))
    se = np.sort(np.array([f.stderr for f in good]))
    n = g.size
    mean = float(math.fsum(g) / n)
    if n == 1:
        return QuenchedAggregate(list(fits), mean, (mean, mean), 1, excluded, 0.0, False)
    spread = float(g.std(ddof=1))
    within = float(np.nanmean(se**2)) if np.any(np.isfinite(se)) else 0.0
    if within > spread**2:
        half = Z95 * math.sqrt((spread**2 + within) / n)
        return QuenchedAggregate(list(fits), mean, (mean - half, mean + half), n, excluded, spread, True)
    gen = as_generator(rng if rng is not None else RngStream(0, ROLE_BOOTSTRAP))
    idx = gen.integers(0, n, size=(n_boot, n))
    boots = g[idx].mean(axis=1)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(boots, [alpha, 1 - alpha])
    return QuenchedAggregate(list(fits), mean, (float(lo), float(hi)), n, excluded, spread, False)


def fits_to_jsonl(fits: Sequence[ExponentFit]) -> str:
    return "".join(json.dumps(f.to_dict()) + "\n" for f in fits)


def fits_from_jsonl(text: str) -> list:
    return [ExponentFit.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


# ---------------------------------------------------------------- comparisons

@dataclass
class Verdict:
    name: str
    passed: Optional[bool]
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class BetaScan:
    table: dict
    verdicts: list = field(default_factory=list)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)


def scan_beta(betas: Sequence[float], experiment) -> BetaScan:
    """Aggregates for each beta and the symmetry / convexity / monotonicity
    verdicts.

    ``experiment`` is either a callable ``beta -> QuenchedAggregate`` or a
    mapping from beta to an aggregate.
    """
    betas = sorted(set(float(b) for b in betas))
    get = experiment if callable(experiment) else (lambda b: experiment[b])
    table = {b: get(b) for b in betas}
    scan = BetaScan(table)
    if len(betas) < 2:
        return scan
    pairs = [(b, -b) for b in betas if b > 0 and -b in table]
    if pairs:
        bad = [b for b, mb in pairs if not table[b].overlaps(table[mb])]
        scan.verdicts.append(Verdict("symmetry", not bad,
                                     "all pairs overlap" if not bad else f"no overlap at beta={bad}"))
    triples = [(b1, (b1 + b2) / 2, b2) for i, b1 in enumerate(betas) for b2 in betas[i + 1:]
               if (b1 + b2) / 2 in table and b1 != b2]
    if triples:
        fails = []
        for b1, bm, b2 in triples:
            ok, _ = convexity_midpoint(table[b1], table[bm], table[b2])
            if not ok:
                fails.append(bm)
        scan.verdicts.append(Verdict("convexity", not fails,
                                     "midpoint test holds" if not fails else f"fails at beta={fails}"))
    pos = [b for b in betas if b >= 0]
    if len(pos) >= 2:
        means = [table[b].mean for b in pos]
        mono = all(a < b for a, b in zip(means, means[1:]))
        scan.verdicts.append(Verdict("monotone", mono, f"means on beta >= 0: {np.round(means, 4).tolist()}"))
    return scan


def convexity_midpoint(left: QuenchedAggregate, mid: QuenchedAggregate, right: QuenchedAggregate):
    """``mid <= (left + right)/2 + slack`` with slack the combined CI half-width."""
    slack = math.sqrt(mid.halfwidth**2 + (left.halfwidth**2 + right.halfwidth**2) / 4)
    gap = mid.mean - (left.mean + right.mean) / 2
    return gap <= slack, {"gap": gap, "slack": slack}


def ratio_invariance_check(rw: QuenchedAggregate, bm: QuenchedAggregate) -> Verdict:
    """Random walk in an environment vs Brownian wall with the matching beta."""
    ok = rw.overlaps(bm)
    return Verdict("ratio-invariance", ok,
                   f"rw {rw.mean:.4f} {tuple(round(c, 4) for c in rw.ci95)} vs "
                   f"bm {bm.mean:.4f} {tuple(round(c, 4) for c in bm.ci95)}")


def joint_agreement(a: QuenchedAggregate, b: QuenchedAggregate, scale_a: float = 1.0):
    """Whether ``scale_a * a`` and ``b`` agree within the joint CI.

    The difference of the means is compared with the half-width of its own
    interval, ``sqrt(hw_a^2 + hw_b^2)``, which is stricter than CI overlap.
    Returns ``(ok, diff, halfwidth)``.
    """
    diff = scale_a * a.mean - b.mean
    half = math.sqrt((scale_a * a.halfwidth) ** 2 + b.halfwidth**2)
    return abs(diff) <= half, diff, half


def _annealed_value(annealed) -> float:
    if hasattr(annealed, "lambda1"):
        return float(annealed.lambda1)
    if isinstance(annealed, ExponentFit):
        return float(annealed.gamma_hat)
    return float(annealed)


def disorder_relevance_report(quenched: QuenchedAggregate, annealed, quenched_params: Optional[Mapping] = None,
                              annealed_params: Optional[Mapping] = None) -> Verdict:
    """Whether the quenched CI lies entirely above the annealed value."""
    if quenched_params is not None and annealed_params is not None:
        keys = set(quenched_params) & set(annealed_params)
        diff = [k for k in keys if not math.isclose(float(quenched_params[k]), float(annealed_params[k]))]
        if diff:
            raise InvalidInput(f"parameters differ between quenched and annealed runs: {sorted(diff)}")
    value = _annealed_value(annealed)
    ok = quenched.ci95[0] > value
    return Verdict("disorder-relevance", ok,
                   f"quenched CI lower {quenched.ci95[0]:.4f} vs annealed {value:.4f}")


def jensen_check(logp: np.ndarray) -> np.ndarray:
    """Per horizon: ``mean(-log p) >= -log mean(p)`` on the sample.

    ``logp`` has one row per wall.  Returns a boolean per column; equality
    up to rounding counts as holding.
    """
    a = np.atleast_2d(np.asarray(logp, dtype=float))
    quenched = -a.mean(axis=0)
    annealed = -(logsumexp(a, axis=0) - math.log(a.shape[0]))
    tol = 1e-12 * np.maximum(1.0, np.abs(quenched))
    return quenched >= annealed - tol


def window_robustness(curve: SurvivalCurve, scale: str = "log-time", window: Optional[tuple] = None,
                      correction: Optional[float] = None) -> Verdict:
    """Refit with ``N_min`` doubled; flag the run as pre-asymptotic when the
    exponent moves by more than its standard error."""
    base = fit_exponent(curve, scale, window, correction)
    lo, hi = base.window
    moved = fit_exponent(curve, scale, (2 * lo, hi), correction)
    delta = abs(moved.gamma_hat - base.gamma_hat)
    ok = delta < base.stderr
    return Verdict("window-robustness", ok,
                   f"shift {delta:.3g} vs stderr {base.stderr:.3g}" + ("" if ok else " (pre-asymptotic)"))
