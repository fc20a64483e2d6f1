"""Exhaustive-enumeration oracles for finite-support walks.

Every step sequence is listed explicitly (mixed-radix counting over the
atoms, in chunks), so these functions share no code path with the
transfer-operator engine.  They are meant for small instances only.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import itertools
import math
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import InvalidEvent, InvalidInput, SizeLimitError
from ..laws import FiniteLaw
from .curves import EPS, EndWindow, in_window

MAX_PATHS = 2**26
MAX_STEPS = 24
_CHUNK = 1 << 16


def _laws(step_law, n: int) -> list:
    if isinstance(step_law, FiniteLaw):
        return [step_law] * n
    laws = list(step_law)
    if len(laws) != n or not all(isinstance(l, FiniteLaw) for l in laws):
        raise InvalidInput("need one finite law per step")
    return laws


def _check_size(laws):
    n = len(laws)
    if n > MAX_STEPS:
        raise SizeLimitError(f"N={n} exceeds {MAX_STEPS}")
    total = math.prod(len(l.values) for l in laws)
    if total > MAX_PATHS:
        raise SizeLimitError(f"{total} paths exceed the enumeration limit {MAX_PATHS}")
    return total


def _chunks(laws):
    """Yield (steps, probs) for consecutive blocks of all step sequences."""
    n = len(laws)
    sizes = [len(l.values) for l in laws]
    vals = [l.v for l in laws]
    probs = [l.p for l in laws]
    total = math.prod(sizes)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        steps = np.empty((idx.size, n))
        w = np.ones(idx.size)
        rem = idx
        for j in range(n - 1, -1, -1):
            d = rem % sizes[j]
            rem = rem // sizes[j]
            steps[:, j] = vals[j][d]
            w *= probs[j][d]
        yield steps, w


def brute_force_survival(step_law: Union[FiniteLaw, Sequence[FiniteLaw]], wall_values: Sequence[float],
                         x0: float, N: int, window: Optional[EndWindow] = None,
                         exact: bool = False) -> Union[float, Fraction]:
    """P(x0 + S_n >= wall[n] for n = 0..N, end condition) by enumeration.

    ``wall_values[n]`` is the barrier at integer time n.  With ``exact``
    the probabilities are accumulated as Fractions (slow; small N only).
    """
    if N < 0:
        raise InvalidInput("N must be non-negative")
    w = np.asarray(wall_values, dtype=float)
    if w.size < N + 1:
        raise InvalidInput("wall_values must cover times 0..N")
    if x0 - w[0] < -EPS:
        return Fraction(0) if exact else 0.0
    if N == 0:
        if window is None:
            return Fraction(1) if exact else 1.0
        lo, hi = window.bounds(0.0)
        ref = w[0] + (x0 if window.relative_to_start() else 0.0)
        ok = bool(in_window(x0 - ref, lo, hi))
        return (Fraction(int(ok)) if exact else float(ok))
    laws = _laws(step_law, N)
    _check_size(laws)
    if exact:
        return _exact(laws, w, x0, N, window)
    partial = []
    for steps, p in _chunks(laws):
        pos = x0 + np.cumsum(steps, axis=1)
        ok = np.all(pos - w[1:N + 1] >= -EPS, axis=1)
        if window is not None:
            lo, hi = window.bounds(float(N))
            ref = w[N] + (x0 if window.relative_to_start() else 0.0)
            ok &= in_window(pos[:, -1] - ref, lo, hi)
        partial.extend(p[ok].tolist())
    return math.fsum(partial)


def _exact(laws, w, x0, N, window) -> Fraction:
    total = Fraction(0)
    for combo in itertools.product(*[list(zip(l.values, l.probs)) for l in laws]):
        pos = x0
        ok = True
        prob = Fraction(1)
        for n, (v, q) in enumerate(combo, start=1):
            pos = pos + v
            prob *= Fraction(q)
            if pos - w[n] < -EPS:
                ok = False
                break
        if ok and window is not None:
            lo, hi = window.bounds(float(N))
            ref = w[N] + (x0 if window.relative_to_start() else 0.0)
            ok = bool(in_window(float(pos) - ref, lo, hi))
        if ok:
            total += prob
    return total


def exhaustive_feasible(step_law, wall_values, x0: float, N: int) -> bool:
    """Whether some step sequence of positive probability survives to N."""
    laws = _laws(step_law, N)
    laws = [FiniteLaw(tuple(v for v, q in zip(l.values, l.probs) if q > 0),
                      tuple(q for q in l.probs if q > 0)) for l in laws]
    _check_size(laws)
    w = np.asarray(wall_values, dtype=float)
    if x0 - w[0] < -EPS:
        return False
    for steps, _ in _chunks(laws):
        pos = x0 + np.cumsum(steps, axis=1)
        if np.any(np.all(pos - w[1:N + 1] >= -EPS, axis=1)):
            return True
    return False


# ---------------------------------------------------------------- FKG

class Event:
    """Increasing event on the path ``(B_1, ..., B_N)``."""

    def indicator(self, paths: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __and__(self, other):
        return AllOf((self, other))

    def __or__(self, other):
        return AnyOf((self, other))


@dataclass(frozen=True)
class Atom(Event):
    """``sum_k weights[k] B_{k+1} >= level`` with non-negative weights."""

    weights: tuple
    level: float

    def __post_init__(self):
        if any(not (w >= 0) for w in self.weights):
            raise InvalidEvent("event weights must be non-negative for an increasing event")

    def indicator(self, paths):
        wt = np.zeros(paths.shape[1])
        wt[: len(self.weights)] = self.weights
        return paths @ wt >= self.level - EPS


@dataclass(frozen=True)
class AllOf(Event):
    parts: tuple

    def indicator(self, paths):
        out = np.ones(paths.shape[0], bool)
        for e in self.parts:
            out &= e.indicator(paths)
        return out


@dataclass(frozen=True)
class AnyOf(Event):
    parts: tuple

    def indicator(self, paths):
        out = np.zeros(paths.shape[0], bool)
        for e in self.parts:
            out |= e.indicator(paths)
        return out


@dataclass(frozen=True)
class Always(Event):
    def indicator(self, paths):
        return np.ones(paths.shape[0], bool)


def coordinate(k: int, level: float, n: int) -> Atom:
    """The event ``{B_k >= level}`` on paths of length ``n`` (k is 1-based)."""
    w = [0.0] * n
    w[k - 1] = 1.0
    return Atom(tuple(w), level)


def event_from_dict(d: dict) -> Event:
    kind = d.get("kind")
    if kind == "atom":
        return Atom(tuple(float(x) for x in d["weights"]), float(d["level"]))
    if kind in ("and", "or"):
        parts = tuple(event_from_dict(p) for p in d["parts"])
        return AllOf(parts) if kind == "and" else AnyOf(parts)
    if kind == "always":
        return Always()
    raise InvalidEvent(f"unknown event kind {kind!r}")


def random_event(gen, n: int, depth: int = 2) -> Event:
    """A random increasing event built from atoms with and/or."""
    if depth == 0 or gen.random() < 0.4:
        k = int(gen.integers(1, n + 1))
        w = np.zeros(n)
        support = gen.choice(n, size=k, replace=False)
        w[support] = gen.integers(1, 4, size=k)
        level = float(gen.integers(-3, 3))
        return Atom(tuple(w.tolist()), level)
    parts = tuple(random_event(gen, n, depth - 1) for _ in range(int(gen.integers(2, 4))))
    return AllOf(parts) if gen.random() < 0.5 else AnyOf(parts)


def fkg_brute_check(step_law: FiniteLaw, N: int, event_a: Event, event_b: Event):
    """Exact P(A and B), P(A), P(B) for increasing events of a walk.

    Returns ``(p_ab, p_a, p_b, holds)`` with ``holds = p_ab >= p_a p_b - 1e-12``.
    """
    if N > 12:
        raise SizeLimitError("FKG enumeration is limited to N <= 12")
    for e in (event_a, event_b):
        if not isinstance(e, Event):
            raise InvalidEvent("events must be built from Atom/AllOf/AnyOf/Always")
    laws = _laws(step_law, N)
    _check_size(laws)
    ab, a, b = [], [], []
    for steps, p in _chunks(laws):
        paths = np.cumsum(steps, axis=1)
        ia = event_a.indicator(paths)
        ib = event_b.indicator(paths)
        a.extend(p[ia].tolist())
        b.extend(p[ib].tolist())
        ab.extend(p[ia & ib].tolist())
    p_ab, p_a, p_b = math.fsum(ab), math.fsum(a), math.fsum(b)
    return p_ab, p_a, p_b, p_ab >= p_a * p_b - 1e-12
