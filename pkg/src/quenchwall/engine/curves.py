"""End windows and survival curves."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import io
import math
from typing import Optional

import numpy as np

from ..errors import InvalidInput

CURVE_SCHEMA = "quenchwall.curve/1"
CURVE_COLUMNS = ("horizon", "logp", "stderr", "estimator", "wall_id", "seed", "schema")
# tolerance for ties in exact (lattice) comparisons
EPS = 1e-9


@dataclass(frozen=True)
class EndWindow:
    """Terminal condition ``D_N in (a s(N), b s(N))``.

    ``D_N`` is ``B_N - beta W_N`` (the walker relative to its start) for the
    ``sqrt-horizon`` scale, where ``s(N) = sqrt(N)``, and ``X_N - beta Y_N``
    (absolute) for the ``constant`` scale, where ``s(N) = 1``.
    """

    a: float = 0.0
    b: float = math.inf
    scale: str = "sqrt-horizon"

    def __post_init__(self):
        if self.scale not in ("sqrt-horizon", "constant"):
            raise InvalidInput(f"unknown window scale {self.scale!r}")
        if not (self.a < self.b) or math.isnan(self.a) or self.a == math.inf:
            raise InvalidInput("window needs a < b")

    def bounds(self, horizon: float) -> tuple[float, float]:
        s = math.sqrt(horizon) if self.scale == "sqrt-horizon" else 1.0
        lo = self.a * s if math.isfinite(self.a) else self.a
        hi = self.b * s if math.isfinite(self.b) else self.b
        return lo, hi

    def relative_to_start(self) -> bool:
        return self.scale == "sqrt-horizon"

    def to_dict(self):
        return {"a": self.a, "b": self.b, "scale": self.scale}

    @classmethod
    def parse(cls, text: str, scale: str = "sqrt-horizon") -> "EndWindow":
        try:
            a, b = (float(s) for s in text.split(","))
        except ValueError:
            raise InvalidInput(f"window must look like 'a,b', got {text!r}") from None
        return cls(a, b, scale)


def in_window(q, lo: float, hi: float):
    """Exact open-interval test with a tie tolerance."""
    q = np.asarray(q, dtype=float)
    return (q > lo + EPS) & (q < hi - EPS)


def cell_fraction(q, dx: float, lo: float, hi: float):
    """Fraction of each cell ``[q - dx/2, q + dx/2]`` lying in ``(lo, hi)``."""
    q = np.asarray(q, dtype=float)
    left = np.maximum(q - dx / 2, lo)
    right = np.minimum(q + dx / 2, hi)
    return np.clip((right - left) / dx, 0.0, 1.0)


@dataclass
class CurveEntry:
    horizon: float
    logp: float
    stderr: float = 0.0
    estimator: str = "grid"
    flag: str = ""


@dataclass
class SurvivalCurve:
    entries: list = field(default_factory=list)
    wall_id: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def append(self, horizon, logp, stderr=0.0, estimator="grid", flag=""):
        if self.entries and horizon <= self.entries[-1].horizon:
            raise InvalidInput("horizons must be strictly increasing")
        if logp > 0:
            # round-off can push a probability-one estimate above zero
            if logp > 1e-9:
                raise InvalidInput(f"log-probability {logp} > 0")
            logp = 0.0
        if not stderr >= 0 and not math.isnan(stderr):
            raise InvalidInput("stderr must be non-negative")
        self.entries.append(CurveEntry(float(horizon), float(logp), float(stderr), estimator, flag))

    def __len__(self):
        return len(self.entries)

    @property
    def horizons(self) -> np.ndarray:
        return np.array([e.horizon for e in self.entries])

    @property
    def logp(self) -> np.ndarray:
        return np.array([e.logp for e in self.entries])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([e.stderr for e in self.entries])

    @property
    def died(self) -> bool:
        return any(e.logp == -math.inf for e in self.entries)

    def at(self, horizon: float) -> CurveEntry:
        for e in self.entries:
            if abs(e.horizon - horizon) <= 1e-9 * max(1.0, horizon):
                return e
        raise KeyError(horizon)

    def to_rows(self) -> list:
        return [[e.horizon, e.logp, e.stderr, e.estimator, self.wall_id, self.seed, CURVE_SCHEMA]
                for e in self.entries]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CURVE_COLUMNS)
        for r in self.to_rows():
            w.writerow([repr(float(r[0])), repr(float(r[1])), repr(float(r[2])), *r[3:]])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> list:
        """Parse CSV text into one curve per (wall_id, seed, estimator)."""
        rows = list(csv.DictReader(io.StringIO(text)))
        curves: dict = {}
        for r in rows:
            if r.get("schema", CURVE_SCHEMA) != CURVE_SCHEMA:
                raise InvalidInput(f"unsupported curve schema {r.get('schema')!r}")
            key = (int(r["wall_id"]), int(r["seed"]), r["estimator"])
            c = curves.setdefault(key, SurvivalCurve(wall_id=key[0], seed=key[1]))
            c.append(float(r["horizon"]), float(r["logp"]), float(r["stderr"]), r["estimator"])
        return list(curves.values())


def readout_label(window: Optional[EndWindow]) -> str:
    return "none" if window is None else f"({window.a},{window.b}):{window.scale}"
