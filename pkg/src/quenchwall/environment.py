"""Random walks in a time-inhomogeneous random environment.

An environment is an i.i.d. sequence of step laws ``mu_n``.  Given the
environment, steps ``X_n ~ mu_n`` are independent.  The derived objects are

* ``e_n = E(X_n | mu)``, the conditional drift;
* the wall ``W_n = -(e_1 + ... + e_n)``;
* the centred walk ``B_n = S_n + W_n`` where ``S_n = X_1 + ... + X_n``.

Three parametric families are supported (see :data:`FAMILIES`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidModel
from .laws import FiniteLaw, GaussianLaw, StepLaw
from .rng import as_generator

FAMILIES = ("gaussian-random-mean", "two-point-random-bias", "shifted-bernoulli-mixture")

_DEFAULTS = {
    # X_n ~ N(m_n, step_var), m_n ~ N(0, mean_var)
    "gaussian-random-mean": {"step_var": 1.0, "mean_var": 0.0},
    # X_n = +-step with P(+step) = p_n, p_n uniform on ``biases``
    "two-point-random-bias": {"step": 1.0, "biases": [0.25, 0.75]},
    # X_n = c_n + scale * (zeta_n - q), zeta_n ~ Bernoulli(q), c_n uniform on ``shifts``
    "shifted-bernoulli-mixture": {"scale": 1.0, "q": 0.5, "shifts": [-0.5, 0.5]},
}


def _finite(x) -> bool:
    return all(math.isfinite(float(v)) for v in np.ravel(x))


@dataclass(frozen=True)
class EnvModel:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidModel(f"unknown environment family {self.family!r}")
        full = dict(_DEFAULTS[self.family])
        unknown = set(self.params) - set(full)
        if unknown:
            raise InvalidModel(f"unknown parameters {sorted(unknown)} for {self.family}")
        full.update(self.params)
        object.__setattr__(self, "params", full)
        self._validate()

    def _validate(self):
        p = self.params
        if not _finite(list(_flat(p.values()))):
            raise InvalidModel("environment parameters must be finite")
        if self.family == "gaussian-random-mean":
            # a degenerate or negative step variance breaks the exponential moment bound
            if not p["step_var"] > 0 or p["mean_var"] < 0:
                raise InvalidModel("need step_var > 0 and mean_var >= 0")
        elif self.family == "two-point-random-bias":
            b = np.asarray(p["biases"], float)
            if not p["step"] > 0 or b.size == 0 or np.any((b < 0) | (b > 1)):
                raise InvalidModel("need step > 0 and biases in [0, 1]")
            if np.all(b * (1 - b) == 0):
                raise InvalidModel("all biases degenerate: the centred walk has zero variance")
        else:
            if not p["scale"] > 0 or not 0 < p["q"] < 1 or len(p["shifts"]) == 0:
                raise InvalidModel("need scale > 0, 0 < q < 1 and at least one shift")

    @property
    def b_var(self) -> float:
        """Var B_1 = E Var(X_1 | mu)."""
        p = self.params
        if self.family == "gaussian-random-mean":
            return float(p["step_var"])
        if self.family == "two-point-random-bias":
            b = np.asarray(p["biases"], float)
            return float(np.mean(4 * b * (1 - b))) * p["step"] ** 2
        return p["scale"] ** 2 * p["q"] * (1 - p["q"])

    @property
    def w_var(self) -> float:
        """Var W_1 = Var E(X_1 | mu)."""
        p = self.params
        if self.family == "gaussian-random-mean":
            return float(p["mean_var"])
        if self.family == "two-point-random-bias":
            e = p["step"] * (2 * np.asarray(p["biases"], float) - 1)
            return float(np.var(e))
        return float(np.var(np.asarray(p["shifts"], float)))

    @property
    def ratio(self) -> float:
        """sqrt(Var W_1 / Var B_1), the effective wall strength."""
        return math.sqrt(self.w_var / self.b_var)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": {k: (list(v) if isinstance(v, (list, tuple)) else v)
                                                   for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvModel":
        return cls(d["family"], dict(d.get("params", {})))


def _flat(values):
    for v in values:
        if isinstance(v, (list, tuple, np.ndarray)):
            yield from v
        else:
            yield v


@dataclass(frozen=True, eq=False)
class EnvRealization:
    """A frozen environment of length ``n``.

    ``labels`` holds the per-step random parameter (mean, bias or shift);
    ``cond_means[k-1] = E(X_k | mu)`` and ``wall[k] = W_k`` with ``W_0 = 0``.
    """

    model: EnvModel
    labels: np.ndarray
    cond_means: np.ndarray
    wall: np.ndarray

    @property
    def n(self) -> int:
        return self.labels.size

    def step_law(self, k: int) -> StepLaw:
        """Law ``mu_k`` of the k-th step (1-based)."""
        lab = float(self.labels[k - 1])
        p = self.model.params
        if self.model.family == "gaussian-random-mean":
            return GaussianLaw(lab, p["step_var"])
        if self.model.family == "two-point-random-bias":
            h = p["step"]
            return FiniteLaw((-h, h), (1 - lab, lab))
        s, q = p["scale"], p["q"]
        return FiniteLaw((lab - s * q, lab + s * (1 - q)), (1 - q, q))

    def b_step_law(self, k: int) -> StepLaw:
        """Law of ``B_k - B_{k-1} = X_k - E(X_k | mu)``."""
        return self.step_law(k).centered()

    def sample_steps(self, rng, size: int) -> np.ndarray:
        """``size`` independent draws of ``(X_1, ..., X_n)``, one per row."""
        gen = as_generator(rng)
        p = self.model.params
        n = self.n
        if self.model.family == "gaussian-random-mean":
            return self.labels + math.sqrt(p["step_var"]) * gen.standard_normal((size, n))
        u = gen.random((size, n))
        if self.model.family == "two-point-random-bias":
            return np.where(u < self.labels, p["step"], -p["step"])
        s, q = p["scale"], p["q"]
        return self.labels + s * ((u < q) - q)

    def sample_b(self, rng, size: int) -> np.ndarray:
        """Paths of B with ``B_0 = 0``, shape ``(size, n + 1)``."""
        x = self.sample_steps(rng, size) - self.cond_means
        out = np.zeros((size, self.n + 1))
        np.cumsum(x, axis=1, out=out[:, 1:])
        return out

    def sample_s(self, rng, size: int) -> np.ndarray:
        x = self.sample_steps(rng, size)
        out = np.zeros((size, self.n + 1))
        np.cumsum(x, axis=1, out=out[:, 1:])
        return out


def sample_env(model: EnvModel, n: int, rng) -> EnvRealization:
    """Draw ``mu_1..mu_n`` and derive the conditional means and the wall."""
    if n < 0:
        raise InvalidModel("n must be non-negative")
    gen = as_generator(rng)
    p = model.params
    if model.family == "gaussian-random-mean":
        labels = math.sqrt(p["mean_var"]) * gen.standard_normal(n)
        means = labels.copy()
    elif model.family == "two-point-random-bias":
        b = np.asarray(p["biases"], float)
        labels = b[gen.integers(0, b.size, n)]
        means = p["step"] * (2 * labels - 1)
    else:
        c = np.asarray(p["shifts"], float)
        labels = c[gen.integers(0, c.size, n)]
        # E(scale * (zeta - q)) = 0, so the conditional mean is the shift
        means = labels.copy()
    wall = np.zeros(n + 1)
    np.cumsum(-means, out=wall[1:])
    for a in (labels, means, wall):
        a.setflags(write=False)
    return EnvRealization(model, labels, means, wall)
