"""One-dimensional step laws.

Three kinds are supported: finite-support laws, Gaussians, and laws given
by a density (moments and the moment generating function by quadrature).
They are the common currency of the random-walk samplers, the exhaustive
oracles and the tilting tools.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import InvalidInput, InvalidTilt


class StepLaw:
    """Base class.  Subclasses implement moments, sampling and the MGF."""

    # exponential-moment constant: E exp(c1 |X|) < inf
    c1: float = 1.0

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def var(self) -> float:
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def log_psi(self, theta: float) -> float:
        """log E exp(theta X)."""
        raise NotImplementedError

    def mgf_region(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def tilted(self, theta: float) -> "StepLaw":
        raise NotImplementedError

    def centered(self) -> "StepLaw":
        raise NotImplementedError

    def second_moment(self) -> float:
        return self.var + self.mean**2


@dataclass(frozen=True)
class FiniteLaw(StepLaw):
    """Law with finitely many atoms.  ``probs`` may be Fractions."""

    values: tuple
    probs: tuple
    c1: float = 1.0

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise InvalidInput("values and probs must be non-empty and of equal length")
        if any(p < 0 for p in self.probs):
            raise InvalidInput("negative probability")
        if abs(float(sum(self.probs)) - 1.0) > 1e-12:
            raise InvalidInput("probabilities must sum to one")
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "probs", tuple(self.probs))

    @classmethod
    def rademacher(cls) -> "FiniteLaw":
        return cls((-1, 1), (Fraction(1, 2), Fraction(1, 2)))

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def p(self) -> np.ndarray:
        return np.asarray([float(q) for q in self.probs])

    @property
    def mean(self) -> float:
        return float(np.dot(self.v, self.p))

    @property
    def var(self) -> float:
        m = self.mean
        return float(np.dot((self.v - m) ** 2, self.p))

    @property
    def support(self) -> tuple[float, float]:
        atoms = [v for v, q in zip(self.values, self.probs) if q > 0]
        return (float(min(atoms)), float(max(atoms)))

    def sample(self, gen, size):
        idx = gen.choice(len(self.values), size=size, p=self.p)
        return self.v[idx]

    def log_psi(self, theta):
        a = theta * self.v
        mx = a.max()
        return float(mx + math.log(np.dot(self.p, np.exp(a - mx))))

    def tilted(self, theta):
        a = theta * self.v
        w = self.p * np.exp(a - a.max())
        return FiniteLaw(self.values, tuple(w / w.sum()), self.c1)

    def centered(self):
        m = self.mean
        return FiniteLaw(tuple(float(v) - m for v in self.values), self.probs, self.c1)

    def lattice(self, dx: float) -> tuple[np.ndarray, np.ndarray]:
        """Integer offsets in units of ``dx`` and their probabilities."""
        k = np.rint(self.v / dx)
        if not np.allclose(k * dx, self.v, rtol=0, atol=1e-12):
            raise InvalidInput(f"support {self.values} is not on the lattice dx={dx}")
        return k.astype(np.int64), self.p


@dataclass(frozen=True)
class GaussianLaw(StepLaw):
    mu: float = 0.0
    sigma2: float = 1.0
    c1: float = 1.0

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise InvalidInput("variance must be non-negative")

    @property
    def mean(self):
        return float(self.mu)

    @property
    def var(self):
        return float(self.sigma2)

    @property
    def support(self):
        if self.sigma2 == 0:
            return (self.mu, self.mu)
        return (-math.inf, math.inf)

    def sample(self, gen, size):
        return self.mu + math.sqrt(self.sigma2) * gen.standard_normal(size)

    def log_psi(self, theta):
        return theta * self.mu + 0.5 * theta * theta * self.sigma2

    def tilted(self, theta):
        return GaussianLaw(self.mu + theta * self.sigma2, self.sigma2, self.c1)

    def centered(self):
        return GaussianLaw(0.0, self.sigma2, self.c1)


@dataclass(frozen=True)
class DensityLaw(StepLaw):
    """Law with density ``pdf`` on ``[lo, hi]``; everything by quadrature.

    ``mgf`` bounds the open interval of theta for which E exp(theta X) is
    finite; it is the caller's responsibility to state it correctly.
    """

    pdf: Callable[[float], float]
    lo: float = -math.inf
    hi: float = math.inf
    mgf: tuple = (-math.inf, math.inf)
    c1: float = 1.0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def _expect(self, g) -> float:
        def f(x):
            d = self.pdf(x)
            # far in the tails the density underflows before g overflows
            return 0.0 if d == 0 else g(x) * d

        val, _ = integrate.quad(f, self.lo, self.hi, limit=200, epsabs=1e-13, epsrel=1e-12)
        return val

    @classmethod
    def laplace(cls, scale: float = 1.0) -> "DensityLaw":
        b = float(scale)
        return cls(lambda x: math.exp(-abs(x) / b) / (2 * b), mgf=(-1 / b, 1 / b), c1=0.5 / b)

    @property
    def mean(self):
        if "mean" not in self._cache:
            self._cache["mean"] = self._expect(lambda x: x)
        return self._cache["mean"]

    @property
    def var(self):
        if "var" not in self._cache:
            m = self.mean
            self._cache["var"] = self._expect(lambda x: (x - m) ** 2)
        return self._cache["var"]

    @property
    def support(self):
        return (self.lo, self.hi)

    def mgf_region(self):
        return self.mgf

    def _check_theta(self, theta):
        a, b = self.mgf
        if not a < theta < b:
            raise InvalidTilt(f"theta={theta} outside the MGF region ({a}, {b})")

    def log_psi(self, theta):
        self._check_theta(theta)
        return math.log(self._expect(lambda x: math.exp(theta * x)))

    def tilted(self, theta):
        self._check_theta(theta)
        z = math.exp(self.log_psi(theta))
        base = self.pdf
        a, b = self.mgf
        return DensityLaw(lambda x: base(x) * math.exp(theta * x) / z, self.lo, self.hi,
                          (a - theta, b - theta), self.c1)

    def centered(self):
        m = self.mean
        base = self.pdf
        a, b = self.mgf
        return DensityLaw(lambda x: base(x + m), self.lo - m, self.hi - m, (a, b), self.c1)

    def sample(self, gen, size):
        # inverse CDF on a fine grid over the effective support
        if "icdf" not in self._cache:
            sd = math.sqrt(self.var)
            lo = max(self.lo, self.mean - 40 * sd)
            hi = min(self.hi, self.mean + 40 * sd)
            xs = np.linspace(lo, hi, 20001)
            dens = np.array([self.pdf(x) for x in xs])
            cdf = integrate.cumulative_trapezoid(dens, xs, initial=0.0)
            cdf /= cdf[-1]
            self._cache["icdf"] = (cdf, xs)
        cdf, xs = self._cache["icdf"]
        return np.interp(gen.random(size), cdf, xs)


def law_from_dict(d: dict) -> StepLaw:
    kind = d["kind"]
    if kind == "finite":
        return FiniteLaw(tuple(d["values"]), tuple(d["probs"]))
    if kind == "gaussian":
        return GaussianLaw(float(d.get("mean", 0.0)), float(d.get("var", 1.0)))
    if kind == "laplace":
        return DensityLaw.laplace(float(d.get("scale", 1.0)))
    raise InvalidInput(f"unknown law kind {kind!r}")


def law_to_dict(law: StepLaw) -> dict:
    if isinstance(law, FiniteLaw):
        return {"kind": "finite", "values": [float(v) for v in law.values], "probs": [float(q) for q in law.probs]}
    if isinstance(law, GaussianLaw):
        return {"kind": "gaussian", "mean": law.mu, "var": law.sigma2}
    raise InvalidInput("only finite and gaussian laws serialize")


def as_fractions(probs: Sequence) -> tuple:
    return tuple(Fraction(q).limit_denominator(1 << 30) if not isinstance(q, Fraction) else q for q in probs)
