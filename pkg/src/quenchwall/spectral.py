"""Annealed decay rate of the two-OU problem.

The annealed exponent is the principal Dirichlet eigenvalue of

    -L u = -(1/2)(u_xx + u_yy) + mu1 x u_x + mu2 y u_y

on ``{x > beta y}`` (unit noise in both coordinates).  The domain is cut
to the box ``[-L, L]^2``, discretised with five-point finite differences
(Shortley-Weller near the slanted boundary, upwind or central drift) and
the eigenvalue is found by inverse power iteration with a sparse LU
factorisation.  :func:`annealed_mc` estimates the same rate by simulation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import io
import math
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .engine.curves import EndWindow, SurvivalCurve, in_window
from .errors import ConvergenceError, InvalidInput, ParameterDomainError
from .paths import OuParams, bridge_noncrossing
from .rng import as_generator

SPECTRAL_SCHEMA = "quenchwall.spectral/1"
SPECTRAL_COLUMNS = ("mu1", "mu2", "beta", "lambda1", "residual", "L", "h", "schema")
# nodes closer than this fraction of h to the slanted boundary are boundary nodes
_SNAP = 1e-8


@dataclass(frozen=True)
class SpectralProblem:
    mu1: float
    mu2: float
    beta: float
    L: float = 8.0
    h: float = 0.05
    scheme: str = "upwind"

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ParameterDomainError("both OU rates must be positive")
        if not math.isfinite(self.beta):
            raise InvalidInput("beta must be finite")
        if not (self.L > 0 and self.h > 0):
            raise InvalidInput("L and h must be positive")
        n = self.L / self.h
        if abs(n - round(n)) > 1e-9 * n:
            raise InvalidInput("L/h must be an integer")
        if self.scheme not in ("upwind", "central"):
            raise InvalidInput(f"unknown drift scheme {self.scheme!r}")

    @property
    def n_side(self) -> int:
        return int(round(self.L / self.h))

    @property
    def peclet(self) -> float:
        """Largest cell Peclet number ``|drift| h / diffusion`` on the box."""
        return 2.0 * max(self.mu1, self.mu2) * self.L * self.h


@dataclass
class Assembly:
    """Sparse ``-L`` on the interior nodes and the node coordinates."""

    matrix: sp.csr_matrix
    x: np.ndarray
    y: np.ndarray
    near_box: np.ndarray
    problem: SpectralProblem


def _axis_terms(dist_minus, dist_plus, drift, scheme):
    """Coefficients of ``-(1/2) u'' + drift u'`` for one axis.

    Returns (diag, coef_minus, coef_plus) for the stencil
    ``diag u_0 + coef_minus u_- + coef_plus u_+``.
    """
    hm, hp = dist_minus, dist_plus
    # -(1/2) * 2/(hm+hp) * [(u+ - u0)/hp - (u0 - u-)/hm]
    s = 1.0 / (hm + hp)
    cm = -s / hm
    cp = -s / hp
    d = s / hm + s / hp
    if scheme == "upwind":
        # the generator's velocity is -drift: difference against it so that
        # off-diagonal entries stay non-positive
        fwd = drift < 0
        cp = cp + np.where(fwd, drift / hp, 0.0)
        d = d + np.where(fwd, -drift / hp, drift / hm)
        cm = cm + np.where(fwd, 0.0, -drift / hm)
    else:
        # non-uniform central difference of the first derivative
        den = hm * hp * (hm + hp)
        cp = cp + drift * hm * hm / den
        cm = cm - drift * hp * hp / den
        d = d + drift * (hp * hp - hm * hm) / den
    return d, cm, cp


def assemble_generator(problem: SpectralProblem, diffusion_only: bool = False) -> Assembly:
    """Assemble ``-L`` with Dirichlet conditions on ``x = beta y`` and the box.

    Parameters
    ----------
    diffusion_only : bool
        Drop the drift terms (for stencil checks).
    """
    if problem.scheme == "central" and not diffusion_only and problem.peclet > 2:
        raise ParameterDomainError(
            f"cell Peclet number {problem.peclet:.3g} > 2: central drift is not monotone; use upwind")
    n = problem.n_side
    h, beta = problem.h, problem.beta
    coords = -problem.L + h * np.arange(2 * n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    gap = X - beta * Y
    inside = gap > _SNAP * h
    inside[[0, -1], :] = False
    inside[:, [0, -1]] = False
    idx = -np.ones(X.shape, dtype=np.int64)
    ii, jj = np.nonzero(inside)
    idx[ii, jj] = np.arange(ii.size)
    x, y = X[ii, jj], Y[ii, jj]
    mu1 = 0.0 if diffusion_only else problem.mu1
    mu2 = 0.0 if diffusion_only else problem.mu2

    rows, cols, vals = [], [], []
    diag = np.zeros(ii.size)

    # x direction: the slanted boundary can only be crossed towards -x
    left_in = inside[ii - 1, jj]
    hm = np.where(left_in, h, np.minimum(h, gap[ii, jj]))
    hp = np.full(ii.size, h)
    d, cm, cp = _axis_terms(hm, hp, mu1 * x, problem.scheme)
    diag += d
    for sel, off, c in ((left_in, -1, cm), (inside[ii + 1, jj], 1, cp)):
        k = np.nonzero(sel)[0]
        rows.append(k)
        cols.append(idx[ii[k] + off, jj[k]])
        vals.append(c[k])

    # y direction: the boundary x = beta y is crossed towards +y if beta > 0
    down_in = inside[ii, jj - 1]
    up_in = inside[ii, jj + 1]
    hm = np.full(ii.size, h)
    hp = np.full(ii.size, h)
    if beta != 0:
        dist = (x - beta * y) / abs(beta)
        if beta > 0:
            hp = np.where(up_in, h, np.minimum(h, dist))
        else:
            hm = np.where(down_in, h, np.minimum(h, dist))
    d, cm, cp = _axis_terms(hm, hp, mu2 * y, problem.scheme)
    diag += d
    for sel, off, c in ((down_in, -1, cm), (up_in, 1, cp)):
        k = np.nonzero(sel)[0]
        rows.append(k)
        cols.append(idx[ii[k], jj[k] + off])
        vals.append(c[k])

    rows.append(np.arange(ii.size))
    cols.append(np.arange(ii.size))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ii.size, ii.size))
    near = (ii <= 1) | (ii >= 2 * n - 1) | (jj <= 1) | (jj >= 2 * n - 1)
    return Assembly(A, x, y, near, problem)


@dataclass
class EigenResult:
    lambda1: float
    residual: float
    truncation: float
    iterations: int
    problem: Optional[SpectralProblem] = None
    vector: Optional[np.ndarray] = field(default=None, repr=False)
    lambda_wide: float = math.nan

    @property
    def truncation_shift(self) -> float:
        """``|lambda(1.25 L) - lambda(L)|`` when the wider box was solved."""
        return abs(self.lambda_wide - self.lambda1)

    def to_row(self) -> list:
        p = self.problem
        return [p.mu1, p.mu2, p.beta, self.lambda1, self.residual, p.L, p.h, SPECTRAL_SCHEMA]


def principal_eigenvalue(op, tol: float = 1e-10, max_iter: int = 500) -> EigenResult:
    """Smallest eigenvalue of ``op`` (an :class:`Assembly` or a sparse matrix
    for ``-L``) by inverse power iteration.

    Convergence is declared when the relative eigen-residual
    ``||A v - lambda v|| / (|lambda| ||v||)`` falls below ``tol``.
    """
    A = op.matrix if isinstance(op, Assembly) else sp.csr_matrix(op)
    if A.shape[0] == 0:
        raise InvalidInput("empty operator")
    lu = splu(A.tocsc())
    v = np.ones(A.shape[0])
    v /= np.linalg.norm(v)
    lam, res = math.nan, math.inf
    for it in range(1, max_iter + 1):
        w = lu.solve(v)
        v = w / np.linalg.norm(w)
        Av = A @ v
        lam = float(v @ Av)
        res = float(np.linalg.norm(Av - lam * v) / max(abs(lam), 1e-300))
        if res < tol:
            break
    else:
        raise ConvergenceError(f"inverse iteration did not reach {tol} (residual {res:.3g})", last=v)
    if v.sum() < 0:
        v = -v
    trunc = math.nan
    if isinstance(op, Assembly):
        # share of the eigenvector's mass under the stationary OU law that
        # sits next to the outer box
        p = op.problem
        wgt = np.abs(v) * np.exp(-p.mu1 * op.x**2 - p.mu2 * op.y**2)
        trunc = float(wgt[op.near_box].sum() / wgt.sum())
    return EigenResult(lam, res, trunc, it, getattr(op, "problem", None), v)


def solve(mu1: float, mu2: float, beta: float, L: float = 8.0, h: float = 0.05,
          scheme: str = "upwind", tol: float = 1e-10, check_truncation: bool = False) -> EigenResult:
    """Annealed exponent for unit noise; with ``check_truncation`` the
    problem is re-solved on the box of half-width 1.25 L."""
    prob = SpectralProblem(mu1, mu2, beta, L, h, scheme)
    res = principal_eigenvalue(assemble_generator(prob), tol)
    if check_truncation:
        wide_L = h * math.ceil(1.25 * L / h - 1e-9)
        wide = principal_eigenvalue(assemble_generator(SpectralProblem(mu1, mu2, beta, wide_L, h, scheme)), tol)
        res.lambda_wide = wide.lambda1
    return res


def annealed_exponent(mu1: float, mu2: float, beta: float, sigma1: float = 1.0, sigma2: float = 1.0,
                      **kw) -> EigenResult:
    """Rate for noise levels ``sigma1`` (walker) and ``sigma2`` (wall).

    Dividing the walker by sigma1 turns the problem into the unit-noise one
    with ``beta sigma2 / sigma1``.
    """
    if not (sigma1 > 0 and sigma2 > 0):
        raise ParameterDomainError("noise levels must be positive")
    return solve(mu1, mu2, beta * sigma2 / sigma1, **kw)


def principal_eigenvalue_1d(mu: float, L: float = 8.0, h: float = 0.01, scheme: str = "upwind",
                            tol: float = 1e-10) -> float:
    """Dirichlet eigenvalue of ``-(1/2) u'' + mu x u'`` on ``(0, L)``."""
    if not mu > 0:
        raise ParameterDomainError("mu must be positive")
    n = int(round(L / h))
    x = h * np.arange(1, n)
    hv = np.full(x.size, h)
    d, cm, cp = _axis_terms(hv, hv, mu * x, scheme)
    A = sp.diags([cm[1:], d, cp[:-1]], [-1, 0, 1], format="csc")
    return principal_eigenvalue(A, tol).lambda1


def results_to_csv(results: Sequence[EigenResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SPECTRAL_COLUMNS)
    for r in results:
        w.writerow(r.to_row())
    return buf.getvalue()


# ---------------------------------------------------------------- Monte Carlo

def annealed_mc(mu1: float, mu2: float, beta: float, x0: float, y0: float, horizons: Sequence[float],
                window: Optional[EndWindow], samples: int, rng, dt: float = 2.0**-6,
                chunk: int = 50000) -> SurvivalCurve:
    """Direct simulation of ``P(X_s >= beta Y_s for s <= t, X_t - beta Y_t in window)``
    with the wall re-drawn for every sample.

    Both coordinates use exact OU transitions on a uniform grid; between grid
    points the gap ``X - beta Y`` is treated as a Brownian bridge with
    variance rate ``1 + beta^2``.  A horizon without survivors ends the curve.
    """
    if not x0 - beta * y0 > 0:
        raise InvalidInput("need x0 > beta y0")
    if window is not None and window.scale != "constant":
        raise InvalidInput("annealed OU windows use the constant scale")
    px, py = OuParams(mu1, 1.0), OuParams(mu2, 1.0)
    horizons = [float(h) for h in horizons]
    steps = [int(round(h / dt)) for h in horizons]
    if any(abs(s * dt - h) > 1e-9 * max(1.0, h) for s, h in zip(steps, horizons)):
        raise InvalidInput("horizons must be multiples of dt")
    if any(b <= a for a, b in zip(steps, steps[1:])) or steps[0] < 1:
        raise InvalidInput("horizons must be positive and strictly increasing")
    gen = as_generator(rng)
    counts = np.zeros(len(horizons), dtype=np.int64)
    rate = 1.0 + beta * beta
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        done += m
        x = np.full(m, float(x0))
        y = np.full(m, float(y0))
        alive = np.ones(m, bool)
        j = 0
        for k in range(1, steps[-1] + 1):
            mx, vx = px.transition(x, dt)
            my, vy = py.transition(y, dt)
            nx = mx + math.sqrt(vx) * gen.standard_normal(m)
            ny = my + math.sqrt(vy) * gen.standard_normal(m)
            g = bridge_noncrossing(x - beta * y, nx - beta * ny, dt, rate)
            alive &= gen.random(m) < g
            x, y = nx, ny
            if k == steps[j]:
                z = x - beta * y
                ok = alive if window is None else alive & in_window(z, *window.bounds(horizons[j]))
                counts[j] += int(ok.sum())
                j += 1
            if not alive.any():
                break
    curve = SurvivalCurve()
    for h, c in zip(horizons, counts):
        if c == 0:
            curve.meta["truncated_at"] = h
            break
        p = c / samples
        curve.append(h, math.log(p), math.sqrt((1 - p) / (samples * p)), "mc")
    curve.meta["counts"] = counts.tolist()
    curve.meta["samples"] = samples
    return curve
