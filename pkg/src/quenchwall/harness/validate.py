"""Self-checks: the quick property battery and the full acceptance run."""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import time
from typing import Callable, Optional

from ..analysis import Verdict, fit_exponent
from ..engine.grid import GridConfig, grid_survival
from ..rng import task_stream
from ..walls import WallSpec, realize_wall
from .acceptance import CRITERIA, QUICK, CriterionResult, Suite, run_criterion

REPORT_SCHEMA = "quenchwall.validation/1"
LEVELS = ("quick", "full")


def zero_wall_slope(dt: float, config: GridConfig, horizon: float = 256.0) -> float:
    """Plain log-time slope of the zero-wall BM curve on a uniform grid."""
    hs = [2.0**k for k in range(2, int(round(horizon)).bit_length())]
    wall = realize_wall(WallSpec("zero", dt=dt), hs[-1], task_stream(0, 0))
    curve = grid_survival(wall, 1.0, hs, config=config)
    return fit_exponent(curve).gamma_hat


def bias_detector(config: GridConfig = GridConfig(), dt: float = 1.0, tol: float = 1e-3) -> Verdict:
    """Flag time-discretization bias: the slope must not move when dt shrinks by 4.

    With continuous monitoring the grid result hardly depends on dt; with
    the bridge factor switched off, crossings between grid times go unseen
    and the coarse slope drifts away from the fine one.  The plain fit is
    used on purpose: the correction regressor would absorb the shift.
    """
    coarse = zero_wall_slope(dt, config)
    fine = zero_wall_slope(dt / 4, config)
    shift = coarse - fine
    return Verdict("dt-bias", abs(shift) <= tol,
                   f"slope {coarse:.4f} at dt={dt:g} vs {fine:.4f} at dt={dt / 4:g} (shift {shift:+.4f}, tol {tol:g})")


@dataclass
class ValidationReport:
    level: str
    results: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def table(self) -> str:
        lines = [r.line() for r in self.results]
        n_ok = sum(r.passed for r in self.results)
        lines.append(f"{n_ok}/{len(self.results)} passed ({self.level}, {self.seconds:.1f}s)")
        return "\n".join(lines)

    def to_jsonl(self) -> str:
        head = {"schema": REPORT_SCHEMA, "level": self.level, "passed": self.passed, "seconds": self.seconds}
        return json.dumps(head) + "\n" + "".join(json.dumps(r.to_dict()) + "\n" for r in self.results)


def validate(level: str = "quick", jobs: int = 1,
             progress: Optional[Callable[[CriterionResult], None]] = None) -> ValidationReport:
    """``quick``: oracle, FKG, subadditivity, tilting and feasibility checks plus
    the dt-bias detector.  ``full``: every acceptance criterion."""
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    t0 = time.perf_counter()
    suite = Suite(jobs=jobs)
    report = ValidationReport(level)
    numbers = QUICK if level == "quick" else sorted(CRITERIA)
    for k in numbers:
        res = run_criterion(k, suite)
        report.results.append(res)
        if progress is not None:
            progress(res)
    if level == "quick":
        t1 = time.perf_counter()
        v = bias_detector()
        res = CriterionResult(0, "dt-bias detector", bool(v.passed), v.detail, time.perf_counter() - t1)
        report.results.append(res)
        if progress is not None:
            progress(res)
    report.seconds = time.perf_counter() - t0
    return report
