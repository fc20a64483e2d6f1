"""Run an experiment over independent walls and persist the results.

Wall ``i`` of an experiment with master seed ``s`` is sampled from
``task_stream(s, i, 0, ROLE_WALL)`` and its estimator draws from
``task_stream(s, i, 0, ROLE_<estimator>)``; nothing else is random, so the
output depends only on the configuration, not on ``jobs`` or task order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
import time
from typing import Optional

from ..analysis import ExponentFit, QuenchedAggregate, Verdict, aggregate_quenched, fit_exponent, fits_to_jsonl
from ..engine.curves import CURVE_COLUMNS, SurvivalCurve
from ..engine.grid import grid_survival
from ..engine.smc import direct_mc_survival, smc_survival
from ..errors import InvalidInput
from ..excursions import decompose, kingman_trend
from ..rng import ROLE_BOOTSTRAP, ROLE_MC, ROLE_SMC, ROLE_WALL, task_stream
from ..walls import check_feasibility, realize_wall
from .config import ExperimentConfig, default_out_dir

RECORD_SCHEMA = "quenchwall.record/1"


@dataclass
class WallResult:
    wall_id: int
    curve: SurvivalCurve
    fit: ExponentFit
    seconds: float
    note: str = ""


@dataclass
class RunRecord:
    config: ExperimentConfig
    config_hash: str
    walls: list
    aggregate: Optional[QuenchedAggregate]
    verdicts: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def curves(self) -> list:
        return [w.curve for w in self.walls]

    @property
    def fits(self) -> list:
        return [w.fit for w in self.walls]

    @property
    def passed(self) -> bool:
        return all(v.passed is not False for v in self.verdicts)

    def curves_csv(self) -> str:
        parts = [",".join(CURVE_COLUMNS) + "\n"]
        parts += [w.curve.to_csv(header=False) for w in self.walls]
        return "".join(parts)

    def results_jsonl(self) -> str:
        lines = fits_to_jsonl(self.fits)
        if self.aggregate is not None:
            agg = self.aggregate.to_dict()
            agg.pop("fits")
            lines += json.dumps(agg) + "\n"
        for v in self.verdicts:
            lines += json.dumps({"schema": "quenchwall.verdict/1", **v.to_dict()}) + "\n"
        return lines

    def to_dict(self) -> dict:
        return {"schema": RECORD_SCHEMA, "config_hash": self.config_hash,
                "config": self.config.to_dict(), "meta": self.meta,
                "aggregate": None if self.aggregate is None else self.aggregate.to_dict(),
                "verdicts": [v.to_dict() for v in self.verdicts]}

    def save(self, out_dir=None) -> Path:
        base = Path(out_dir or self.config.out_dir or default_out_dir())
        path = base / f"{self.config.name}-{self.config_hash[:12]}"
        path.mkdir(parents=True, exist_ok=True)
        (path / "config.yaml").write_text(self.config.to_yaml())
        (path / "curves.csv").write_text(self.curves_csv())
        (path / "results.jsonl").write_text(self.results_jsonl())
        (path / "record.json").write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))
        return path


def run_wall(config: ExperimentConfig, wall_id: int) -> WallResult:
    """Everything for one wall; a pure function of (config, wall_id)."""
    t0 = time.perf_counter()
    spec = config.wall_spec()
    horizons = config.horizon_list()
    seed = int(config.seed)
    wall = realize_wall(spec, horizons[-1], task_stream(seed, wall_id, 0, ROLE_WALL))
    process = config.walker()
    window = config.end_window()
    note = ""
    if config.estimator == "kingman":
        return _run_blocks(config, wall, wall_id, t0)
    if process.kind in ("walk", "env") and spec.kind in ("random-walk", "environment", "zero"):
        # law-level status only annotates; the engine finds the actual death time
        law = process.law if process.kind == "walk" else None
        note = check_feasibility(law, spec, config.x0).status
    if config.estimator == "grid":
        curve = grid_survival(wall, config.x0, horizons, window, config.grid_config(), process, wall_id)
    elif config.estimator == "smc":
        curve = smc_survival(wall, config.x0, horizons, window, int(config.particles),
                             task_stream(seed, wall_id, 0, ROLE_SMC), process,
                             replicates=int(config.replicates), bridge=config.bridge, wall_id=wall_id)
    else:
        curve = direct_mc_survival(wall, config.x0, horizons, window, int(config.samples),
                                   task_stream(seed, wall_id, 0, ROLE_MC), process,
                                   bridge=config.bridge, wall_id=wall_id)
    curve.seed = seed
    try:
        fit = fit_exponent(curve, config.fit_scale, config.fit_window, config.fit_correction)
    except InvalidInput as exc:
        raise InvalidInput(f"wall {wall_id}: {exc}") from None
    return WallResult(wall_id, curve, fit, time.perf_counter() - t0, note)


def _run_blocks(config, wall, wall_id, t0) -> WallResult:
    dec = decompose(wall.underlying)
    trend = kingman_trend(wall, dec, config.grid_config(), interval=tuple(config.block_interval),
                          process=config.walker())
    curve = SurvivalCurve(wall_id=wall_id, seed=int(config.seed))
    rho0 = float(dec.rho[0])
    for n, q in zip(trend.n, trend.q):
        curve.append(float(dec.rho[int(n)]) - rho0, -float(q), 0.0, "kingman")
    lo = int(trend.n[-1] // 3)
    fit = ExponentFit(trend.gamma, trend.gamma_stderr if math.isfinite(trend.gamma_stderr) else 0.0, "time",
                      (float(curve.horizons[lo]), float(curve.horizons[-1])), math.nan,
                      int(trend.n.size - lo), trend.flag == "died", None, wall_id)
    curve.meta["mean_block_length"] = trend.mean_length
    curve.meta["rate"] = trend.rate
    return WallResult(wall_id, curve, fit, time.perf_counter() - t0, trend.flag)


def _gate_verdicts(config: ExperimentConfig, agg: Optional[QuenchedAggregate]) -> list:
    out = []
    for key, value in config.gate.items():
        value = float(value)
        if agg is None:
            out.append(Verdict(key, False, "no aggregate"))
            continue
        lo, hi = agg.ci95
        ok = {"ci_contains": lo <= value <= hi, "ci_lower_above": lo > value, "ci_upper_below": hi < value}[key]
        out.append(Verdict(key, ok, f"CI ({lo:.4f}, {hi:.4f}) vs {value}"))
    return out


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> RunRecord:
    """Run all walls (in ``jobs`` worker processes) and aggregate."""
    t0 = time.perf_counter()
    ids = list(range(int(config.n_walls)))
    if jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_wall, [config] * len(ids), ids))
    else:
        results = [run_wall(config, i) for i in ids]
    results.sort(key=lambda r: r.wall_id)
    feasible = [r for r in results if not r.fit.infeasible]
    agg = None
    verdicts = []
    if feasible:
        agg = aggregate_quenched([r.fit for r in results],
                                 rng=task_stream(int(config.seed), 0, 0, ROLE_BOOTSTRAP))
    else:
        verdicts.append(Verdict("experiment", False, "estimator died on every wall (infeasible branch)"))
    verdicts += _gate_verdicts(config, agg)
    meta = {"seconds": time.perf_counter() - t0, "jobs": jobs,
            "wall_seconds": [r.seconds for r in results], "notes": [r.note for r in results]}
    return RunRecord(config, config.digest(), results, agg, verdicts, meta)


def replay(record_path, jobs: int = 1) -> tuple:
    """Re-run the configuration stored in a record directory.

    Returns ``(record, identical)`` where ``identical`` says whether the new
    curves CSV matches the stored one byte for byte.
    """
    path = Path(record_path)
    if path.is_file():
        path = path.parent
    try:
        stored = json.loads((path / "record.json").read_text())
        old_csv = (path / "curves.csv").read_text()
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read record at {path}: {exc}") from None
    if stored.get("schema") != RECORD_SCHEMA:
        raise InvalidInput(f"unsupported record schema {stored.get('schema')!r}")
    config = ExperimentConfig.from_dict(stored["config"])
    if config.digest() != stored["config_hash"]:
        raise InvalidInput("record config does not match its hash")
    rec = run_experiment(config, jobs=jobs)
    return rec, rec.curves_csv() == old_csv
