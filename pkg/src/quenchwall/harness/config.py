"""Experiment configuration: a YAML document with a schema id."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Optional

import yaml

from ..engine.curves import EndWindow
from ..engine.grid import GridConfig, Process
from ..errors import InvalidInput
from ..laws import law_from_dict
from ..walls import WallSpec

CONFIG_SCHEMA = "quenchwall.config/1"
OUT_ENV = "QUENCHWALL_OUT"
PROCESSES = ("bm", "ou", "rw", "rw-env")
ESTIMATORS = ("grid", "smc", "mc", "kingman")


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "quenchwall-out")


@dataclass
class ExperimentConfig:
    """One quenched experiment: ``n_walls`` walls, one estimator, one fit.

    ``horizons`` lists the reporting times; when empty it is generated from
    ``horizon_min``/``horizon_max`` (powers of two for the log-time scale,
    ``horizon_steps`` evenly spaced points otherwise).  ``wall`` is a wall
    spec mapping (see :class:`quenchwall.walls.WallSpec`); ``beta`` overrides
    its beta when given.  ``fit_correction`` is the power of the finite-size
    correction term of log-time fits (``None`` for a plain fit).
    """

    name: str = "experiment"
    process: str = "bm"
    wall: dict = field(default_factory=lambda: {"kind": "zero"})
    beta: Optional[float] = None
    walk_law: Optional[dict] = None
    ou_mu: float = 1.0
    ou_sigma: float = 1.0
    x0: float = 1.0
    horizons: list = field(default_factory=list)
    horizon_min: float = 4.0
    horizon_max: float = 4096.0
    horizon_steps: int = 16
    estimator: str = "grid"
    dx: float = 0.02
    nsig: float = 8.0
    bridge: bool = True
    particles: int = 2000
    replicates: int = 4
    samples: int = 100000
    window: Optional[list] = None
    window_scale: str = "sqrt-horizon"
    block_interval: list = field(default_factory=lambda: [0.5, math.inf])
    n_walls: int = 8
    seed: int = 2024
    fit_scale: str = "log-time"
    fit_window: Optional[list] = None
    fit_correction: Optional[float] = None
    gate: dict = field(default_factory=dict)
    out_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------ checks
    def validate(self):
        if self.process not in PROCESSES:
            raise InvalidInput(f"process must be one of {PROCESSES}")
        if self.estimator not in ESTIMATORS:
            raise InvalidInput(f"estimator must be one of {ESTIMATORS}")
        if self.estimator == "kingman" and self.process != "ou":
            raise InvalidInput("the block estimator needs the OU process")
        for name in ("particles", "replicates", "samples", "n_walls", "horizon_steps"):
            if not int(getattr(self, name)) >= 1:
                raise InvalidInput(f"{name} must be positive")
        if not (self.dx > 0 and self.nsig > 0):
            raise InvalidInput("grid budgets must be positive")
        if not 0 <= int(self.seed) < 1 << 64:
            raise InvalidInput("seed must be an unsigned 64-bit integer")
        if self.gate and set(self.gate) - {"ci_contains", "ci_lower_above", "ci_upper_below"}:
            raise InvalidInput(f"unknown gate keys {sorted(set(self.gate))}")
        h = self.horizon_list()
        if any(b <= a for a, b in zip(h, h[1:])) or h[0] <= 0:
            raise InvalidInput("horizons must be positive and increasing")
        self.wall_spec()
        self.end_window()

    def horizon_list(self) -> list:
        if self.horizons:
            return [float(x) for x in self.horizons]
        lo, hi = float(self.horizon_min), float(self.horizon_max)
        if not 0 < lo < hi:
            raise InvalidInput("need 0 < horizon_min < horizon_max")
        if self.fit_scale == "log-time":
            k0, k1 = math.ceil(math.log2(lo) - 1e-9), math.floor(math.log2(hi) + 1e-9)
            if k1 <= k0:
                raise InvalidInput("horizon range holds fewer than two powers of two")
            return [2.0**k for k in range(k0, k1 + 1)]
        n = int(self.horizon_steps)
        return [lo + (hi - lo) * i / (n - 1) for i in range(n)] if n > 1 else [hi]

    def wall_spec(self) -> WallSpec:
        d = dict(self.wall)
        if self.beta is not None and d.get("kind") != "iid":
            d["beta"] = float(self.beta)
        return WallSpec.from_dict(d)

    def end_window(self) -> Optional[EndWindow]:
        if self.window is None:
            return None
        a, b = self.window
        return EndWindow(float(a), float(b), self.window_scale)

    def grid_config(self) -> GridConfig:
        return GridConfig(dx=float(self.dx), nsig=float(self.nsig), bridge=bool(self.bridge))

    def walker(self) -> Process:
        if self.process == "bm":
            return Process("bm")
        if self.process == "ou":
            return Process("ou", float(self.ou_mu), float(self.ou_sigma))
        if self.process == "rw":
            law = law_from_dict(self.walk_law) if self.walk_law else None
            return Process("walk", law=law)
        return Process("env")

    # ------------------------------------------------------------ io
    def to_dict(self) -> dict:
        d = {"schema": CONFIG_SCHEMA}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = _plain(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        schema = d.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise InvalidInput(f"unsupported config schema {schema!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown config keys {sorted(unknown)}")
        if "block_interval" in d:
            d["block_interval"] = [_num(x) for x in d["block_interval"]]
        if d.get("window") is not None:
            d["window"] = [_num(x) for x in d["window"]]
        return cls(**d)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise InvalidInput(f"config is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidInput("config must be a mapping")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from None
        return cls.from_yaml(text)

    def digest(self) -> str:
        """Hash of everything that affects the numbers (not the output path)."""
        d = self.to_dict()
        d.pop("out_dir", None)
        d.pop("name", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _num(x):
    if isinstance(x, str):
        return float(x)
    return x


def _plain(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v
