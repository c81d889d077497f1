"""Experiment configuration: a YAML file of nested keys with validated
dataclass mirrors and full round-trip (parse -> serialize -> parse is the
identity).

Defaults reproduce the reference simulation study: drift
``((0.2, -5), (-3, 0.5))``, diffusion ``((1, 0.3), (0.3, 0.5))``, Gaussian
start ``N((1, 0), 0.25 I)``, horizon 1, schedules ``w* = 1`` vs ``w0 = 0``,
200 units, 500 bootstrap replicates, 95% intervals.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .estimands import TreatmentPlan
from .sde import ModelParams

__all__ = [
    "ConfigError",
    "ModelConfig",
    "PlanConfig",
    "BiasTableConfig",
    "SimulateConfig",
    "ZetaConfig",
    "ExperimentConfig",
    "load_config",
    "dump_config",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class ModelConfig:
    beta: list = field(default_factory=lambda: [[0.2, -5.0], [-3.0, 0.5]])
    sigma: list = field(default_factory=lambda: [[1.0, 0.3], [0.3, 0.5]])
    init_mean: list = field(default_factory=lambda: [1.0, 0.0])
    init_cov: list = field(default_factory=lambda: [[0.25, 0.0], [0.0, 0.25]])
    horizon: float = 1.0

    def to_params(self) -> ModelParams:
        try:
            return ModelParams(
                beta=np.array(self.beta, dtype=float),
                sigma=np.array(self.sigma, dtype=float),
                init_mean=np.array(self.init_mean, dtype=float),
                init_cov=np.array(self.init_cov, dtype=float),
                horizon=float(self.horizon),
            )
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc


@dataclass
class PlanConfig:
    kind: str = "constant"
    value: float = 1.0
    breakpoints: list = field(default_factory=list)
    values: list = field(default_factory=list)
    times: list = field(default_factory=list)

    def to_plan(self, horizon: float) -> TreatmentPlan:
        try:
            if self.kind == "constant":
                return TreatmentPlan.constant(self.value, horizon=horizon)
            if self.kind == "piecewise":
                return TreatmentPlan.piecewise(self.breakpoints, self.values, horizon=horizon)
            if self.kind == "tabulated":
                return TreatmentPlan.tabulated(self.times, self.values, horizon=horizon)
        except ValueError as exc:
            raise ConfigError(f"plan ({self.kind}): {exc}") from exc
        raise ConfigError(f"plan.kind: unknown kind {self.kind!r}")


@dataclass
class BiasTableConfig:
    beta11: list = field(default_factory=lambda: [0.2, 0.5, 1.0])
    beta21: list = field(default_factory=lambda: [-3.0, 0.0, 3.0])
    beta12: list = field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])
    j_values: list = field(default_factory=lambda: [2**k for k in range(1, 15)])


@dataclass
class SimulateConfig:
    n_units: int = 5
    j: int = 100


@dataclass
class ZetaConfig:
    beta12: list = field(default_factory=lambda: [-10.0, -8.0, -6.0, -5.0, -4.0, -3.0])
    j_values: list = field(default_factory=lambda: [8, 16, 24, 32, 40])
    n_units: int = 200
    n_boot: int = 500
    alpha: float = 0.05
    replicates: int = 20


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    plan_star: PlanConfig = field(default_factory=PlanConfig)
    plan_base: PlanConfig = field(default_factory=lambda: PlanConfig(value=0.0))
    bias_table: BiasTableConfig = field(default_factory=BiasTableConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    zeta: ZetaConfig = field(default_factory=ZetaConfig)
    seed: int = 20260809
    threads: int = 1
    out_dir: str = "results"

    def validate(self) -> None:
        self.model.to_params()
        horizon = float(self.model.horizon)
        self.plan_star.to_plan(horizon)
        self.plan_base.to_plan(horizon)
        _require(self.seed >= 0, "seed: must be non-negative")
        _require(self.threads >= 1, "threads: must be >= 1")
        bt = self.bias_table
        for key in ("beta11", "beta21", "beta12", "j_values"):
            _require(len(getattr(bt, key)) > 0, f"bias_table.{key}: sweep must be non-empty")
        for i, j in enumerate(bt.j_values):
            _require(int(j) == j and j >= 1, f"bias_table.j_values[{i}]: J must be an integer >= 1")
        _require(self.simulate.n_units >= 1, "simulate.n_units: must be >= 1")
        _require(self.simulate.j >= 1, "simulate.j: must be >= 1")
        z = self.zeta
        _require(len(z.beta12) > 0, "zeta.beta12: sweep must be non-empty")
        _require(len(z.j_values) > 0, "zeta.j_values: sweep must be non-empty")
        for i, j in enumerate(z.j_values):
            _require(
                int(j) == j and j >= 2 and j % 2 == 0,
                f"zeta.j_values[{i}]: grid halving needs an even J >= 2, got {j}",
            )
        _require(z.n_units >= 1, "zeta.n_units: must be >= 1")
        _require(z.n_boot >= 2, "zeta.n_boot: must be >= 2")
        _require(0.0 < z.alpha < 1.0, "zeta.alpha: must be in (0, 1)")
        _require(z.replicates >= 1, "zeta.replicates: must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = copy.deepcopy(raw or {})
        cfg = cls()
        sections = {
            "model": ModelConfig,
            "plan_star": PlanConfig,
            "plan_base": PlanConfig,
            "bias_table": BiasTableConfig,
            "simulate": SimulateConfig,
            "zeta": ZetaConfig,
        }
        for key, value in raw.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ConfigError(f"{key}: expected a mapping of keys")
                section_cls = sections[key]
                known = {f.name for f in fields(section_cls)}
                extra = set(value) - known
                if extra:
                    raise ConfigError(f"{key}.{sorted(extra)[0]}: unknown key")
                setattr(cfg, key, section_cls(**value))
            elif key in ("seed", "threads", "out_dir"):
                setattr(cfg, key, value)
            else:
                raise ConfigError(f"{key}: unknown top-level key")
        return cfg

    def params_hash(self) -> str:
        """Stable short digest of everything that determines an experiment
        cell's law (used to key CSV rows across runs).  Output location and
        worker count are excluded: they must not change results."""
        law = {k: v for k, v in self.to_dict().items() if k not in ("out_dir", "threads")}
        payload = repr(sorted(law.items())).encode()
        return hashlib.sha256(payload).hexdigest()[:12]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML config file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg.validate()
    return cfg


def dump_config(cfg: ExperimentConfig, path) -> None:
    """Serialize a config back to YAML (round-trips through load)."""
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
