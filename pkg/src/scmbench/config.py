"""Simulator configuration.

The config file is YAML with four top-level sections: ``variables``
(per-variable blocks declaring parents, the initial sampler, and the
transition rule), ``transitions`` (parameters for the hand-designed
rules, keyed by variable), ``benchmark`` (cohort sizes, seeds, and the
intervention/outcome declaration), and ``estimation`` (hyperparameter
grids, clipping, and bootstrap settings).  Loading validates structure
and vocabulary and computes a content digest that downstream manifests
and replay checks key on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from .errors import ConfigError
from .graph import ScmGraph, build_graph

__all__ = [
    "SAMPLER_TYPES",
    "TRANSITION_TYPES",
    "VariableConfig",
    "BenchmarkConfig",
    "BootstrapConfig",
    "EstimationConfig",
    "SimulatorConfig",
    "load_config",
    "default_config_path",
]

SAMPLER_TYPES = (
    "LogisticSampler",
    "RegressionSampler",
    "QuantileSampler",
    "ZeroInflatedSampler",
    "StudiesSampler",
    "IncomeSampler",
)

TRANSITION_TYPES = (
    "AgeTransition",
    "ConstantTransition",
    "EducationTransition",
    "StayOrRedrawTransition",
    "MaritalTransition",
    "HoursTransition",
    "CapitalTransition",
    "StudiesTransition",
    "IncomeTransition",
)


@dataclass(frozen=True)
class VariableConfig:
    """One ``variables`` block: parents and the two mechanism specs."""

    name: str
    parents: tuple[str, ...]
    sampler: Mapping
    seq_parents_curr: tuple[str, ...]
    seq_parents_prev: tuple[str, ...]
    seq_sampler: Mapping


@dataclass(frozen=True)
class BenchmarkConfig:
    t0: int = 2
    horizon: int = 7
    n_observational: int = 50_000
    n_counterfactual: int = 50_000
    seed_observational: int = 0
    seed_counterfactual: int = 1
    treatment: str = "studies"
    treated_value: str = "Full-time studies"
    control_value: str = "No studies"
    outcome: str = "income"

    def __post_init__(self) -> None:
        if not 1 <= self.t0 < self.horizon:
            raise ConfigError(
                f"benchmark t0 ({self.t0}) must lie in [1, horizon)"
            )
        if self.n_observational < 1 or self.n_counterfactual < 1:
            raise ConfigError("benchmark cohort sizes must be positive")
        if self.seed_observational == self.seed_counterfactual:
            raise ConfigError(
                "observational and counterfactual seeds must differ so the "
                "evaluation cohort is out of sample"
            )
        if self.treated_value == self.control_value:
            raise ConfigError("treated and control values must differ")


@dataclass(frozen=True)
class BootstrapConfig:
    iterations: int = 1000
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError("bootstrap iterations must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("bootstrap alpha must lie in (0, 1)")


@dataclass(frozen=True)
class EstimationConfig:
    propensity_clip: float = 0.01
    dml_residual_floor: float = 1e-3
    cv_folds: int = 5
    max_grid_points: int = 20
    rf_trees: int = 50
    gbt_rounds: int = 50
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    grids: Mapping[str, Mapping[str, tuple]] = field(default_factory=dict)
    estimators: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.propensity_clip < 0.5:
            raise ConfigError("propensity_clip must lie in [0, 0.5)")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")
        if self.max_grid_points < 1:
            raise ConfigError("max_grid_points must be positive")


@dataclass(frozen=True)
class SimulatorConfig:
    variables: tuple[VariableConfig, ...]
    transitions: Mapping[str, Mapping]
    benchmark: BenchmarkConfig
    estimation: EstimationConfig
    digest: str
    source: str = ""

    def variable(self, name: str) -> VariableConfig:
        for v in self.variables:
            if v.name == name:
                return v
        raise ConfigError(f"config declares no variable {name!r}")

    def graph(self) -> ScmGraph:
        return build_graph(
            {
                v.name: {
                    "parents": v.parents,
                    "seq_parents_curr": v.seq_parents_curr,
                    "seq_parents_prev": v.seq_parents_prev,
                }
                for v in self.variables
            }
        )


def default_config_path() -> Path:
    """Path of the packaged default configuration file."""
    return Path(resources.files("scmbench").joinpath("data/default_config.yaml"))


def _require_mapping(block, where: str) -> Mapping:
    if not isinstance(block, Mapping):
        raise ConfigError(f"{where} must be a mapping, got {type(block).__name__}")
    return block


def _build(cls, block: Mapping, where: str):
    try:
        return cls(**block)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _name_list(value, where: str) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, Sequence) or isinstance(value, str):
        raise ConfigError(f"{where} must be a list of variable names")
    out = []
    for item in value:
        if not isinstance(item, str):
            raise ConfigError(f"{where} contains a non-string entry {item!r}")
        out.append(item)
    return tuple(out)


def _parse_variable(name: str, block) -> VariableConfig:
    block = _require_mapping(block, f"variables.{name}")
    missing = [
        k
        for k in ("parents", "sampler", "seq_parents_curr", "seq_parents_prev",
                  "seq_sampler")
        if k not in block
    ]
    if missing:
        raise ConfigError(f"variables.{name} is missing {missing[0]!r}")
    sampler = dict(_require_mapping(block["sampler"], f"variables.{name}.sampler"))
    seq_sampler = dict(
        _require_mapping(block["seq_sampler"], f"variables.{name}.seq_sampler")
    )
    for spec, kinds, where in (
        (sampler, SAMPLER_TYPES, f"variables.{name}.sampler"),
        (seq_sampler, TRANSITION_TYPES, f"variables.{name}.seq_sampler"),
    ):
        kind = spec.get("type")
        if kind not in kinds:
            raise ConfigError(
                f"{where}.type must be one of {', '.join(kinds)}; got {kind!r}"
            )
    return VariableConfig(
        name=name,
        parents=_name_list(block["parents"], f"variables.{name}.parents"),
        sampler=sampler,
        seq_parents_curr=_name_list(
            block["seq_parents_curr"], f"variables.{name}.seq_parents_curr"
        ),
        seq_parents_prev=_name_list(
            block["seq_parents_prev"], f"variables.{name}.seq_parents_prev"
        ),
        seq_sampler=seq_sampler,
    )


def _parse_grids(block) -> dict[str, dict[str, tuple]]:
    grids: dict[str, dict[str, tuple]] = {}
    for family, grid in _require_mapping(block, "estimation.grids").items():
        grid = _require_mapping(grid, f"estimation.grids.{family}")
        parsed: dict[str, tuple] = {}
        for param, values in grid.items():
            if not isinstance(values, Sequence) or isinstance(values, str):
                raise ConfigError(
                    f"estimation.grids.{family}.{param} must be a list"
                )
            if not values:
                raise ConfigError(
                    f"estimation.grids.{family}.{param} must be non-empty"
                )
            parsed[param] = tuple(values)
        grids[family] = parsed
    return grids


def load_config(path: str | Path | None = None) -> SimulatorConfig:
    """Load and validate a config file (the packaged default when no
    path is given).

    Raises:
        ConfigError: on unreadable files, missing sections, unknown
            sampler or transition types, malformed parent lists, or a
            parent structure with cycles.
    """
    path = default_config_path() if path is None else Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    raw = _require_mapping(raw, "config")

    variables_block = _require_mapping(raw.get("variables"), "variables")
    if not variables_block:
        raise ConfigError("config declares no variables")
    variables = tuple(
        _parse_variable(name, block) for name, block in variables_block.items()
    )

    transitions = {
        name: dict(_require_mapping(block, f"transitions.{name}"))
        for name, block in _require_mapping(
            raw.get("transitions", {}), "transitions"
        ).items()
    }
    declared = {v.name for v in variables}
    for name in transitions:
        if name not in declared:
            raise ConfigError(
                f"transitions section names unknown variable {name!r}"
            )

    benchmark = _build(
        BenchmarkConfig, _require_mapping(raw.get("benchmark", {}), "benchmark"),
        "benchmark",
    )
    for role, var in (("treatment", benchmark.treatment),
                      ("outcome", benchmark.outcome)):
        if var not in declared:
            raise ConfigError(f"benchmark {role} names unknown variable {var!r}")

    est_block = dict(_require_mapping(raw.get("estimation", {}), "estimation"))
    bootstrap = _build(
        BootstrapConfig,
        _require_mapping(est_block.pop("bootstrap", {}), "estimation.bootstrap"),
        "estimation.bootstrap",
    )
    grids = _parse_grids(est_block.pop("grids", {}))
    estimators = _name_list(est_block.pop("estimators", ()), "estimation.estimators")
    estimation = _build(
        EstimationConfig,
        {"bootstrap": bootstrap, "grids": grids, "estimators": estimators,
         **est_block},
        "estimation",
    )

    config = SimulatorConfig(
        variables=variables,
        transitions=transitions,
        benchmark=benchmark,
        estimation=estimation,
        digest=hashlib.sha256(
            json.dumps(raw, sort_keys=True, default=str).encode("utf-8")
        ).hexdigest(),
        source=str(path),
    )
    config.graph()  # validates parent declarations and acyclicity
    return config
