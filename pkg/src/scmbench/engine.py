"""Fitting the simulator and rolling subjects forward in time.

``fit_scm`` turns a config plus a cleaned base cohort into a bundle of
initial-state samplers and transition rules whose parent sets are
checked against the declared graph.  ``simulate_panel`` runs ancestral
sampling over the unrolled graph with counter-keyed noise, so a panel
is a pure function of (fitted state, policy, seed) and two runs with
the same seed agree draw for draw wherever their histories agree.
``build_cate_benchmark`` packages an observational cross-section
together with coupled intervened arms into estimation ground truth.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from . import __version__
from .config import SimulatorConfig, VariableConfig
from .errors import ConfigError, DataError
from .estimators import EstimationTable
from .graph import ScmGraph, topological_order
from .ingest import BaseDataset, VariableSchema
from .learners import LogisticModel, RidgeModel
from .noise import NoiseStream
from .samplers import (
    STUDIES_CLASSES,
    CategoricalSampler,
    ContinuousSampler,
    IncomeInitialSampler,
    QuantileInitialSampler,
    StudiesInitialSampler,
    ZeroInflatedSampler,
    build_studies_initial,
    fit_categorical_sampler,
    fit_continuous_sampler,
    fit_income_initial,
    fit_quantile_sampler,
    fit_zero_inflated_sampler,
)
from .transitions import (
    AgeTransition,
    CapitalTransition,
    ConstantTransition,
    EducationTransition,
    HoursTransition,
    IncomeTransition,
    MaritalTransition,
    StayOrRedrawTransition,
    StudiesTransition,
)
from .trees import TreeEnsembleModel

__all__ = [
    "Policy", "FittedSCM", "Panel", "CateBenchmark",
    "fit_scm", "simulate_panel", "extract_cross_section",
    "build_cate_benchmark",
]


# --------------------------------------------------------------------
# Policies
# --------------------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    """What happens at the treatment variable during simulation.

    The observational policy follows every fitted mechanism.  An atomic
    policy overwrites one variable with a fixed value at one time step;
    the mechanism still runs first and consumes its noise draws, which
    keeps all later draws aligned between intervened and natural runs.
    """

    kind: str
    variable: str | None = None
    time: int | None = None
    value: object | None = None

    def __post_init__(self):
        if self.kind not in ("observational", "atomic"):
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if self.kind == "atomic":
            if self.variable is None or self.time is None or self.value is None:
                raise ConfigError(
                    "an atomic policy needs a variable, a time and a value"
                )
            if self.time < 1:
                raise ConfigError("atomic policy time must be at least 1")
        elif (self.variable, self.time, self.value) != (None, None, None):
            raise ConfigError("the observational policy takes no fields")

    @classmethod
    def observational(cls) -> "Policy":
        return cls("observational")

    @classmethod
    def atomic(cls, variable: str, time: int, value) -> "Policy":
        return cls("atomic", str(variable), int(time), value)

    def label(self) -> str:
        if self.kind == "observational":
            return "observational"
        return f"do({self.variable}={self.value!r} at t={self.time})"

    def descriptor(self) -> dict:
        if self.kind == "observational":
            return {"kind": "observational"}
        return {"kind": "atomic", "variable": self.variable,
                "time": self.time, "value": self.value}


# --------------------------------------------------------------------
# Fitting
# --------------------------------------------------------------------

@dataclass
class FittedSCM:
    """Fitted initial samplers and transition rules, plus bookkeeping."""

    config: SimulatorConfig
    graph: ScmGraph
    schema: tuple[VariableSchema, ...]
    initial: dict[str, object]
    transitions: dict[str, object]
    initial_order: tuple[str, ...]
    transition_order: tuple[str, ...]
    diagnostics: pd.DataFrame
    digest: str

    def variable(self, name: str) -> VariableSchema:
        for s in self.schema:
            if s.name == name:
                return s
        raise ConfigError(f"unknown simulation variable {name!r}")


def _simulation_schema(
    config: SimulatorConfig, base: BaseDataset
) -> tuple[VariableSchema, ...]:
    """Schemas of the simulated state, in declaration order.

    Variables with fitted samplers keep their base-cohort schema.  The
    enrollment variable is synthesized with the fixed study classes and
    the calibrated income variable becomes continuous, whatever the
    base cohort recorded for a column of the same name.
    """
    base_names = {s.name for s in base.schema}
    out = []
    for vc in config.variables:
        kind = vc.sampler["type"]
        if kind == "StudiesSampler":
            out.append(VariableSchema(vc.name, "categorical", STUDIES_CLASSES))
        elif kind == "IncomeSampler":
            out.append(VariableSchema(vc.name, "continuous"))
        elif vc.name not in base_names:
            raise ConfigError(
                f"config variable {vc.name!r} is not a column of the base "
                "dataset and has no synthesizing sampler"
            )
        else:
            out.append(base.variable(vc.name))
    return tuple(out)


def _reject_extras(spec: dict, name: str, what: str) -> None:
    if spec:
        raise ConfigError(
            f"{what} config for {name!r} has unknown keys {sorted(spec)}"
        )


def _fit_initial_samplers(
    config: SimulatorConfig,
    base: BaseDataset,
    schema_map: Mapping[str, VariableSchema],
) -> dict[str, object]:
    base_names = {s.name for s in base.schema}
    samplers: dict[str, object] = {}
    for vc in config.variables:
        spec = dict(vc.sampler)
        kind = spec.pop("type")
        if kind == "LogisticSampler":
            multi = spec.pop("multi_class", "multinomial")
            if multi != "multinomial":
                raise ConfigError(
                    f"{vc.name!r} logistic sampler supports only "
                    f"multi_class: multinomial, got {multi!r}"
                )
            learner = {
                "type": "multinomial_logistic",
                "C": spec.pop("C", 1.0),
                "max_iter": spec.pop("max_iter", 500),
            }
            _reject_extras(spec, vc.name, "sampler")
            sampler = fit_categorical_sampler(base, vc.name, vc.parents, learner)
        elif kind == "RegressionSampler":
            learner = spec.pop("learner", None)
            noise_coef = float(spec.pop("noise_coef", 1.0))
            _reject_extras(spec, vc.name, "sampler")
            sampler = fit_continuous_sampler(
                base, vc.name, vc.parents, learner, noise_coef=noise_coef
            )
        elif kind == "QuantileSampler":
            _reject_extras(spec, vc.name, "sampler")
            sampler = fit_quantile_sampler(base, vc.name, vc.parents)
        elif kind == "ZeroInflatedSampler":
            gate = spec.pop("gate", None)
            magnitude = spec.pop("magnitude", None)
            noise_coef = float(spec.pop("noise_coef", 1.0))
            _reject_extras(spec, vc.name, "sampler")
            sampler = fit_zero_inflated_sampler(
                base, vc.name, vc.parents, gate, magnitude, noise_coef
            )
        elif kind == "StudiesSampler":
            required = {"age", "sex", "education", "relationship"}
            if set(vc.parents) != required:
                raise ConfigError(
                    f"the enrollment sampler for {vc.name!r} reads exactly "
                    f"{sorted(required)}; the config declares "
                    f"{sorted(vc.parents)}"
                )
            allowed = {"intercepts", "age_coef", "education_coef",
                       "sex_coef", "relationship_coef"}
            _reject_extras(
                {k: v for k, v in spec.items() if k not in allowed},
                vc.name, "sampler",
            )
            sampler = build_studies_initial(
                spec, schema_map[vc.name], schema_map["education"],
                parents=vc.parents,
            )
        elif kind == "IncomeSampler":
            for needed in ("studies", "workclass"):
                if needed not in vc.parents:
                    raise ConfigError(
                        f"the calibrated income sampler for {vc.name!r} "
                        f"needs {needed!r} among its parents"
                    )
            regressor_parents = tuple(
                p for p in vc.parents if p in base_names
            )
            sampler = fit_income_initial(
                base,
                parents=vc.parents,
                regressor_parents=regressor_parents,
                target_mean=float(spec.pop("target_mean", 70_000.0)),
                target_high_rate=float(spec.pop("target_high_rate", 0.423)),
                high_threshold=float(spec.pop("high_threshold", 50_000.0)),
                noise_scale=float(spec.pop("noise_scale", 5_000.0)),
                learner=spec.pop("learner", None),
                name=vc.name,
            )
            _reject_extras(spec, vc.name, "sampler")
        else:
            raise ConfigError(f"unknown sampler type {kind!r} for {vc.name!r}")
        samplers[vc.name] = sampler
    return samplers


_TRANSITION_KEYS = {
    "AgeTransition": ((), ()),
    "ConstantTransition": ((), ()),
    "EducationTransition": (("advance_prob",), ()),
    "StayOrRedrawTransition": (
        ("p_stay",), ("forced_redraw_value", "study_stay_factor"),
    ),
    "MaritalTransition": (
        ("classes", "matrix"),
        ("marriage_study_factor", "marriage_age_slope"),
    ),
    "HoursTransition": ((), ("alpha",)),
    "CapitalTransition": (
        (), ("p_nonzero_given_prev", "p_perturb", "perturb_scale"),
    ),
    "StudiesTransition": (
        (), ("continue_bonus", "high_income_penalty", "income_threshold",
             "terminal_ranks"),
    ),
    "IncomeTransition": (
        (), ("raise_max", "part_time_bonus", "completion_bonus",
             "resample_floor"),
    ),
}


def _transition_params(config: SimulatorConfig, name: str, kind: str) -> dict:
    required, optional = _TRANSITION_KEYS[kind]
    params = dict(config.transitions.get(name, {}))
    unknown = set(params) - set(required) - set(optional)
    if unknown:
        raise ConfigError(
            f"transition config for {name!r} has unknown keys "
            f"{sorted(unknown)}"
        )
    missing = set(required) - set(params)
    if missing:
        raise ConfigError(
            f"transition config for {name!r} is missing {sorted(missing)}"
        )
    return params


def _build_transition(
    vc: VariableConfig,
    config: SimulatorConfig,
    samplers: Mapping[str, object],
    schema_map: Mapping[str, VariableSchema],
):
    kind = vc.seq_sampler["type"]
    params = _transition_params(config, vc.name, kind)
    initial = samplers[vc.name]
    if kind == "AgeTransition":
        return AgeTransition(variable=vc.name)
    if kind == "ConstantTransition":
        return ConstantTransition(variable=vc.name)
    if kind == "EducationTransition":
        advance = {str(k): float(v) for k, v in params["advance_prob"].items()}
        unknown = set(advance) - set(STUDIES_CLASSES)
        if unknown:
            raise ConfigError(
                f"education advance_prob names unknown study class "
                f"{sorted(unknown)[0]!r}"
            )
        return EducationTransition(
            levels=schema_map[vc.name].categories,
            advance_prob=advance,
            variable=vc.name,
        )
    if kind == "StayOrRedrawTransition":
        extra = tuple(p for p in vc.seq_parents_prev if p != vc.name)
        factor = params.get("study_stay_factor")
        if (factor is not None) != ("studies" in extra):
            raise ConfigError(
                f"transition for {vc.name!r} must declare 'studies' as a "
                "previous-time parent exactly when study_stay_factor is set"
            )
        forced = params.get("forced_redraw_value")
        if forced is not None and forced not in schema_map[vc.name].categories:
            raise ConfigError(
                f"forced_redraw_value {forced!r} is not a category of "
                f"{vc.name!r}"
            )
        return StayOrRedrawTransition(
            variable=vc.name,
            initial=initial,
            p_stay=float(params["p_stay"]),
            forced_redraw_value=forced,
            study_stay_factor=None if factor is None else float(factor),
            extra_parents_prev=extra,
        )
    if kind == "MaritalTransition":
        classes = tuple(str(c) for c in params["classes"])
        categories = schema_map[vc.name].categories
        if set(classes) != set(categories):
            raise ConfigError(
                f"marital transition classes {sorted(classes)} do not match "
                f"the categories of {vc.name!r}"
            )
        matrix = np.asarray(params["matrix"], dtype=float)
        if matrix.shape != (len(classes), len(classes)):
            raise ConfigError(
                f"marital transition matrix must be "
                f"{len(classes)}x{len(classes)}, got {matrix.shape}"
            )
        return MaritalTransition(
            classes=classes,
            matrix=matrix,
            marriage_study_factor=float(params.get("marriage_study_factor", 0.5)),
            marriage_age_slope=float(params.get("marriage_age_slope", -0.25)),
            variable=vc.name,
        )
    if kind == "HoursTransition":
        return HoursTransition(
            initial=initial,
            alpha=float(params.get("alpha", 0.9)),
            variable=vc.name,
        )
    if kind == "CapitalTransition":
        return CapitalTransition(
            initial=initial,
            p_nonzero_given_prev=float(params.get("p_nonzero_given_prev", 0.8)),
            p_perturb=float(params.get("p_perturb", 0.8)),
            perturb_scale=float(params.get("perturb_scale", 0.2)),
            variable=vc.name,
        )
    if kind == "StudiesTransition":
        return StudiesTransition(
            initial=initial,
            education_levels=schema_map["education"].categories,
            continue_bonus=float(params.get("continue_bonus", 4.0)),
            high_income_penalty=float(params.get("high_income_penalty", -2.0)),
            income_threshold=float(params.get("income_threshold", 50_000.0)),
            terminal_ranks=tuple(
                int(r) for r in params.get("terminal_ranks", (9, 13, 14, 15, 16))
            ),
            variable=vc.name,
        )
    if kind == "IncomeTransition":
        return IncomeTransition(
            initial=initial,
            raise_max=float(params.get("raise_max", 0.06)),
            part_time_bonus=float(params.get("part_time_bonus", 0.04)),
            completion_bonus=float(params.get("completion_bonus", 0.10)),
            resample_floor=float(params.get("resample_floor", 5_000.0)),
            variable=vc.name,
        )
    raise ConfigError(f"unknown transition type {kind!r} for {vc.name!r}")


def _check_declared_parents(vc: VariableConfig, sampler, rule) -> None:
    """The fitted mechanisms must read exactly the declared parents."""
    if set(sampler.parents) != set(vc.parents):
        raise ConfigError(
            f"initial sampler for {vc.name!r} reads {sorted(sampler.parents)} "
            f"but the config declares {sorted(vc.parents)}"
        )
    if set(rule.parents_curr) != set(vc.seq_parents_curr):
        raise ConfigError(
            f"transition for {vc.name!r} reads current-time "
            f"{sorted(rule.parents_curr)} but the config declares "
            f"{sorted(vc.seq_parents_curr)}"
        )
    if set(rule.parents_prev) != set(vc.seq_parents_prev):
        raise ConfigError(
            f"transition for {vc.name!r} reads previous-time "
            f"{sorted(rule.parents_prev)} but the config declares "
            f"{sorted(vc.seq_parents_prev)}"
        )


def _digest_array(h, arr) -> None:
    a = np.ascontiguousarray(arr)
    h.update(str(a.dtype).encode())
    h.update(str(a.shape).encode())
    h.update(a.tobytes())


def _digest_text(h, text: str) -> None:
    h.update(text.encode())
    h.update(b"\x00")


def _digest_model(h, model) -> None:
    if isinstance(model, RidgeModel):
        _digest_text(h, "ridge")
        _digest_array(h, model.coef)
        _digest_array(h, np.array([model.intercept, model.alpha]))
    elif isinstance(model, LogisticModel):
        _digest_text(h, "logistic")
        _digest_array(h, model.coef)
        _digest_array(h, model.intercept)
    elif isinstance(model, TreeEnsembleModel):
        _digest_text(h, f"trees:{model.kind}:{model.task}")
        for arr in (model.feature, model.split_code, model.split_kind,
                    model.left, model.right, model.value, model.roots):
            _digest_array(h, arr)
        _digest_array(h, np.array([model.scale, model.base_score]))
        for var in model.binner.variables:
            _digest_text(h, var.name)
            if var.kind == "continuous":
                _digest_array(h, model.binner.edges(var.name))
    else:
        raise TypeError(f"cannot digest model of type {type(model).__name__}")


def _digest_sampler(h, sampler) -> None:
    if isinstance(sampler, CategoricalSampler):
        _digest_text(h, "categorical:" + "|".join(sampler.classes))
        _digest_model(h, sampler.model)
    elif isinstance(sampler, ZeroInflatedSampler):
        _digest_text(h, "zero-inflated")
        _digest_model(h, sampler.gate)
        _digest_sampler(h, sampler.magnitude)
    elif isinstance(sampler, ContinuousSampler):
        _digest_text(h, "continuous")
        _digest_model(h, sampler.model)
        _digest_array(h, np.array([sampler.noise_scale]))
    elif isinstance(sampler, QuantileInitialSampler):
        _digest_text(h, "quantile")
        _digest_array(h, sampler.values)
    elif isinstance(sampler, StudiesInitialSampler):
        _digest_text(h, "studies:" + "|".join(sampler.classes))
        _digest_array(h, sampler.intercepts)
        _digest_array(h, sampler.age_coef)
        _digest_array(h, sampler.education_coef)
        _digest_text(h, json.dumps(
            [sorted(d.items()) for d in sampler.sex_coef]))
        _digest_text(h, json.dumps(
            [sorted(d.items()) for d in sampler.relationship_coef]))
        _digest_text(h, json.dumps(sorted(sampler.education_rank.items())))
    elif isinstance(sampler, IncomeInitialSampler):
        _digest_text(h, "income")
        _digest_model(h, sampler.regressor)
        _digest_array(h, np.array(
            [sampler.shift, sampler.scale, sampler.noise_scale]))
    else:
        raise TypeError(
            f"cannot digest sampler of type {type(sampler).__name__}"
        )


def _state_digest(config: SimulatorConfig, samplers: Mapping[str, object]) -> str:
    h = hashlib.sha256()
    _digest_text(h, config.digest)
    for vc in config.variables:
        _digest_text(h, vc.name)
        _digest_sampler(h, samplers[vc.name])
    return h.hexdigest()


def _collect_diagnostics(
    config: SimulatorConfig, samplers: Mapping[str, object]
) -> pd.DataFrame:
    rows = []
    for vc in config.variables:
        diag = getattr(samplers[vc.name], "diagnostics", {})
        for metric, value in diag.items():
            if isinstance(value, (bool, int, float, np.integer, np.floating)):
                rows.append(
                    {"variable": vc.name, "metric": metric,
                     "value": float(value)}
                )
    return pd.DataFrame(rows, columns=["variable", "metric", "value"])


def fit_scm(config: SimulatorConfig, base: BaseDataset) -> FittedSCM:
    """Fit every declared mechanism against the base cohort."""
    graph = config.graph()
    schema = _simulation_schema(config, base)
    schema_map = {s.name: s for s in schema}
    samplers = _fit_initial_samplers(config, base, schema_map)
    rules = {
        vc.name: _build_transition(vc, config, samplers, schema_map)
        for vc in config.variables
    }
    for vc in config.variables:
        _check_declared_parents(vc, samplers[vc.name], rules[vc.name])
    return FittedSCM(
        config=config,
        graph=graph,
        schema=schema,
        initial=samplers,
        transitions=rules,
        initial_order=tuple(topological_order(graph, "initial")),
        transition_order=tuple(topological_order(graph, "transition")),
        diagnostics=_collect_diagnostics(config, samplers),
        digest=_state_digest(config, samplers),
    )


# --------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------

@dataclass
class Panel:
    """Simulated trajectories for one policy and seed.

    ``values`` maps variable name to an (n, horizon) array: int16
    category codes for categorical variables, floats otherwise.
    """

    schema: tuple[VariableSchema, ...]
    values: dict[str, NDArray]
    horizon: int
    seed: int
    policy: Policy
    scm_digest: str
    config_digest: str

    @property
    def n(self) -> int:
        return len(next(iter(self.values.values())))

    def variable(self, name: str) -> VariableSchema:
        for s in self.schema:
            if s.name == name:
                return s
        raise ConfigError(f"unknown panel variable {name!r}")

    def column(self, name: str, t: int) -> NDArray:
        """Raw stored values of one variable at one time (1-based)."""
        if not 1 <= t <= self.horizon:
            raise ConfigError(f"time {t} outside [1, {self.horizon}]")
        return self.values[self.variable(name).name][:, t - 1]

    def labels(self, name: str, t: int) -> NDArray:
        """Decoded values: category labels or floats."""
        s = self.variable(name)
        col = self.column(name, t)
        if s.kind == "categorical":
            return np.asarray(s.categories, dtype=object)[col]
        return np.asarray(col, dtype=float)

    def frame(self, t: int) -> pd.DataFrame:
        return pd.DataFrame({s.name: self.labels(s.name, t)
                             for s in self.schema})

    def manifest(self) -> dict:
        return {
            "n": self.n,
            "horizon": self.horizon,
            "seed": self.seed,
            "policy": self.policy.descriptor(),
            "scm_digest": self.scm_digest,
            "config_digest": self.config_digest,
            "version": __version__,
        }

    def to_csv(self, path) -> None:
        """Wide CSV (one ``name_t`` column per variable and step) plus a
        JSON sidecar holding seed, policy and digests."""
        path = Path(path)
        data: dict[str, NDArray] = {
            "subject": np.arange(self.n, dtype=np.int64)
        }
        for s in self.schema:
            for t in range(1, self.horizon + 1):
                data[f"{s.name}_{t}"] = self.labels(s.name, t)
        pd.DataFrame(data).to_csv(path, index=False)
        sidecar = path.with_name(path.name + ".meta.json")
        sidecar.write_text(
            json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"
        )


def _chunk_bounds(n: int, n_chunks: int) -> list[tuple[int, int]]:
    k = max(1, min(int(n_chunks), n))
    return [((i * n) // k, ((i + 1) * n) // k) for i in range(k)]


def _frame_of(columns: dict, n_rows: int) -> pd.DataFrame:
    # An explicit index keeps zero-column frames at full length, which
    # matters for the first sampled variable when it has no parents.
    return pd.DataFrame(columns, index=pd.RangeIndex(n_rows))


def _simulate_chunk(
    scm: FittedSCM,
    policy: Policy,
    seed: int,
    horizon: int,
    bounds: tuple[int, int],
    out: Mapping[str, NDArray],
) -> None:
    lo, hi = bounds
    n_rows = hi - lo
    subjects = np.arange(lo, hi, dtype=np.int64)
    stream = NoiseStream(seed)
    schema_map = {s.name: s for s in scm.schema}
    classes = {
        s.name: np.asarray(s.categories, dtype=object)
        for s in scm.schema if s.kind == "categorical"
    }
    curr: dict[str, NDArray] = {}
    for t in range(1, horizon + 1):
        prev_df = _frame_of(curr, n_rows) if t > 1 else None
        curr = {}
        order = scm.initial_order if t == 1 else scm.transition_order
        for name in order:
            s = schema_map[name]
            if t == 1:
                raw = scm.initial[name].sample(
                    _frame_of(curr, n_rows), stream, t, subjects
                )
                if s.kind == "categorical":
                    codes = np.asarray(raw, dtype=np.int64)
                    labels = classes[name][codes]
                else:
                    values = np.asarray(raw, dtype=float)
            else:
                raw = scm.transitions[name].apply(
                    prev_df, _frame_of(curr, n_rows), stream, t, subjects
                )
                if s.kind == "categorical":
                    labels = np.asarray(raw, dtype=object)
                    codes = pd.Categorical(
                        labels, categories=list(s.categories)
                    ).codes.astype(np.int64)
                    if codes.min(initial=0) < 0:
                        raise RuntimeError(
                            f"transition for {name!r} produced a label "
                            "outside its declared categories"
                        )
                else:
                    values = np.asarray(raw, dtype=float)
            if (policy.kind == "atomic" and policy.variable == name
                    and policy.time == t):
                if s.kind == "categorical":
                    code = s.categories.index(policy.value)
                    codes = np.full(n_rows, code, dtype=np.int64)
                    labels = np.full(n_rows, s.categories[code], dtype=object)
                else:
                    values = np.full(n_rows, float(policy.value))
            if s.kind == "categorical":
                curr[name] = labels
                out[name][lo:hi, t - 1] = codes.astype(np.int16)
            else:
                curr[name] = values
                out[name][lo:hi, t - 1] = values


def simulate_panel(
    scm: FittedSCM,
    n: int,
    horizon: int,
    policy: Policy | None = None,
    seed: int = 0,
    n_threads: int = 1,
) -> Panel:
    """Ancestral sampling of ``n`` subjects over ``horizon`` steps.

    Subjects are keyed by their global index, so chunking and thread
    count cannot change a single draw.
    """
    policy = Policy.observational() if policy is None else policy
    if n < 1:
        raise ConfigError("need at least one subject")
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    if n_threads < 1:
        raise ConfigError("n_threads must be at least 1")
    if policy.kind == "atomic":
        s = scm.variable(policy.variable)
        if not 1 <= policy.time <= horizon:
            raise ConfigError(
                f"atomic policy time {policy.time} outside [1, {horizon}]"
            )
        if s.kind == "categorical":
            if policy.value not in s.categories:
                raise ConfigError(
                    f"{policy.value!r} is not a category of "
                    f"{policy.variable!r}"
                )
        else:
            try:
                float(policy.value)
            except (TypeError, ValueError):
                raise ConfigError(
                    f"atomic value {policy.value!r} is not numeric while "
                    f"{policy.variable!r} is continuous"
                ) from None
    values = {
        s.name: np.empty(
            (n, horizon),
            dtype=np.int16 if s.kind == "categorical" else np.float64,
        )
        for s in scm.schema
    }
    bounds = _chunk_bounds(n, n_threads)
    if len(bounds) == 1:
        _simulate_chunk(scm, policy, seed, horizon, bounds[0], values)
    else:
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            futures = [
                pool.submit(_simulate_chunk, scm, policy, seed, horizon,
                            b, values)
                for b in bounds
            ]
            for future in futures:
                future.result()
    return Panel(
        schema=scm.schema,
        values=values,
        horizon=horizon,
        seed=int(seed),
        policy=policy,
        scm_digest=scm.digest,
        config_digest=scm.config.digest,
    )


# --------------------------------------------------------------------
# Cross-sections and ground truth
# --------------------------------------------------------------------

def _covariate_block(
    panel: Panel, t0: int, treatment: str, outcome: str
) -> tuple[pd.DataFrame, tuple[str, ...], tuple[VariableSchema, ...]]:
    """Pre-treatment covariates at the treatment time.

    All state at ``t0`` except the treatment and the outcome, the
    derived ordinal education rank, and the previous-step treatment and
    outcome history.
    """
    columns: dict[str, NDArray] = {}
    schemas: list[VariableSchema] = []
    for s in panel.schema:
        if s.name in (treatment, outcome):
            continue
        columns[s.name] = panel.labels(s.name, t0)
        schemas.append(s)
        if s.name == "education" and s.kind == "categorical":
            codes = np.asarray(panel.column("education", t0), dtype=float)
            columns["education-num"] = codes + 1.0
            schemas.append(VariableSchema("education-num", "continuous"))
    t_schema = panel.variable(treatment)
    prev_treatment = f"{treatment}_prev"
    columns[prev_treatment] = panel.labels(treatment, t0 - 1)
    schemas.append(
        VariableSchema(prev_treatment, t_schema.kind, t_schema.categories)
    )
    prev_outcome = f"{outcome}_prev"
    columns[prev_outcome] = panel.labels(outcome, t0 - 1)
    schemas.append(VariableSchema(prev_outcome, "continuous"))
    frame = pd.DataFrame(columns)
    return frame, tuple(frame.columns), tuple(schemas)


def extract_cross_section(
    panel: Panel,
    t0: int,
    horizon: int | None = None,
    *,
    treatment: str,
    treated_value: str,
    control_value: str,
    outcome: str,
) -> EstimationTable:
    """One row per subject under either treatment arm at ``t0``.

    Covariates are the pre-treatment state at ``t0`` plus one step of
    treatment and outcome history; the outcome is read at ``horizon``.
    Subjects under any other treatment level are dropped, with the
    count recorded in the table metadata.
    """
    horizon = panel.horizon if horizon is None else int(horizon)
    if t0 < 2:
        raise ConfigError(
            "the cross-section keeps one step of history, so the "
            f"treatment time must be at least 2, got {t0}"
        )
    if not t0 < horizon <= panel.horizon:
        raise ConfigError(
            f"need treatment time {t0} < outcome time {horizon} <= "
            f"panel horizon {panel.horizon}"
        )
    t_schema = panel.variable(treatment)
    if t_schema.kind != "categorical":
        raise ConfigError(f"treatment {treatment!r} must be categorical")
    for value in (treated_value, control_value):
        if value not in t_schema.categories:
            raise ConfigError(
                f"{value!r} is not a category of {treatment!r}"
            )
    if treated_value == control_value:
        raise ConfigError("treated and control values must differ")
    if panel.variable(outcome).kind != "continuous":
        raise ConfigError(f"outcome {outcome!r} must be continuous")

    frame, covariates, schemas = _covariate_block(
        panel, t0, treatment, outcome
    )
    arm = panel.labels(treatment, t0)
    keep = (arm == treated_value) | (arm == control_value)
    n_dropped = int(len(arm) - keep.sum())
    if not keep.any():
        raise DataError(
            f"no subjects under either arm of {treatment!r} at t={t0}"
        )
    frame = frame.loc[keep].reset_index(drop=True)
    frame.insert(0, "subject", np.flatnonzero(keep).astype(np.int64))
    frame.insert(1, "a", (arm[keep] == treated_value).astype(np.int64))
    frame.insert(
        2, "y", np.asarray(panel.column(outcome, horizon), dtype=float)[keep]
    )
    meta = {
        "t0": t0,
        "horizon": horizon,
        "treatment": treatment,
        "treated_value": treated_value,
        "control_value": control_value,
        "outcome": outcome,
        "n_dropped": n_dropped,
        "seed": panel.seed,
        "policy": panel.policy.descriptor(),
    }
    return EstimationTable(
        frame=frame, covariates=covariates, schemas=schemas, meta=meta
    )


@dataclass
class CateBenchmark:
    """Observational table plus coupled-arm ground truth.

    ``effects`` is the per-subject treated-minus-control outcome
    contrast on the evaluation cohort, whose covariate rows are in
    ``evaluation`` (aligned by position).
    """

    observational: EstimationTable
    evaluation: pd.DataFrame
    effects: NDArray[np.float64]
    ate: float
    treated: Panel
    control: Panel

    @property
    def covariates(self) -> tuple[str, ...]:
        return self.observational.covariates


def _check_arm_coupling(treated: Panel, control: Panel, t0: int) -> None:
    """Coupled arms share every draw strictly before the intervention."""
    for s in treated.schema:
        a = treated.values[s.name][:, : t0 - 1]
        b = control.values[s.name][:, : t0 - 1]
        if not np.array_equal(a, b):
            raise RuntimeError(
                f"coupled arms disagree on {s.name!r} before t={t0}; "
                "noise keying is broken"
            )


def build_cate_benchmark(
    scm: FittedSCM,
    n_observational: int | None = None,
    n_counterfactual: int | None = None,
    horizon: int | None = None,
    n_threads: int = 1,
) -> CateBenchmark:
    """Simulate the observational cohort and both intervened arms."""
    b = scm.config.benchmark
    n_obs = b.n_observational if n_observational is None else int(n_observational)
    n_cf = b.n_counterfactual if n_counterfactual is None else int(n_counterfactual)
    t_end = b.horizon if horizon is None else int(horizon)

    observational_panel = simulate_panel(
        scm, n_obs, t_end, Policy.observational(),
        seed=b.seed_observational, n_threads=n_threads,
    )
    observational = extract_cross_section(
        observational_panel, b.t0, t_end,
        treatment=b.treatment, treated_value=b.treated_value,
        control_value=b.control_value, outcome=b.outcome,
    )

    def arm(value: str) -> Panel:
        return simulate_panel(
            scm, n_cf, t_end, Policy.atomic(b.treatment, b.t0, value),
            seed=b.seed_counterfactual, n_threads=n_threads,
        )

    treated = arm(b.treated_value)
    control = arm(b.control_value)
    _check_arm_coupling(treated, control, b.t0)

    evaluation, _, _ = _covariate_block(treated, b.t0, b.treatment, b.outcome)
    evaluation_control, _, _ = _covariate_block(
        control, b.t0, b.treatment, b.outcome
    )
    if not evaluation.equals(evaluation_control):
        raise RuntimeError(
            "coupled arms disagree on pre-treatment covariates at the "
            "intervention time"
        )
    effects = (
        np.asarray(treated.values[b.outcome][:, t_end - 1], dtype=float)
        - np.asarray(control.values[b.outcome][:, t_end - 1], dtype=float)
    )
    return CateBenchmark(
        observational=observational,
        evaluation=evaluation,
        effects=effects,
        ate=float(effects.mean()),
        treated=treated,
        control=control,
    )
