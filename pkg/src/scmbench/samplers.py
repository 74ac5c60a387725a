"""Initial-state structural equations.

Each sampler owns a fitted conditional model plus the rule for turning
keyed noise into a value: categorical variables sample by the Gumbel-max
trick over predicted logits, continuous variables add Gaussian noise
scaled to the training RMSE, and zero-inflated variables gate a
magnitude model behind a nonzero classifier.  Two variables (study
enrollment and income) use hand-designed mechanisms configured rather
than fitted; see the config file for their parameter tables.

All sampling is vectorized over subjects and driven by a NoiseStream,
so a draw for (subject, variable, time) never depends on the policy arm
or on how subjects are batched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .encoding import FeatureEncoder
from .errors import ConfigError, DataError, NumericError
from .ingest import BaseDataset, VariableSchema
from .learners import (
    LogisticModel, auc_score, fit_multinomial_logistic, fit_ridge,
    macro_ovr_auc, r2_score,
)
from .noise import NoiseStream
from .trees import TreeEnsembleModel, fit_bagged_trees

__all__ = [
    "STUDIES_CLASSES", "STUDIES_NO", "STUDIES_EVENING", "STUDIES_DAY",
    "STUDIES_FULL", "WORKCLASS_UNPAID",
    "gumbel_max_sample",
    "CategoricalSampler", "ContinuousSampler", "QuantileInitialSampler",
    "ZeroInflatedSampler", "StudiesInitialSampler", "IncomeInitialSampler",
    "fit_categorical_sampler", "fit_continuous_sampler",
    "fit_quantile_sampler", "fit_zero_inflated_sampler",
    "build_studies_initial", "fit_income_initial",
]

STUDIES_NO = "No studies"
STUDIES_EVENING = "Evening course"
STUDIES_DAY = "Day course"
STUDIES_FULL = "Full-time studies"
STUDIES_CLASSES = (STUDIES_NO, STUDIES_EVENING, STUDIES_DAY, STUDIES_FULL)

WORKCLASS_UNPAID = "Without-pay"

# Slot map shared by fitted samplers: slots below noise.RULE_SLOT belong
# to the sampler itself.
_SLOT_MAIN = 0       # Gaussian noise / zero-gate uniform
_SLOT_MAGNITUDE = 1  # zero-inflated magnitude noise


def gumbel_max_sample(logits: NDArray[np.float64],
                      noise: NDArray[np.float64]) -> int:
    """One categorical draw: argmax of logits plus Gumbel(0, 1) noise."""
    logits = np.asarray(logits, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if logits.ndim != 1 or logits.shape != noise.shape:
        raise ValueError("logits and noise must be 1-d arrays of equal length")
    if logits.size < 2:
        raise ValueError("need at least two classes")
    if not np.all(np.isfinite(logits)):
        raise DataError("non-finite logits passed to gumbel_max_sample")
    return int(np.argmax(logits + noise))


def _schemas_for(dataset: BaseDataset, names: Sequence[str]) -> tuple[VariableSchema, ...]:
    return tuple(dataset.variable(name) for name in names)


def _learner_spec(spec: Mapping | None, default_type: str) -> dict:
    out = dict(spec) if spec is not None else {}
    out.setdefault("type", default_type)
    return out


def _fit_regressor(
    frame: pd.DataFrame,
    y: NDArray[np.float64],
    schemas: tuple[VariableSchema, ...],
    spec: Mapping,
) -> tuple[object, FeatureEncoder | None, NDArray[np.float64]]:
    """Fit the regression family named by ``spec['type']``; returns
    (model, encoder or None for tree models, training predictions)."""
    kind = spec["type"]
    if kind == "ridge":
        encoder = FeatureEncoder(schemas)
        X = encoder.fit_transform(frame)
        model = fit_ridge(X, y, alpha=float(spec.get("alpha", 1.0)))
        return model, encoder, model.predict(X)
    if kind == "bagged_trees":
        model = fit_bagged_trees(
            frame, y, schemas,
            n_trees=int(spec.get("n_trees", 50)),
            max_depth=int(spec.get("max_depth", 24)),
            min_samples_leaf=int(spec.get("min_samples_leaf", 20)),
            seed=int(spec.get("seed", 0)),
        )
        return model, None, model.predict(frame)
    raise ConfigError(f"unknown regression learner type {kind!r}")


# --------------------------------------------------------------------
# Fitted samplers
# --------------------------------------------------------------------

@dataclass
class CategoricalSampler:
    """Gumbel-max sampler over logits from a fitted classifier."""

    name: str
    parents: tuple[str, ...]
    classes: tuple[str, ...]
    encoder: FeatureEncoder
    model: LogisticModel
    diagnostics: dict = field(default_factory=dict)

    def logits(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        return self.model.decision_function(self.encoder.transform(frame))

    def sample(self, frame: pd.DataFrame, stream: NoiseStream, t: int,
               subjects: NDArray[np.int64]) -> NDArray[np.int64]:
        logits = self.logits(frame)
        gumbel = stream.gumbel(self.name, t, subjects, len(self.classes))
        return np.argmax(logits + gumbel, axis=1)


@dataclass
class ContinuousSampler:
    """Additive Gaussian noise around a fitted conditional mean."""

    name: str
    parents: tuple[str, ...]
    model: object
    encoder: FeatureEncoder | None
    noise_scale: float
    diagnostics: dict = field(default_factory=dict)

    def mean(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        if self.encoder is not None:
            return self.model.predict(self.encoder.transform(frame))
        return self.model.predict(frame)

    def sample(self, frame: pd.DataFrame, stream: NoiseStream, t: int,
               subjects: NDArray[np.int64]) -> NDArray[np.float64]:
        eps = stream.normal(self.name, t, _SLOT_MAIN, subjects)
        return self.mean(frame) + self.noise_scale * eps


@dataclass
class ZeroInflatedSampler:
    """A nonzero-gate classifier in front of a magnitude sampler."""

    name: str
    parents: tuple[str, ...]
    gate_encoder: FeatureEncoder
    gate: LogisticModel
    magnitude: ContinuousSampler
    diagnostics: dict = field(default_factory=dict)

    def p_nonzero(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        return self.gate.predict_proba(self.gate_encoder.transform(frame))[:, 1]

    def sample(self, frame: pd.DataFrame, stream: NoiseStream, t: int,
               subjects: NDArray[np.int64]) -> NDArray[np.float64]:
        p = self.p_nonzero(frame)
        u = stream.uniform(self.name, t, _SLOT_MAIN, subjects)
        eps = stream.normal(self.name, t, _SLOT_MAGNITUDE, subjects)
        magnitude = self.magnitude.mean(frame) + self.magnitude.noise_scale * eps
        return np.where(u < p, magnitude, 0.0)


def fit_categorical_sampler(
    dataset: BaseDataset,
    child: str,
    parents: Sequence[str],
    learner: Mapping | None = None,
) -> CategoricalSampler:
    spec = _learner_spec(learner, "multinomial_logistic")
    if spec["type"] != "multinomial_logistic":
        raise ConfigError(
            f"categorical sampler for {child!r} supports only "
            f"multinomial_logistic learners, got {spec['type']!r}"
        )
    schema = dataset.variable(child)
    if schema.kind != "categorical":
        raise DataError(f"{child!r} is not categorical")
    parent_schemas = _schemas_for(dataset, parents)
    encoder = FeatureEncoder(parent_schemas)
    X = encoder.fit_transform(dataset.frame)
    y = pd.Categorical(
        dataset.frame[child], categories=list(schema.categories)
    ).codes.astype(np.int64)
    alpha = 1.0 / float(spec.get("C", 1.0))
    model = fit_multinomial_logistic(
        X, y, n_classes=len(schema.categories), alpha=alpha,
        max_iter=int(spec.get("max_iter", 500)),
    )
    proba = model.predict_proba(X)
    auc = macro_ovr_auc(y, proba) if np.unique(y).size >= 2 else float("nan")
    return CategoricalSampler(
        name=child,
        parents=tuple(parents),
        classes=schema.categories,
        encoder=encoder,
        model=model,
        diagnostics={"train_auc": auc, "converged": model.converged,
                     "n_iter": model.n_iter},
    )


def fit_continuous_sampler(
    dataset: BaseDataset,
    child: str,
    parents: Sequence[str],
    learner: Mapping | None = None,
    noise_coef: float = 1.0,
    _frame: pd.DataFrame | None = None,
) -> ContinuousSampler:
    if noise_coef <= 0:
        raise ConfigError("noise_coef must be positive")
    schema = dataset.variable(child)
    if schema.kind != "continuous":
        raise DataError(f"{child!r} is not continuous")
    frame = dataset.frame if _frame is None else _frame
    spec = _learner_spec(learner, "ridge")
    y = np.asarray(frame[child], dtype=float)
    model, encoder, fitted = _fit_regressor(
        frame, y, _schemas_for(dataset, parents), spec
    )
    rmse = float(np.sqrt(np.mean((y - fitted) ** 2)))
    return ContinuousSampler(
        name=child,
        parents=tuple(parents),
        model=model,
        encoder=encoder,
        noise_scale=noise_coef * rmse,
        diagnostics={"train_r2": r2_score(y, fitted), "rmse": rmse},
    )


@dataclass
class QuantileInitialSampler:
    """Inverse empirical CDF over a keyed uniform draw.

    For parentless continuous variables whose marginal is skewed or
    bounded, where additive Gaussian noise around a constant mean would
    put mass outside the observed support."""

    name: str
    values: NDArray[np.float64]          # sorted training values
    parents: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def sample(self, frame: pd.DataFrame, stream: NoiseStream, t: int,
               subjects: NDArray[np.int64]) -> NDArray[np.float64]:
        u = stream.uniform(self.name, t, _SLOT_MAIN, subjects)
        grid = np.linspace(0.0, 1.0, len(self.values))
        return np.interp(u, grid, self.values)


def fit_quantile_sampler(
    dataset: BaseDataset,
    child: str,
    parents: Sequence[str] = (),
) -> QuantileInitialSampler:
    if tuple(parents):
        raise ConfigError(
            f"the quantile sampler for {child!r} models a marginal "
            "and takes no parents"
        )
    schema = dataset.variable(child)
    if schema.kind != "continuous":
        raise DataError(f"{child!r} is not continuous")
    values = np.sort(np.asarray(dataset.frame[child], dtype=float))
    if len(values) < 2:
        raise DataError(f"need at least 2 rows to fit {child!r}")
    return QuantileInitialSampler(
        name=child,
        values=values,
        diagnostics={
            "mean": float(values.mean()),
            "support_lo": float(values[0]),
            "support_hi": float(values[-1]),
        },
    )


def fit_zero_inflated_sampler(
    dataset: BaseDataset,
    child: str,
    parents: Sequence[str],
    gate_learner: Mapping | None = None,
    magnitude_learner: Mapping | None = None,
    noise_coef: float = 1.0,
) -> ZeroInflatedSampler:
    schema = dataset.variable(child)
    if schema.kind != "continuous":
        raise DataError(f"{child!r} is not continuous")
    y = np.asarray(dataset.frame[child], dtype=float)
    nonzero = y != 0.0
    if not nonzero.any():
        raise DataError(f"no nonzero rows for {child!r}")
    gate_spec = _learner_spec(gate_learner, "multinomial_logistic")
    parent_schemas = _schemas_for(dataset, parents)
    gate_encoder = FeatureEncoder(parent_schemas)
    X = gate_encoder.fit_transform(dataset.frame)
    gate = fit_multinomial_logistic(
        X, nonzero.astype(np.int64), n_classes=2,
        alpha=1.0 / float(gate_spec.get("C", 1.0)),
        max_iter=int(gate_spec.get("max_iter", 500)),
    )
    sub = dataset.frame.loc[nonzero].reset_index(drop=True)
    magnitude = fit_continuous_sampler(
        dataset, child, parents, magnitude_learner, noise_coef, _frame=sub,
    )
    return ZeroInflatedSampler(
        name=child,
        parents=tuple(parents),
        gate_encoder=gate_encoder,
        gate=gate,
        magnitude=magnitude,
        diagnostics={
            "gate_auc": auc_score(nonzero, gate.predict_proba(X)[:, 1]),
            "nonzero_r2": magnitude.diagnostics["train_r2"],
            "nonzero_rate": float(nonzero.mean()),
        },
    )


# --------------------------------------------------------------------
# Hand-designed initial mechanisms
# --------------------------------------------------------------------

@dataclass
class StudiesInitialSampler:
    """Gumbel-max over hand-set logits: per-class intercepts plus
    coefficients on standardized age and education rank, and per-class
    lookup terms for the subject's sex and relationship categories."""

    name: str
    parents: tuple[str, ...]
    classes: tuple[str, ...]
    intercepts: NDArray[np.float64]
    age_coef: NDArray[np.float64]
    education_coef: NDArray[np.float64]
    sex_coef: tuple[Mapping[str, float], ...]
    relationship_coef: tuple[Mapping[str, float], ...]
    education_rank: Mapping[str, int]
    diagnostics: dict = field(default_factory=dict)

    def logits(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        age = (np.asarray(frame["age"], dtype=float) - 40.0) / 10.0
        edu = np.array(
            [self.education_rank[v] for v in frame["education"]], dtype=float
        )
        edu = (edu - 10.0) / 3.0
        sex = frame["sex"]
        rel = frame["relationship"]
        out = np.empty((len(frame), len(self.classes)))
        for k in range(len(self.classes)):
            lookup = np.array(
                [self.sex_coef[k].get(s, 0.0) + self.relationship_coef[k].get(r, 0.0)
                 for s, r in zip(sex, rel)],
                dtype=float,
            )
            out[:, k] = (self.intercepts[k] + self.age_coef[k] * age
                         + self.education_coef[k] * edu + lookup)
        return out

    def sample(self, frame: pd.DataFrame, stream: NoiseStream, t: int,
               subjects: NDArray[np.int64]) -> NDArray[np.int64]:
        gumbel = stream.gumbel(self.name, t, subjects, len(self.classes))
        return np.argmax(self.logits(frame) + gumbel, axis=1)


def build_studies_initial(
    config: Mapping,
    studies_schema: VariableSchema,
    education_schema: VariableSchema,
    parents: Sequence[str] = ("age", "sex", "education", "relationship"),
) -> StudiesInitialSampler:
    classes = studies_schema.categories
    def per_class(key: str) -> NDArray[np.float64]:
        block = config.get(key)
        if block is None:
            raise ConfigError(f"studies initial config is missing {key!r}")
        try:
            return np.array([float(block[c]) for c in classes])
        except KeyError as exc:
            raise ConfigError(
                f"studies initial {key!r} is missing an entry for "
                f"class {exc.args[0]!r}"
            ) from None
    intercepts = per_class("intercepts")
    age_coef = per_class("age_coef")
    education_coef = per_class("education_coef")
    def per_class_lookup(key: str) -> tuple[dict, ...]:
        block = config.get(key, {})
        unknown = set(block) - set(classes)
        if unknown:
            raise ConfigError(
                f"studies initial {key!r} names unknown class "
                f"{sorted(unknown)[0]!r}"
            )
        return tuple(dict(block.get(c, {})) for c in classes)
    education_rank = {
        cat: idx + 1 for idx, cat in enumerate(education_schema.categories)
    }
    return StudiesInitialSampler(
        name=studies_schema.name,
        parents=tuple(parents),
        classes=classes,
        intercepts=intercepts,
        age_coef=age_coef,
        education_coef=education_coef,
        sex_coef=per_class_lookup("sex_coef"),
        relationship_coef=per_class_lookup("relationship_coef"),
        education_rank=education_rank,
    )


@dataclass
class IncomeInitialSampler:
    """Income as an affine map of a fitted P(income > 50K) regressor,
    calibrated on the training cohort.  Rule-based overrides for study
    enrollment and unpaid work are the last word, applied after the
    additive noise, so a full-time student's income is exactly zero."""

    name: str
    parents: tuple[str, ...]
    regressor: TreeEnsembleModel
    shift: float
    scale: float
    noise_scale: float
    diagnostics: dict = field(default_factory=dict)

    def base_income(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        return self.shift + self.scale * self.regressor.predict(frame)

    def apply_overrides(self, income: NDArray[np.float64],
                        studies: NDArray, workclass: NDArray) -> NDArray[np.float64]:
        out = np.asarray(income, dtype=float).copy()
        out[np.asarray(studies) == STUDIES_DAY] *= 0.8
        out[np.asarray(studies) == STUDIES_FULL] = 0.0
        out[np.asarray(workclass) == WORKCLASS_UNPAID] = 0.0
        return out

    def sample(self, frame: pd.DataFrame, stream: NoiseStream, t: int,
               subjects: NDArray[np.int64]) -> NDArray[np.float64]:
        eps = stream.normal(self.name, t, _SLOT_MAIN, subjects)
        noisy = np.maximum(self.base_income(frame) + self.noise_scale * eps, 0.0)
        return self.apply_overrides(noisy, frame["studies"], frame["workclass"])


def fit_income_initial(
    dataset: BaseDataset,
    parents: Sequence[str],
    regressor_parents: Sequence[str],
    target_mean: float = 70_000.0,
    target_high_rate: float = 0.423,
    high_threshold: float = 50_000.0,
    noise_scale: float = 5_000.0,
    learner: Mapping | None = None,
    name: str = "income",
) -> IncomeInitialSampler:
    """Fit h_R on the binary >50K label, then solve the two-constant
    calibration exactly: the affine image of the training predictions
    has mean ``target_mean`` and crosses ``high_threshold`` at the
    (1 - target_high_rate) quantile."""
    if target_mean <= 0:
        raise ConfigError("income calibration target_mean must be positive")
    if not 0.0 < target_high_rate < 1.0:
        raise ConfigError("target_high_rate must lie in (0, 1)")
    spec = _learner_spec(learner, "bagged_trees")
    label = np.asarray(
        dataset.frame["income"] == ">50K", dtype=float
    )
    regressor = fit_bagged_trees(
        dataset.frame, label, _schemas_for(dataset, regressor_parents),
        n_trees=int(spec.get("n_trees", 50)),
        max_depth=int(spec.get("max_depth", 6)),
        min_samples_leaf=int(spec.get("min_samples_leaf", 20)),
        seed=int(spec.get("seed", 0)),
        classification=True,
    )
    scores = regressor.predict(dataset.frame)
    mean_score = float(scores.mean())
    q = float(np.quantile(scores, 1.0 - target_high_rate))
    if mean_score <= q:
        raise NumericError(
            "income calibration is infeasible: the mean predicted score "
            f"({mean_score:.4f}) does not exceed the target quantile "
            f"({q:.4f}); adjust target_high_rate or the regressor"
        )
    scale = (target_mean - high_threshold) / (mean_score - q)
    shift = target_mean - scale * mean_score
    return IncomeInitialSampler(
        name=name,
        parents=tuple(parents),
        regressor=regressor,
        shift=shift,
        scale=scale,
        noise_scale=float(noise_scale),
        diagnostics={
            "train_auc": auc_score(label, scores),
            "shift": shift,
            "scale": scale,
            "mean_score": mean_score,
            "quantile_score": q,
        },
    )
