"""Treatment-effect estimators over cross-sectional tables.

The input format is one row per subject with a binary treatment column
``a``, an outcome column ``y`` and a declared covariate set.  Every
estimator returns an :class:`EffectEstimate`; those that model
individual-level effects also carry a callable that predicts them on
new covariate rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .config import EstimationConfig
from .encoding import FeatureEncoder
from .errors import ConfigError, DataError, NumericError
from .ingest import VariableSchema
from .learners import (
    auc_score,
    contiguous_folds,
    fit_multinomial_logistic,
    fit_ridge,
    grid_points,
    r2_score,
)
from .trees import fit_bagged_trees, fit_boosted_trees

__all__ = [
    "ATE_ONLY_ESTIMATORS",
    "ESTIMATOR_ALIASES",
    "ESTIMATOR_NAMES",
    "EffectEstimate",
    "EstimationTable",
    "estimate_dml",
    "estimate_ipw",
    "estimate_matching",
    "estimate_s_learner",
    "estimate_t_learner",
    "run_estimator",
    "select_hyperparameters",
]


@dataclass
class EstimationTable:
    """Cross-sectional estimation input with typed covariates.

    ``frame`` holds at least the columns ``subject``, ``a``, ``y`` and
    one column per declared covariate; ``schemas`` gives the covariate
    types in the same order as ``covariates``.
    """

    frame: pd.DataFrame
    covariates: tuple[str, ...]
    schemas: tuple[VariableSchema, ...]
    conditioning: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.covariates = tuple(self.covariates)
        self.schemas = tuple(self.schemas)
        self.conditioning = tuple(self.conditioning)
        reserved = {"a", "y", "subject"} & set(self.covariates)
        if reserved:
            raise DataError(
                f"covariate names {sorted(reserved)} collide with the "
                f"table's own columns"
            )
        missing = [c for c in ("a", "y", *self.covariates, *self.conditioning)
                   if c not in self.frame.columns]
        if missing:
            raise DataError(f"estimation table is missing columns {missing}")
        if len(self.frame) == 0:
            raise DataError("estimation table has no rows")
        declared = tuple(s.name for s in self.schemas)
        if declared != self.covariates:
            raise DataError(
                f"covariate schemas {declared} do not match the declared "
                f"covariates {self.covariates}"
            )
        a = np.asarray(self.frame["a"])
        if not np.isin(a, (0, 1)).all():
            raise DataError("treatment column must contain only 0 and 1")
        y = np.asarray(self.frame["y"], dtype=float)
        if not np.all(np.isfinite(y)):
            raise DataError("outcome column contains non-finite values")

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def a(self) -> NDArray[np.int64]:
        return np.asarray(self.frame["a"], dtype=np.int64)

    @property
    def y(self) -> NDArray[np.float64]:
        return np.asarray(self.frame["y"], dtype=float)

    def covariate_frame(self) -> pd.DataFrame:
        return self.frame[list(self.covariates)]

    def schema(self, name: str) -> VariableSchema:
        for s in self.schemas:
            if s.name == name:
                return s
        raise DataError(f"no covariate named {name!r} in the estimation table")

    def with_covariates(self, names) -> "EstimationTable":
        """The same rows with the covariate set narrowed to ``names``."""
        names = tuple(names)
        unknown = [c for c in names if c not in self.covariates]
        if unknown:
            raise DataError(f"unknown covariates {unknown}")
        return replace(
            self, covariates=names,
            schemas=tuple(self.schema(c) for c in names),
        )


@dataclass
class EffectEstimate:
    """Result of one estimator run.

    ``cate`` holds per-row effect predictions on the table the estimator
    was fit on; ``predict_cate`` maps a new covariate frame to the same
    kind of predictions.  Both are ``None`` for estimators that only
    produce a population-level contrast.  For estimators that do carry
    ``cate``, ``ate`` is its mean.
    """

    estimator: str
    ate: float
    cate: NDArray[np.float64] | None = None
    predict_cate: Callable[[pd.DataFrame], NDArray[np.float64]] | None = None
    diagnostics: dict = field(default_factory=dict)


# --------------------------------------------------------------------
# Base learners
#
# Linear models consume the one-hot/standardised design matrix of a
# frozen FeatureEncoder; tree ensembles bin raw frames themselves.  The
# wrappers below hide that difference so estimators and the CV loop can
# treat every learner as frame -> prediction.
# --------------------------------------------------------------------

@dataclass
class _Regressor:
    kind: str
    params: dict
    model: object
    encoder: FeatureEncoder | None = None

    def predict(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        if self.encoder is not None:
            return self.model.predict(self.encoder.transform(frame))
        return self.model.predict(frame)


@dataclass
class _Classifier:
    kind: str
    params: dict
    model: object
    encoder: FeatureEncoder | None = None

    def propensity(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        """P(a = 1 | z) per row."""
        if self.encoder is not None:
            return self.model.predict_proba(self.encoder.transform(frame))[:, 1]
        return self.model.predict(frame)


_REGRESSOR_KINDS = ("ridge", "gbt", "rf")
_CLASSIFIER_KINDS = ("logistic", "gbt_class", "rf_class")

_GRID_FAMILY = {
    "ridge": "ridge",
    "gbt": "boosted_trees",
    "rf": "random_forest",
    "logistic": "logistic",
    "gbt_class": "boosted_trees",
    "rf_class": "random_forest",
}

# Fixed settings used where no grid search is wanted (DML nuisances).
_FIXED_DEFAULTS = {
    "ridge": {"alpha": 1.0},
    "gbt": {"eta": 0.3, "max_depth": 6},
    "rf": {"min_samples_leaf": 5},
    "logistic": {"C": 1.0},
    "gbt_class": {"eta": 0.3, "max_depth": 6},
    "rf_class": {"min_samples_leaf": 5},
}


def _fit_regressor(
    kind: str,
    frame: pd.DataFrame,
    y: NDArray[np.float64],
    schemas: Sequence[VariableSchema],
    config: EstimationConfig,
    params: Mapping,
    sample_weight: NDArray[np.float64] | None = None,
) -> _Regressor:
    if kind == "ridge":
        encoder = FeatureEncoder(schemas)
        X = encoder.fit_transform(frame)
        model = fit_ridge(X, y, alpha=float(params["alpha"]),
                          sample_weight=sample_weight)
        return _Regressor(kind, dict(params), model, encoder)
    if kind == "gbt":
        model = fit_boosted_trees(
            frame, y, schemas,
            n_rounds=config.gbt_rounds,
            eta=float(params["eta"]),
            max_depth=int(params["max_depth"]),
            sample_weight=sample_weight,
        )
        return _Regressor(kind, dict(params), model)
    if kind == "rf":
        if sample_weight is not None:
            raise ConfigError("bagged trees do not support sample weights")
        model = fit_bagged_trees(
            frame, y, schemas,
            n_trees=config.rf_trees,
            min_samples_leaf=int(params["min_samples_leaf"]),
        )
        return _Regressor(kind, dict(params), model)
    raise ConfigError(
        f"unknown outcome learner {kind!r}; expected one of {_REGRESSOR_KINDS}"
    )


def _fit_classifier(
    kind: str,
    frame: pd.DataFrame,
    a: NDArray[np.int64],
    schemas: Sequence[VariableSchema],
    config: EstimationConfig,
    params: Mapping,
) -> _Classifier:
    if kind == "logistic":
        encoder = FeatureEncoder(schemas)
        X = encoder.fit_transform(frame)
        model = fit_multinomial_logistic(
            X, np.asarray(a, dtype=np.int64), 2,
            alpha=1.0 / float(params["C"]),
        )
        return _Classifier(kind, dict(params), model, encoder)
    if kind == "gbt_class":
        model = fit_boosted_trees(
            frame, np.asarray(a, dtype=float), schemas,
            n_rounds=config.gbt_rounds,
            eta=float(params["eta"]),
            max_depth=int(params["max_depth"]),
            classification=True,
        )
        return _Classifier(kind, dict(params), model)
    if kind == "rf_class":
        model = fit_bagged_trees(
            frame, np.asarray(a, dtype=float), schemas,
            n_trees=config.rf_trees,
            min_samples_leaf=int(params["min_samples_leaf"]),
            classification=True,
        )
        return _Classifier(kind, dict(params), model)
    raise ConfigError(
        f"unknown propensity learner {kind!r}; "
        f"expected one of {_CLASSIFIER_KINDS}"
    )


def _fit_learner(kind, frame, target, schemas, config, params):
    if kind in _CLASSIFIER_KINDS:
        return _fit_classifier(kind, frame, target, schemas, config, params)
    return _fit_regressor(kind, frame, target, schemas, config, params)


def select_hyperparameters(
    kind: str,
    frame: pd.DataFrame,
    target: NDArray,
    schemas: Sequence[VariableSchema],
    config: EstimationConfig,
    grid: Mapping[str, Sequence] | None = None,
) -> tuple[object, dict]:
    """Grid search with deterministic contiguous folds.

    Classifiers are scored by validation AUC, regressors by validation
    R².  Ties go to the earliest grid point and the winner is refit on
    the full table.  Returns the fitted learner wrapper and a
    diagnostics dict recording the search.
    """
    if kind not in _GRID_FAMILY:
        raise ConfigError(f"unknown learner kind {kind!r}")
    if grid is None:
        family = _GRID_FAMILY[kind]
        grid = config.grids.get(family)
        if grid is None:
            raise ConfigError(
                f"no hyperparameter grid named {family!r} in the "
                f"estimation config"
            )
    settings = grid_points(grid)
    if not settings:
        raise ConfigError("empty hyperparameter grid")
    if len(settings) > config.max_grid_points:
        raise ConfigError(
            f"grid has {len(settings)} points, over the cap of "
            f"{config.max_grid_points}"
        )
    classify = kind in _CLASSIFIER_KINDS
    target = np.asarray(target, dtype=np.int64 if classify else float)
    folds = contiguous_folds(len(frame), config.cv_folds)
    means = np.empty(len(settings))
    table = []
    for idx, params in enumerate(settings):
        scores = []
        for train, val in folds:
            fitted = _fit_learner(kind, frame.iloc[train], target[train],
                                  schemas, config, params)
            if classify:
                scores.append(auc_score(
                    target[val], fitted.propensity(frame.iloc[val])))
            else:
                scores.append(r2_score(
                    target[val], fitted.predict(frame.iloc[val])))
        means[idx] = float(np.mean(scores))
        table.append({**params, "mean_score": means[idx]})
    best = int(np.argmax(means))
    winner = settings[best]
    fitted = _fit_learner(kind, frame, target, schemas, config, winner)
    diagnostics = {
        "learner": kind,
        "cv_metric": "auc" if classify else "r2",
        "cv_score": float(means[best]),
        "params": dict(winner),
        "cv_table": table,
    }
    return fitted, diagnostics


def _fixed_or_selected(kind, frame, target, schemas, config, params, grid):
    """Fit with explicit params if given, else run the grid search."""
    if params is not None:
        fitted = _fit_learner(kind, frame, target, schemas, config, params)
        return fitted, {"learner": kind, "params": dict(params)}
    return select_hyperparameters(kind, frame, target, schemas, config, grid)


# --------------------------------------------------------------------
# Inverse propensity weighting
# --------------------------------------------------------------------

_IPW_LEARNERS = {"logistic": "logistic", "forest": "rf_class"}


def estimate_ipw(
    table: EstimationTable,
    config: EstimationConfig,
    *,
    variant: str = "ht",
    learner: str = "logistic",
    propensity: NDArray[np.float64] | None = None,
    clip: float | None = None,
    params: Mapping | None = None,
    cache: dict | None = None,
) -> EffectEstimate:
    """Inverse-propensity-weighted contrast of arm means.

    ``variant`` picks the unnormalised ("ht") or weight-normalised
    ("hayek") form.  Propensities come from a cross-validated fit of
    ``learner`` unless an explicit ``propensity`` vector is supplied.
    ``clip`` bounds fitted propensities away from 0 and 1; ``None``
    means the configured default, ``0.0`` disables clipping.  ``cache``
    lets several IPW variants share one propensity fit.
    """
    if variant not in ("ht", "hayek"):
        raise ConfigError(f"unknown IPW variant {variant!r}")
    a = table.a
    y = table.y
    if not (a == 1).any() or not (a == 0).any():
        raise DataError("an IPW arm has zero total weight (empty arm)")
    if clip is None:
        clip = config.propensity_clip

    diagnostics: dict = {"variant": variant, "clip": float(clip)}
    if propensity is not None:
        e = np.asarray(propensity, dtype=float)
        if e.shape != (table.n,):
            raise DataError("propensity vector length does not match table")
        if np.any((e <= 0.0) | (e >= 1.0)):
            raise DataError("supplied propensities must lie in (0, 1)")
        diagnostics["propensity_source"] = "supplied"
    else:
        kind = _IPW_LEARNERS.get(learner)
        if kind is None:
            raise ConfigError(
                f"unknown propensity learner {learner!r}; expected one of "
                f"{sorted(_IPW_LEARNERS)}"
            )
        key = ("propensity", kind)
        if cache is not None and key in cache:
            fitted, fit_diag = cache[key]
        else:
            fitted, fit_diag = _fixed_or_selected(
                kind, table.covariate_frame(), a, table.schemas, config,
                params, None)
            if cache is not None:
                cache[key] = (fitted, fit_diag)
        e = fitted.propensity(table.covariate_frame())
        diagnostics["propensity_source"] = "fitted"
        diagnostics.update(fit_diag)

    if clip > 0.0:
        e = np.clip(e, clip, 1.0 - clip)
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = a / e
        w0 = (1 - a) / (1.0 - e)
    if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w0))):
        raise NumericError(
            "unclipped propensities reached 0 or 1 on an occupied arm; "
            "rerun with clipping enabled"
        )
    if variant == "ht":
        mu1 = float(np.mean(w1 * y))
        mu0 = float(np.mean(w0 * y))
    else:
        mu1 = float(np.sum(w1 * y) / np.sum(w1))
        mu0 = float(np.sum(w0 * y) / np.sum(w0))
    diagnostics.update(mu1=mu1, mu0=mu0)
    return EffectEstimate(
        estimator=f"ipw[{variant},{learner}]",
        ate=mu1 - mu0,
        diagnostics=diagnostics,
    )


# --------------------------------------------------------------------
# S-learner
# --------------------------------------------------------------------

_TREATMENT_FEATURE = VariableSchema("a", "categorical", ("0", "1"))


def _with_treatment_column(frame: pd.DataFrame, a) -> pd.DataFrame:
    out = frame.copy()
    out["a"] = np.where(np.asarray(a) == 1, "1", "0")
    return out


def estimate_s_learner(
    table: EstimationTable,
    config: EstimationConfig,
    *,
    learner: str = "ridge",
    params: Mapping | None = None,
    grid: Mapping[str, Sequence] | None = None,
) -> EffectEstimate:
    """One outcome model with the treatment as an extra (categorical)
    feature; effects are predicted by toggling that feature."""
    if learner not in _REGRESSOR_KINDS:
        raise ConfigError(f"unknown S-learner base {learner!r}")
    aug = _with_treatment_column(table.covariate_frame(), table.a)
    schemas = (*table.schemas, _TREATMENT_FEATURE)
    fitted, diagnostics = _fixed_or_selected(
        learner, aug, table.y, schemas, config, params, grid)

    def predict_cate(frame: pd.DataFrame) -> NDArray[np.float64]:
        ones = _with_treatment_column(frame, np.ones(len(frame)))
        zeros = _with_treatment_column(frame, np.zeros(len(frame)))
        return fitted.predict(ones) - fitted.predict(zeros)

    cate = predict_cate(table.covariate_frame())
    return EffectEstimate(
        estimator=f"s[{learner}]",
        ate=float(np.mean(cate)),
        cate=cate,
        predict_cate=predict_cate,
        diagnostics=diagnostics,
    )


# --------------------------------------------------------------------
# T-learner
# --------------------------------------------------------------------

def estimate_t_learner(
    table: EstimationTable,
    config: EstimationConfig,
    *,
    learner: str = "ridge",
    params: Mapping | None = None,
    grid: Mapping[str, Sequence] | None = None,
) -> EffectEstimate:
    """One outcome model per treatment arm; the effect is the
    difference of the two arms' predictions."""
    if learner not in _REGRESSOR_KINDS:
        raise ConfigError(f"unknown T-learner base {learner!r}")
    a = table.a
    covariates = table.covariate_frame()
    arms = {}
    arm_diag = {}
    for arm in (1, 0):
        mask = a == arm
        if not mask.any():
            raise DataError(f"treatment arm {arm} is empty")
        arms[arm], arm_diag[arm] = _fixed_or_selected(
            learner, covariates.loc[mask], table.y[mask], table.schemas,
            config, params, grid)

    def predict_cate(frame: pd.DataFrame) -> NDArray[np.float64]:
        return arms[1].predict(frame) - arms[0].predict(frame)

    cate = predict_cate(covariates)
    diagnostics = {"learner": learner,
                   "arm1": arm_diag[1], "arm0": arm_diag[0]}
    scores = [d["cv_score"] for d in arm_diag.values() if "cv_score" in d]
    if scores:
        diagnostics["cv_metric"] = "r2"
        diagnostics["cv_score"] = float(np.mean(scores))
    return EffectEstimate(
        estimator=f"t[{learner}]",
        ate=float(np.mean(cate)),
        cate=cate,
        predict_cate=predict_cate,
        diagnostics=diagnostics,
    )


# --------------------------------------------------------------------
# Double machine learning
# --------------------------------------------------------------------

def estimate_dml(
    table: EstimationTable,
    config: EstimationConfig,
    *,
    outcome: str = "ridge",
    propensity: str = "logistic",
    final: str = "ridge",
    outcome_params: Mapping | None = None,
    propensity_params: Mapping | None = None,
) -> EffectEstimate:
    """Cross-fit residual-on-residual regression.

    Nuisance models for the outcome and the treatment are fit with
    K-fold cross-fitting at fixed default settings.  The final stage
    regresses the per-row target (y − m_Y)/(a − m_A) on the covariates
    with weights (a − m_A)², which suppresses rows whose treatment
    residual is tiny; a plain least-squares final stage uses alpha 0.
    """
    if outcome not in _REGRESSOR_KINDS:
        raise ConfigError(f"unknown DML outcome learner {outcome!r}")
    if propensity not in _CLASSIFIER_KINDS:
        raise ConfigError(f"unknown DML propensity learner {propensity!r}")
    if final not in ("ridge", "gbt"):
        raise ConfigError(f"unknown DML final learner {final!r}")
    a = table.a
    y = table.y
    if np.unique(a).size < 2:
        raise NumericError(
            "treatment takes a single value; all residuals fall below "
            "the floor and no effect is identified"
        )
    covariates = table.covariate_frame()
    y_params = dict(_FIXED_DEFAULTS[outcome])
    if outcome_params is not None:
        y_params.update(outcome_params)
    a_params = dict(_FIXED_DEFAULTS[propensity])
    if propensity_params is not None:
        a_params.update(propensity_params)

    m_y = np.empty(table.n)
    m_a = np.empty(table.n)
    for train, val in contiguous_folds(table.n, config.cv_folds):
        reg = _fit_regressor(outcome, covariates.iloc[train], y[train],
                             table.schemas, config, y_params)
        m_y[val] = reg.predict(covariates.iloc[val])
        clf = _fit_classifier(propensity, covariates.iloc[train], a[train],
                              table.schemas, config, a_params)
        m_a[val] = clf.propensity(covariates.iloc[val])

    r_y = y - m_y
    r_a = a - m_a
    if np.all(np.abs(r_a) < config.dml_residual_floor):
        raise NumericError(
            f"all treatment residuals are below "
            f"{config.dml_residual_floor}; the propensity model explains "
            f"treatment completely"
        )
    weights = r_a ** 2
    target = np.zeros(table.n)
    nonzero = r_a != 0.0
    target[nonzero] = r_y[nonzero] / r_a[nonzero]

    if final == "ridge":
        head = _fit_regressor("ridge", covariates, target, table.schemas,
                              config, {"alpha": 0.0}, sample_weight=weights)
    else:
        head = _fit_regressor("gbt", covariates, target, table.schemas,
                              config, _FIXED_DEFAULTS["gbt"],
                              sample_weight=weights)

    def predict_cate(frame: pd.DataFrame) -> NDArray[np.float64]:
        return head.predict(frame)

    cate = predict_cate(covariates)
    diagnostics = {
        "outcome": outcome,
        "propensity": propensity,
        "final": final,
        "cv_metric": "r2",
        "cv_score": r2_score(y, m_y),
        "propensity_auc": auc_score(a, m_a),
        "folds": config.cv_folds,
    }
    return EffectEstimate(
        estimator=f"dml[{outcome},{propensity},{final}]",
        ate=float(np.mean(cate)),
        cate=cate,
        predict_cate=predict_cate,
        diagnostics=diagnostics,
    )


# --------------------------------------------------------------------
# Nearest-neighbor matching
# --------------------------------------------------------------------

def _nearest_rows(queries: NDArray[np.float64],
                  pool: NDArray[np.float64],
                  block: int = 512) -> NDArray[np.int64]:
    """Index into ``pool`` of each query row's nearest neighbour
    (squared Euclidean; ties go to the lowest pool index)."""
    pool_sq = np.einsum("ij,ij->i", pool, pool)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for lo in range(0, queries.shape[0], block):
        chunk = queries[lo:lo + block]
        # ||q - p||² up to a per-query constant, enough for the argmin.
        scores = pool_sq[None, :] - 2.0 * (chunk @ pool.T)
        out[lo:lo + block] = np.argmin(scores, axis=1)
    return out


def estimate_matching(
    table: EstimationTable,
    config: EstimationConfig,
) -> EffectEstimate:
    """1-nearest-neighbour matching on the encoded covariates.

    Each subject's missing potential outcome is copied from its nearest
    opposite-arm neighbour in the standardised one-hot feature space;
    the ATE is the difference of the two imputed-arm means.
    """
    a = table.a
    y = table.y
    treated = np.flatnonzero(a == 1)
    control = np.flatnonzero(a == 0)
    if treated.size == 0 or control.size == 0:
        raise DataError("matching needs both treatment arms non-empty")
    encoder = FeatureEncoder(table.schemas)
    X = encoder.fit_transform(table.covariate_frame())

    y1 = y.astype(float).copy()
    y0 = y.astype(float).copy()
    y0[treated] = y[control][_nearest_rows(X[treated], X[control])]
    y1[control] = y[treated][_nearest_rows(X[control], X[treated])]
    mu1 = float(np.mean(y1))
    mu0 = float(np.mean(y0))
    return EffectEstimate(
        estimator="match[euclidean]",
        ate=mu1 - mu0,
        diagnostics={"metric": "euclidean", "mu1": mu1, "mu0": mu0,
                     "n_treated": int(treated.size),
                     "n_control": int(control.size)},
    )


# --------------------------------------------------------------------
# Named estimator roster
# --------------------------------------------------------------------

def _run_ipw(variant, learner):
    def run(table, config, cache):
        return estimate_ipw(table, config, variant=variant, learner=learner,
                            cache=cache)
    return run


def _run_s(learner):
    def run(table, config, cache):
        return estimate_s_learner(table, config, learner=learner)
    return run


def _run_t(learner):
    def run(table, config, cache):
        return estimate_t_learner(table, config, learner=learner)
    return run


def _run_dml(outcome, propensity, final):
    def run(table, config, cache):
        return estimate_dml(table, config, outcome=outcome,
                            propensity=propensity, final=final)
    return run


_ROSTER: dict[str, Callable] = {
    "ipw_lr": _run_ipw("ht", "logistic"),
    "ipw_rf": _run_ipw("ht", "forest"),
    "ipw_w_lr": _run_ipw("hayek", "logistic"),
    "ipw_w_rf": _run_ipw("hayek", "forest"),
    "match_eu": lambda table, config, cache: estimate_matching(table, config),
    "s_ridge": _run_s("ridge"),
    "s_gbt": _run_s("gbt"),
    "s_rf": _run_s("rf"),
    "dml_linear": _run_dml("ridge", "logistic", "ridge"),
    "dml_gbt": _run_dml("gbt", "gbt_class", "gbt"),
    "dml_mix": _run_dml("gbt", "logistic", "ridge"),
    "t_ridge": _run_t("ridge"),
    "t_gbt": _run_t("gbt"),
    "t_rf": _run_t("rf"),
}

ESTIMATOR_NAMES: tuple[str, ...] = tuple(_ROSTER)

# Alternative spellings kept for compatibility with configs that name
# the boosted-tree learners after the library they originally wrapped.
ESTIMATOR_ALIASES: dict[str, str] = {
    "s_xgbLike": "s_gbt",
    "t_xgbLike": "t_gbt",
    "dml_xgbLike": "dml_gbt",
}

# Estimators whose reported output is the population contrast alone;
# the single-model ridge is included because its effect predictions are
# constant by construction.
ATE_ONLY_ESTIMATORS = frozenset(
    {"ipw_lr", "ipw_rf", "ipw_w_lr", "ipw_w_rf", "match_eu", "s_ridge"}
)


def run_estimator(
    name: str,
    table: EstimationTable,
    config: EstimationConfig,
    cache: dict | None = None,
) -> EffectEstimate:
    """Run one roster estimator by its configured name.

    ``cache`` (a plain dict) is shared across calls so that the HT and
    Hayek variants of the same propensity model fit it only once.
    """
    name = ESTIMATOR_ALIASES.get(name, name)
    runner = _ROSTER.get(name)
    if runner is None:
        raise ConfigError(
            f"unknown estimator {name!r}; configured names are "
            f"{sorted(_ROSTER)}"
        )
    estimate = runner(table, config, cache)
    estimate.estimator = name
    return estimate
