"""Self-contained supervised learners.

Linear models are solved exactly (ridge) or with L-BFGS on an in-module
loss (multinomial logistic); nothing here depends on an external ML
runtime.  The logistic intercepts are never penalised, so at the optimum
the average predicted class probabilities equal the empirical class
frequencies, a property the samplers rely on for marginal calibration.

Model selection uses contiguous (unshuffled) folds: rows are assumed to
be exchangeable, and deterministic folds keep every fit reproducible
without threading random state through the stack.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.optimize import minimize
from scipy.special import logsumexp
from scipy.stats import rankdata

from .errors import DataError, NumericError

__all__ = [
    "RidgeModel", "fit_ridge",
    "LogisticModel", "fit_multinomial_logistic",
    "auc_score", "macro_ovr_auc", "r2_score", "accuracy_score",
    "contiguous_folds", "cross_validate", "CvResult", "grid_points",
]


# --------------------------------------------------------------------
# Ridge regression
# --------------------------------------------------------------------

@dataclass(frozen=True)
class RidgeModel:
    coef: NDArray[np.float64]
    intercept: float
    alpha: float

    def predict(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(X, dtype=float) @ self.coef + self.intercept


def fit_ridge(
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    alpha: float,
    sample_weight: NDArray[np.float64] | None = None,
) -> RidgeModel:
    """Solve the penalised normal equations directly.

    The intercept is excluded from the penalty.  The solution is checked
    against the normal equations it came from; a residual above
    1e-6 relative signals an ill-conditioned solve and is an error.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    if sample_weight is not None:
        w = np.asarray(sample_weight, dtype=float)
        if w.shape != (n,):
            raise ValueError("sample_weight must be one weight per row")
        if np.any(w < 0):
            raise ValueError("sample_weight must be non-negative")
        Xw = Xa * w[:, None]
    else:
        Xw = Xa
    gram = Xw.T @ Xa
    rhs = Xw.T @ y
    penalty = np.full(d + 1, alpha)
    penalty[-1] = 0.0
    gram_pen = gram + np.diag(penalty)
    try:
        theta = np.linalg.solve(gram_pen, rhs)
    except np.linalg.LinAlgError:
        theta = np.linalg.lstsq(gram_pen, rhs, rcond=None)[0]
    residual = float(np.linalg.norm(gram_pen @ theta - rhs))
    scale = max(float(np.linalg.norm(rhs)), 1e-12)
    if residual > 1e-6 * scale:
        raise NumericError(
            f"ridge normal equations solved to relative residual "
            f"{residual / scale:.3e} (limit 1e-06); the design matrix is "
            f"too ill-conditioned for alpha={alpha!r}"
        )
    return RidgeModel(coef=theta[:-1], intercept=float(theta[-1]), alpha=alpha)


# --------------------------------------------------------------------
# Multinomial logistic regression
# --------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    coef: NDArray[np.float64]        # (d, K)
    intercept: NDArray[np.float64]   # (K,)
    alpha: float
    converged: bool
    n_iter: int
    grad_norm: float

    @property
    def n_classes(self) -> int:
        return self.intercept.shape[0]

    def decision_function(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(X, dtype=float) @ self.coef + self.intercept

    def predict_log_proba(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        z = self.decision_function(X)
        return z - logsumexp(z, axis=1, keepdims=True)

    def predict_proba(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.exp(self.predict_log_proba(X))

    def predict(self, X: NDArray[np.float64]) -> NDArray[np.int64]:
        return np.argmax(self.decision_function(X), axis=1)


def _logistic_objective(
    theta: NDArray[np.float64],
    X: NDArray[np.float64],
    onehot: NDArray[np.float64],
    alpha: float,
) -> tuple[float, NDArray[np.float64]]:
    n, d = X.shape
    k = onehot.shape[1]
    W = theta[: d * k].reshape(d, k)
    b = theta[d * k:]
    z = X @ W + b
    log_norm = logsumexp(z, axis=1, keepdims=True)
    log_p = z - log_norm
    nll = -float(np.sum(log_p * onehot))
    loss = (nll + 0.5 * alpha * float(np.sum(W * W))) / n
    P = np.exp(log_p)
    delta = P - onehot
    grad_W = (X.T @ delta + alpha * W) / n
    grad_b = delta.sum(axis=0) / n
    return loss, np.concatenate([grad_W.ravel(), grad_b])


def fit_multinomial_logistic(
    X: NDArray[np.float64],
    y: NDArray[np.int64],
    n_classes: int,
    alpha: float,
    max_iter: int = 500,
    gtol: float = 1e-6,
) -> LogisticModel:
    """Penalised multinomial logistic regression via L-BFGS.

    ``alpha`` multiplies half the squared weight norm, intercepts are
    free.  The loss is averaged over rows so that convergence tolerances
    are independent of the sample size.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("y must be a 1-d array of class codes")
    if np.any((y < 0) | (y >= n_classes)):
        raise DataError(
            f"class codes outside [0, {n_classes}) passed to logistic fit"
        )
    n, d = X.shape
    onehot = np.zeros((n, n_classes), dtype=float)
    onehot[np.arange(n), y] = 1.0
    theta0 = np.zeros(d * n_classes + n_classes)
    result = minimize(
        _logistic_objective,
        theta0,
        args=(X, onehot, float(alpha)),
        method="L-BFGS-B",
        jac=True,
        options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-14,
                 "maxfun": max(10 * max_iter, 15_000)},
    )
    W = result.x[: d * n_classes].reshape(d, n_classes)
    b = result.x[d * n_classes:]
    grad_norm = float(np.max(np.abs(result.jac)))
    return LogisticModel(
        coef=W, intercept=b, alpha=float(alpha),
        converged=bool(result.success or grad_norm <= gtol * 10),
        n_iter=int(result.nit), grad_norm=grad_norm,
    )


# --------------------------------------------------------------------
# Scores
# --------------------------------------------------------------------

def auc_score(y: NDArray, scores: NDArray[np.float64]) -> float:
    """Area under the ROC curve via the rank-sum statistic, with tied
    scores receiving average ranks."""
    y = np.asarray(y).astype(bool)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise NumericError("AUC is undefined when only one class is present")
    ranks = rankdata(scores)
    u = float(ranks[y].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def macro_ovr_auc(y: NDArray[np.int64], proba: NDArray[np.float64]) -> float:
    """Macro-averaged one-vs-rest AUC over the classes present in ``y``."""
    y = np.asarray(y)
    proba = np.asarray(proba, dtype=float)
    present = np.unique(y)
    if present.size < 2:
        raise NumericError("macro AUC needs at least two observed classes")
    aucs = [auc_score(y == k, proba[:, int(k)]) for k in present]
    return float(np.mean(aucs))


def r2_score(y: NDArray[np.float64], pred: NDArray[np.float64]) -> float:
    y = np.asarray(y, dtype=float)
    pred = np.asarray(pred, dtype=float)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def accuracy_score(y: NDArray, pred: NDArray) -> float:
    y = np.asarray(y)
    pred = np.asarray(pred)
    return float(np.mean(y == pred))


# --------------------------------------------------------------------
# Cross-validation
# --------------------------------------------------------------------

def contiguous_folds(n: int, n_folds: int) -> list[tuple[NDArray, NDArray]]:
    """Split ``range(n)`` into ``n_folds`` contiguous validation blocks."""
    if n < n_folds:
        raise DataError(f"cannot make {n_folds} folds from {n} rows")
    blocks = np.array_split(np.arange(n), n_folds)
    folds = []
    for i, val in enumerate(blocks):
        train = np.concatenate([b for j, b in enumerate(blocks) if j != i])
        folds.append((train, val))
    return folds


def grid_points(grid: Mapping[str, Sequence]) -> list[dict]:
    """Expand a parameter grid into a list of settings, varying the last
    key fastest; the order defines the tie-break."""
    keys = list(grid)
    combos = itertools.product(*(grid[k] for k in keys))
    return [dict(zip(keys, values)) for values in combos]


@dataclass
class CvResult:
    best_params: dict
    best_score: float
    table: pd.DataFrame
    model: object


def cross_validate(
    X: NDArray[np.float64],
    y: NDArray,
    grid: Mapping[str, Sequence],
    fit_fn: Callable[..., object],
    score_fn: Callable[[object, NDArray, NDArray], float],
    n_folds: int = 5,
) -> CvResult:
    """Grid search over deterministic contiguous folds.

    Ties on the mean validation score go to the earliest grid point.
    The winning setting is refit on the full data.
    """
    settings = grid_points(grid)
    if not settings:
        raise ValueError("empty parameter grid")
    folds = contiguous_folds(len(y), n_folds)
    rows = []
    means = np.empty(len(settings))
    for idx, params in enumerate(settings):
        scores = []
        for train, val in folds:
            model = fit_fn(X[train], y[train], **params)
            scores.append(score_fn(model, X[val], y[val]))
        means[idx] = float(np.mean(scores))
        rows.append({**params, "mean_score": means[idx]})
    best = int(np.argmax(means))
    winner = settings[best]
    model = fit_fn(X, y, **winner)
    return CvResult(
        best_params=winner,
        best_score=float(means[best]),
        table=pd.DataFrame(rows),
        model=model,
    )
