"""Evaluation tasks, effect metrics, and report files.

A benchmark run scores a roster of estimators against the simulated
ground truth: each estimator is fit on the observational table with a
task's adjustment set, its effect predictions are evaluated on the
held-out counterfactual cohort, and uncertainty comes from resampling
that cohort (estimators are never refit inside the bootstrap).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from . import __version__
from .config import SimulatorConfig
from .engine import CateBenchmark
from .errors import ConfigError, DataError
from .estimators import (
    ATE_ONLY_ESTIMATORS,
    EstimationTable,
    run_estimator,
)
from .graph import adjustment_set

__all__ = [
    "MetricReport",
    "StratifiedResult",
    "TaskSpec",
    "bootstrap_ci",
    "default_tasks",
    "emit_report",
    "evaluate_task",
    "r2_cate",
    "stratified_cate",
]

log = logging.getLogger(__name__)


# --------------------------------------------------------------------
# Tasks
# --------------------------------------------------------------------

@dataclass(frozen=True)
class TaskSpec:
    """One evaluation setting.

    ``adjustment`` names the covariate columns the estimators are fit
    on; ``conditioning`` names the columns the reported effect is
    expressed over.  A nonzero ``n_bins`` requests effects stratified
    over integer bins of the single conditioning column instead of
    per-subject scoring.
    """

    id: int
    name: str
    adjustment: tuple[str, ...]
    conditioning: tuple[str, ...]
    n_bins: int = 0

    def __post_init__(self):
        object.__setattr__(self, "adjustment", tuple(self.adjustment))
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        if self.id < 1:
            raise ConfigError("task id must be positive")
        if not self.adjustment:
            raise ConfigError("task adjustment set is empty")
        if self.n_bins < 0:
            raise ConfigError("n_bins must be non-negative")
        if self.n_bins and len(self.conditioning) != 1:
            raise ConfigError(
                "binned tasks condition on exactly one column"
            )


def _node_column(node, t0: int, covariates: Sequence[str]) -> str:
    name, t = node
    if t == t0:
        column = name
    elif t == t0 - 1:
        column = f"{name}_prev"
    else:
        raise ConfigError(
            f"adjustment node {name!r} at t={t} is not visible in a "
            f"cross-section at t={t0}"
        )
    if column not in covariates:
        raise ConfigError(
            f"adjustment column {column!r} is not in the estimation table"
        )
    return column


def default_tasks(
    config: SimulatorConfig, table: EstimationTable
) -> tuple[TaskSpec, TaskSpec, TaskSpec]:
    """The three standard tasks for a benchmark table.

    Task 1 adjusts for every pre-treatment covariate; Task 2 for the
    treatment's direct causes, read off the causal graph as the minimal
    backdoor set; Task 3 reuses the full adjustment but reports effects
    over integer bins of the education rank.
    """
    b = config.benchmark
    full = table.covariates
    minimal = adjustment_set(
        config.graph(), (b.treatment, b.t0), (b.outcome, b.horizon),
        mode="minimal",
    )
    direct = tuple(
        sorted(
            (_node_column(node, b.t0, full) for node in minimal),
            key=full.index,
        )
    )
    rank = "education-num"
    if rank not in full:
        raise ConfigError(
            f"the binned task needs the {rank!r} column in the table"
        )
    n_bins = len(table.schema("education").categories)
    return (
        TaskSpec(1, "full pre-treatment covariates", full, full),
        TaskSpec(2, "direct causes of the treatment", direct, direct),
        TaskSpec(3, "education-rank bins", full, (rank,), n_bins=n_bins),
    )


# --------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------

def r2_cate(
    pred: NDArray[np.float64], truth: NDArray[np.float64]
) -> float:
    """Coefficient of determination of effect predictions against the
    ground-truth effect vector."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DataError("prediction and truth vectors must align")
    if pred.size < 2:
        raise DataError("R² needs at least two rows")
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise DataError("ground-truth effects have zero variance")
    ss_res = float(np.sum((truth - pred) ** 2))
    return 1.0 - ss_res / ss_tot


def bootstrap_ci(
    statistic: Callable[[NDArray], float],
    data: NDArray,
    iterations: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval of ``statistic`` over row
    resamples of ``data``.  Deterministic given ``seed``."""
    data = np.asarray(data)
    n = data.shape[0]
    if n == 0:
        raise DataError("cannot bootstrap an empty sample")
    if iterations < 1:
        raise ConfigError("bootstrap needs at least one iteration")
    if not 0.0 < alpha < 1.0:
        raise ConfigError("bootstrap alpha must lie in (0, 1)")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    stats = np.empty(iterations)
    for i in range(iterations):
        stats[i] = statistic(data[rng.integers(0, n, size=n)])
    lo, hi = np.quantile(stats, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(lo), float(hi)


@dataclass(frozen=True)
class StratifiedResult:
    """Per-bin effect means and their agreement.

    ``bins`` has one row per occupied bin (bin label, count, mean truth,
    mean prediction); ``excluded`` lists empty bin labels; ``r2`` scores
    the occupied bins' prediction means against their truth means.
    """

    bins: pd.DataFrame
    r2: float
    excluded: tuple[int, ...]


def _bin_means(
    values: NDArray[np.float64], bin_of: NDArray[np.int64], n_bins: int
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    counts = np.bincount(bin_of, minlength=n_bins)
    sums = np.bincount(bin_of, weights=values, minlength=n_bins)
    means = np.divide(sums, counts, out=np.full(n_bins, np.nan),
                      where=counts > 0)
    return means, counts


def _bin_index(
    levels: NDArray[np.float64], n_bins: int
) -> NDArray[np.int64]:
    bins = np.rint(np.asarray(levels, dtype=float)).astype(np.int64) - 1
    if bins.size and ((bins < 0).any() or (bins >= n_bins).any()):
        raise DataError(
            f"bin levels must be integers in [1, {n_bins}]"
        )
    return bins


def stratified_cate(
    pred: NDArray[np.float64],
    truth: NDArray[np.float64],
    levels: NDArray[np.float64],
    n_bins: int = 16,
) -> StratifiedResult:
    """Effect means per integer bin of a conditioning column.

    ``levels`` holds 1-based integer bin labels per subject.  Empty bins
    are reported and left out of the R²; the R² compares the occupied
    bins' prediction means with their ground-truth means.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.shape != np.shape(levels):
        raise DataError("pred, truth and levels must align")
    bin_of = _bin_index(levels, n_bins)
    truth_means, counts = _bin_means(truth, bin_of, n_bins)
    pred_means, _ = _bin_means(pred, bin_of, n_bins)
    occupied = counts > 0
    frame = pd.DataFrame(
        {
            "bin": np.arange(1, n_bins + 1)[occupied],
            "n": counts[occupied],
            "truth_mean": truth_means[occupied],
            "pred_mean": pred_means[occupied],
        }
    )
    excluded = tuple(int(b) for b in np.arange(1, n_bins + 1)[~occupied])
    r2 = r2_cate(pred_means[occupied], truth_means[occupied])
    return StratifiedResult(bins=frame, r2=r2, excluded=excluded)


def _stratified_r2(
    pred: NDArray[np.float64],
    truth: NDArray[np.float64],
    bin_of: NDArray[np.int64],
    n_bins: int,
) -> float:
    """R² of per-bin means, for resampled draws (empty bins dropped)."""
    truth_means, counts = _bin_means(truth, bin_of, n_bins)
    pred_means, _ = _bin_means(pred, bin_of, n_bins)
    occupied = counts > 0
    return r2_cate(pred_means[occupied], truth_means[occupied])


# --------------------------------------------------------------------
# Task evaluation
# --------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    """Scores for one task: a row per estimator, with the point metrics
    and their evaluation-resampling intervals."""

    task: TaskSpec
    ground_truth_ate: float
    rows: pd.DataFrame
    plot: pd.DataFrame | None
    excluded_bins: tuple[int, ...]
    bootstrap_iterations: int
    bootstrap_alpha: float
    bootstrap_seed: int

    def __post_init__(self):
        bad = self.rows.loc[self.rows["ae_ate"] < 0, "estimator"]
        if len(bad):
            raise DataError(f"negative absolute error for {list(bad)}")


def _bracket(lo: float, hi: float, point: float) -> tuple[float, float]:
    """Widen a percentile interval (never shrink it) so the reported
    bounds always bracket the point estimate."""
    return min(lo, point), max(hi, point)


def evaluate_task(
    task: TaskSpec,
    benchmark: CateBenchmark,
    config: SimulatorConfig,
    estimators: Sequence[str] | None = None,
) -> MetricReport:
    """Fit each estimator on the observational table under the task's
    adjustment set and score it against the coupled-arm ground truth.

    ATE error is the absolute gap to the ground-truth ATE; effect
    predictions are scored on the counterfactual cohort, per subject for
    plain tasks and per bin for stratified ones.  Intervals are
    percentile bootstraps over evaluation subjects, widened where needed
    to bracket the point estimate.
    """
    est_cfg = config.estimation
    names = tuple(estimators if estimators is not None else est_cfg.estimators)
    if not names:
        raise ConfigError("no estimators requested")
    truth = np.asarray(benchmark.effects, dtype=float)
    if truth.size == 0:
        raise DataError("benchmark has no ground-truth effects")
    truth_ate = float(truth.mean())
    table = replace(
        benchmark.observational.with_covariates(task.adjustment),
        conditioning=task.conditioning,
    )
    evaluation = benchmark.evaluation
    boot = est_cfg.bootstrap
    if task.n_bins:
        bin_of = _bin_index(evaluation[task.conditioning[0]], task.n_bins)
    cache: dict = {}
    rows = []
    bin_preds: dict[str, NDArray[np.float64]] = {}
    for name in names:
        started = time.perf_counter()
        estimate = run_estimator(name, table, est_cfg, cache)
        row: dict = {
            "estimator": name,
            "cv_metric": estimate.diagnostics.get("cv_metric"),
            "cv_score": estimate.diagnostics.get("cv_score"),
        }
        if name in ATE_ONLY_ESTIMATORS or estimate.predict_cate is None:
            ate = float(estimate.ate)
            ae = abs(ate - truth_ate)
            lo, hi = bootstrap_ci(
                lambda d, point=ate: abs(point - float(d.mean())),
                truth, boot.iterations, boot.alpha, boot.seed,
            )
            row.update(ate=ate, ae_ate=ae,
                       r2_cate=None, r2_lo=None, r2_hi=None)
        else:
            pred = np.asarray(estimate.predict_cate(evaluation), dtype=float)
            ate = float(pred.mean())
            ae = abs(ate - truth_ate)
            paired = np.column_stack([pred, truth])
            lo, hi = bootstrap_ci(
                lambda d: abs(float(d[:, 0].mean() - d[:, 1].mean())),
                paired, boot.iterations, boot.alpha, boot.seed,
            )
            if task.n_bins:
                result = stratified_cate(
                    pred, truth, evaluation[task.conditioning[0]],
                    task.n_bins,
                )
                r2 = result.r2
                bin_preds[name] = result.bins["pred_mean"].to_numpy()
                with_bins = np.column_stack([paired, bin_of])
                r2_lo, r2_hi = bootstrap_ci(
                    lambda d: _stratified_r2(
                        d[:, 0], d[:, 1], d[:, 2].astype(np.int64),
                        task.n_bins),
                    with_bins, boot.iterations, boot.alpha, boot.seed,
                )
            else:
                r2 = r2_cate(pred, truth)
                r2_lo, r2_hi = bootstrap_ci(
                    lambda d: r2_cate(d[:, 0], d[:, 1]),
                    paired, boot.iterations, boot.alpha, boot.seed,
                )
            r2_lo, r2_hi = _bracket(r2_lo, r2_hi, r2)
            row.update(ate=ate, ae_ate=ae,
                       r2_cate=r2, r2_lo=r2_lo, r2_hi=r2_hi)
        ae_lo, ae_hi = _bracket(lo, hi, ae)
        row.update(ae_lo=ae_lo, ae_hi=ae_hi)
        rows.append(row)
        log.info(
            "task %d %-10s ate %12.1f ae %10.1f (%.1fs)",
            task.id, name, row["ate"], row["ae_ate"],
            time.perf_counter() - started,
        )

    plot = None
    excluded: tuple[int, ...] = ()
    if task.n_bins:
        base = stratified_cate(truth, truth,
                               evaluation[task.conditioning[0]], task.n_bins)
        excluded = base.excluded
        plot = pd.DataFrame({"education_bin": base.bins["bin"],
                             "ground_truth": base.bins["truth_mean"]})
        for name, means in bin_preds.items():
            plot[name] = means
    columns = ["estimator", "ate", "ae_ate", "ae_lo", "ae_hi",
               "r2_cate", "r2_lo", "r2_hi", "cv_metric", "cv_score"]
    frame = pd.DataFrame(rows)[columns]
    return MetricReport(
        task=task,
        ground_truth_ate=truth_ate,
        rows=frame,
        plot=plot,
        excluded_bins=excluded,
        bootstrap_iterations=boot.iterations,
        bootstrap_alpha=boot.alpha,
        bootstrap_seed=boot.seed,
    )


# --------------------------------------------------------------------
# Report files
# --------------------------------------------------------------------

def _task_table(report: MetricReport) -> pd.DataFrame:
    lead = pd.DataFrame([{
        "estimator": "ground_truth",
        "ate": report.ground_truth_ate,
    }])
    return pd.concat([lead, report.rows], ignore_index=True)


def emit_report(
    reports: Sequence[MetricReport],
    destination,
    *,
    cohort: pd.DataFrame | None = None,
    manifest: Mapping | None = None,
) -> list[Path]:
    """Write the benchmark outputs under ``destination``.

    One metrics CSV per task, a per-bin plot-data CSV for stratified
    tasks, an optional cohort-comparison CSV, and a JSON run manifest.
    Rerunning with the same inputs reproduces every byte except the
    manifest's ``generated_at`` field.
    """
    if not reports:
        raise ConfigError("nothing to report")
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    task_meta = []
    for report in reports:
        path = destination / f"task_{report.task.id}_metrics.csv"
        _task_table(report).to_csv(path, index=False)
        written.append(path)
        if report.plot is not None:
            plot_path = destination / f"task_{report.task.id}_bins.csv"
            report.plot.to_csv(plot_path, index=False)
            written.append(plot_path)
        task_meta.append({
            "id": report.task.id,
            "name": report.task.name,
            "adjustment": list(report.task.adjustment),
            "conditioning": list(report.task.conditioning),
            "n_bins": report.task.n_bins,
            "excluded_bins": list(report.excluded_bins),
            "ground_truth_ate": report.ground_truth_ate,
            "bootstrap": {
                "iterations": report.bootstrap_iterations,
                "alpha": report.bootstrap_alpha,
                "seed": report.bootstrap_seed,
            },
        })
    if cohort is not None:
        path = destination / "cohort_comparison.csv"
        cohort.to_csv(path, index=False)
        written.append(path)
    payload = {
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "tasks": task_meta,
    }
    if manifest:
        payload.update(manifest)
    path = destination / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
