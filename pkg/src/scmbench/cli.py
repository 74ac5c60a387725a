"""Command-line front end.

Verbs cover the full pipeline: ``fit`` checks the mechanisms against
the census cohort, ``simulate`` writes panels, ``benchmark`` builds the
coupled-arm evaluation data, ``estimate`` scores one task, ``report``
runs every task and writes the result tables, and ``stats`` compares a
simulated cohort against the source data.  Exit codes: 0 on success, 2
for configuration or usage problems, 3 for data problems, 4 for numeric
failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .benchmark import default_tasks, emit_report, evaluate_task
from .config import load_config
from .engine import Policy, build_cate_benchmark, fit_scm, simulate_panel
from .errors import ConfigError, DataError, NumericError
from .estimators import ESTIMATOR_ALIASES, ESTIMATOR_NAMES
from .ingest import cohort_stats, compare_cohorts, load_adult, preprocess

log = logging.getLogger(__name__)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("adult", help="path to the census data file")
    sub.add_argument("--config", default=None,
                     help="simulator config YAML (default: packaged)")
    sub.add_argument("--out", default=None, help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scmbench",
        description="Simulate life-course panels from census data and "
                    "benchmark treatment-effect estimators on them.",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    p = verbs.add_parser("fit", help="fit the mechanisms and report "
                                     "their in-sample diagnostics")
    _add_common(p)
    p.set_defaults(func=_cmd_fit)

    p = verbs.add_parser("simulate", help="simulate a panel and write it "
                                          "as CSV")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000, help="subjects")
    p.add_argument("--horizon", type=int, default=None,
                   help="steps to simulate (default: benchmark horizon)")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = verbs.add_parser("benchmark", help="build the coupled-arm "
                                           "benchmark and write its tables")
    _add_common(p)
    p.add_argument("--n", type=int, default=None,
                   help="cohort size for both the observational and the "
                        "counterfactual samples (default: config)")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_benchmark)

    p = verbs.add_parser("estimate", help="run estimators on one task")
    _add_common(p)
    p.add_argument("--task", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--estimators", default=None,
                   help="comma-separated estimator names (default: config)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_estimate)

    p = verbs.add_parser("report", help="run every task and write the "
                                        "full report")
    _add_common(p)
    p.add_argument("--estimators", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_report)

    p = verbs.add_parser("stats", help="compare a simulated first-step "
                                       "cohort against the source data")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=50_000)
    p.set_defaults(func=_cmd_stats)
    return parser


def _prepare(args):
    config = load_config(args.config) if args.config else load_config()
    data = preprocess(load_adult(args.adult))
    log.info("base cohort: %d rows", len(data.frame))
    scm = fit_scm(config, data)
    log.info("fitted %d mechanisms (digest %s)",
             len(scm.initial), scm.digest[:12])
    return config, data, scm


def _estimator_names(args) -> tuple[str, ...] | None:
    if args.estimators is None:
        return None
    names = tuple(ESTIMATOR_ALIASES.get(s.strip(), s.strip())
                  for s in args.estimators.split(",") if s.strip())
    unknown = [n for n in names if n not in ESTIMATOR_NAMES]
    if unknown:
        raise ConfigError(
            f"unknown estimators {unknown}; available: "
            f"{', '.join(ESTIMATOR_NAMES)}"
        )
    if not names:
        raise ConfigError("--estimators lists no names")
    return names


def _outdir(args, default: str | None = None) -> Path | None:
    target = args.out if args.out is not None else default
    if target is None:
        return None
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_fit(args) -> int:
    _, _, scm = _prepare(args)
    out = _outdir(args)
    if out is not None:
        path = out / "fit_diagnostics.csv"
        scm.diagnostics.to_csv(path, index=False)
        print(path)
    else:
        print(scm.diagnostics.to_string(index=False))
    print(f"digest: {scm.digest}")
    return 0


def _cmd_simulate(args) -> int:
    config, _, scm = _prepare(args)
    horizon = args.horizon or config.benchmark.horizon
    panel = simulate_panel(scm, args.n, horizon,
                           Policy.observational(), seed=args.seed,
                           n_threads=args.threads)
    out = _outdir(args, ".")
    path = out / f"panel_n{args.n}_h{horizon}_s{args.seed}.csv"
    panel.to_csv(path)
    print(path)
    return 0


def _cmd_benchmark(args) -> int:
    config, _, scm = _prepare(args)
    bench = build_cate_benchmark(
        scm, n_observational=args.n, n_counterfactual=args.n,
        horizon=args.horizon, n_threads=args.threads,
    )
    table = bench.observational
    print(f"observational rows kept: {table.n} "
          f"(dropped {table.meta['n_dropped']})")
    print(f"ground-truth ATE: {bench.ate:,.1f}")
    out = _outdir(args)
    if out is not None:
        table.frame.to_csv(out / "benchmark_table.csv", index=False)
        truth = bench.evaluation.copy()
        truth.insert(0, "effect", bench.effects)
        truth.to_csv(out / "ground_truth.csv", index=False)
        print(out / "benchmark_table.csv")
        print(out / "ground_truth.csv")
    return 0


def _cmd_estimate(args) -> int:
    names = _estimator_names(args)
    config, _, scm = _prepare(args)
    bench = build_cate_benchmark(
        scm, n_observational=args.n, n_counterfactual=args.n,
        horizon=args.horizon, n_threads=args.threads,
    )
    tasks = default_tasks(config, bench.observational)
    task = tasks[args.task - 1]
    report = evaluate_task(task, bench, config, names)
    print(f"task {task.id} ({task.name}); ground-truth ATE "
          f"{report.ground_truth_ate:,.1f}")
    print(report.rows.to_string(index=False))
    out = _outdir(args)
    if out is not None:
        for path in emit_report([report], out,
                                manifest=_manifest(config, args)):
            print(path)
    return 0


def _cmd_report(args) -> int:
    names = _estimator_names(args)
    config, data, scm = _prepare(args)
    bench = build_cate_benchmark(
        scm, n_observational=args.n, n_counterfactual=args.n,
        horizon=args.horizon, n_threads=args.threads,
    )
    tasks = default_tasks(config, bench.observational)
    reports = [evaluate_task(task, bench, config, names) for task in tasks]
    sim = simulate_panel(scm, args.n or config.benchmark.n_observational, 1,
                         Policy.observational(),
                         seed=config.benchmark.seed_observational,
                         n_threads=args.threads)
    comparison = compare_cohorts(
        cohort_stats(sim.frame(1), sim.schema),
        cohort_stats(data.frame, data.schema),
    )
    out = _outdir(args, "scmbench-report")
    for path in emit_report(reports, out, cohort=comparison,
                            manifest=_manifest(config, args)):
        print(path)
    return 0


def _cmd_stats(args) -> int:
    config, data, scm = _prepare(args)
    panel = simulate_panel(scm, args.n, 1, Policy.observational(),
                           seed=args.seed)
    comparison = compare_cohorts(
        cohort_stats(panel.frame(1), panel.schema),
        cohort_stats(data.frame, data.schema),
    )
    out = _outdir(args)
    if out is not None:
        path = out / "cohort_comparison.csv"
        comparison.to_csv(path, index=False)
        print(path)
    else:
        print(comparison.to_string(index=False))
    return 0


def _manifest(config, args) -> dict:
    return {
        "config_digest": config.digest,
        "seeds": {
            "observational": config.benchmark.seed_observational,
            "counterfactual": config.benchmark.seed_counterfactual,
        },
        "n": args.n or config.benchmark.n_observational,
        "horizon": args.horizon or config.benchmark.horizon,
        "estimators": list(_estimator_names(args)
                           or config.estimation.estimators),
    }


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
