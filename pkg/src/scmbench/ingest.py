"""Census table ingestion.

Loads the Adult census file in its canonical distribution format (15
comma-separated columns, ``?`` for missing fields, the train and test
partitions concatenated into one file) and turns it into the cleaned
cohort table the simulator is fit on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd

from .errors import DataError

__all__ = [
    "RAW_COLUMNS",
    "VariableSchema",
    "BaseDataset",
    "CohortStats",
    "load_adult",
    "preprocess",
    "cohort_stats",
    "compare_cohorts",
]

RAW_COLUMNS = (
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
)

_NUMERIC_RAW = frozenset(
    ("age", "fnlwgt", "education-num", "capital-gain", "capital-loss", "hours-per-week")
)

# The published cohort tables collapse the three Married-* categories.
_MARRIED_VARIANTS = frozenset(
    ("Married-civ-spouse", "Married-spouse-absent", "Married-AF-spouse")
)

CLEAN_COLUMNS = (
    "age",
    "workclass",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-net",
    "hours-per-week",
    "native-country",
    "income",
)

_CLEAN_CATEGORICAL = (
    "workclass",
    "education",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "native-country",
    "income",
)

_CLEAN_CONTINUOUS = ("age", "education-num", "capital-net", "hours-per-week")


@dataclass(frozen=True)
class VariableSchema:
    """Declared name, kind and (for categoricals) frozen vocabulary."""

    name: str
    kind: Literal["categorical", "continuous"]
    categories: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "categorical" and len(self.categories) < 2:
            raise DataError(
                f"categorical variable {self.name!r} needs at least 2 categories"
            )
        if self.kind == "continuous" and self.categories:
            raise DataError(
                f"continuous variable {self.name!r} cannot declare categories"
            )


@dataclass(frozen=True)
class BaseDataset:
    """Cleaned cohort table with frozen schema and provenance counts."""

    frame: pd.DataFrame
    schema: tuple[VariableSchema, ...]
    n_raw: int
    n_dropped_missing: int
    source_digest: str = ""

    def variable(self, name: str) -> VariableSchema:
        for v in self.schema:
            if v.name == name:
                return v
        raise DataError(f"unknown variable {name!r}")


def load_adult(path: str | Path) -> pd.DataFrame:
    """Read a canonical-format census file into a raw table.

    Accepts the concatenation of the original partition files: fields
    separated by commas (with optional surrounding whitespace), ``?`` for
    missing values, blank lines and ``|``-prefixed banner lines skipped,
    and income labels optionally carrying the test partition's trailing
    period (preserved here; stripped by :func:`preprocess`).

    Raises:
        DataError: if the file is missing, contains no records, has a row
            with the wrong number of fields, or a numeric field that does
            not parse; messages name the 1-based line and the column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"census file not found: {path}")
    rows: list[list] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != len(RAW_COLUMNS):
                raise DataError(
                    f"line {lineno}: expected {len(RAW_COLUMNS)} fields, "
                    f"found {len(fields)}"
                )
            row: list = []
            for col, value in zip(RAW_COLUMNS, fields):
                if col in _NUMERIC_RAW:
                    try:
                        row.append(int(value))
                    except ValueError:
                        raise DataError(
                            f"line {lineno}, column {col!r}: "
                            f"cannot parse {value!r} as an integer"
                        ) from None
                else:
                    row.append(value)
            rows.append(row)
    if not rows:
        raise DataError(f"no records in census file: {path}")
    return pd.DataFrame(rows, columns=list(RAW_COLUMNS))


def _digest(frame: pd.DataFrame) -> str:
    payload = frame.to_csv(index=False).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def preprocess(raw: pd.DataFrame | BaseDataset) -> BaseDataset:
    """Clean a raw census table into the simulator's base cohort.

    Drops every row containing a ``?`` field, drops the sampling-weight
    column, folds capital gain and loss into the signed ``capital-net``,
    binarizes income (trailing test-partition periods stripped) and
    collapses the three ``Married-*`` categories into ``Married``.
    Passing an already-cleaned table (or its :class:`BaseDataset`) is a
    no-op apart from revalidation, so the operation is idempotent.

    Raises:
        DataError: if no complete rows remain, or if education and
            education-num do not map one-to-one.
    """
    if isinstance(raw, BaseDataset):
        raw = raw.frame
    frame = raw.copy()

    object_cols = [c for c in frame.columns if frame[c].dtype == object]
    if object_cols:
        missing_mask = np.zeros(len(frame), dtype=bool)
        for c in object_cols:
            missing_mask |= frame[c].to_numpy() == "?"
    else:
        missing_mask = np.zeros(len(frame), dtype=bool)
    n_raw = len(frame)
    frame = frame.loc[~missing_mask].reset_index(drop=True)
    n_dropped = int(missing_mask.sum())
    if frame.empty:
        raise DataError("no records remain after dropping rows with missing values")

    if "fnlwgt" in frame.columns:
        frame = frame.drop(columns=["fnlwgt"])
    if "capital-net" not in frame.columns:
        frame["capital-net"] = frame["capital-gain"] - frame["capital-loss"]
        frame = frame.drop(columns=["capital-gain", "capital-loss"])

    income = frame["income"].astype(str).str.rstrip(".")
    bad = ~income.isin(("<=50K", ">50K"))
    if bad.any():
        first = income[bad].iloc[0]
        raise DataError(f"unrecognized income label {first!r}")
    frame["income"] = income

    frame["marital-status"] = frame["marital-status"].map(
        lambda v: "Married" if v in _MARRIED_VARIANTS else v
    )

    mapping = frame.groupby("education")["education-num"].agg(["min", "max"])
    if (mapping["min"] != mapping["max"]).any():
        bad_cat = mapping.index[(mapping["min"] != mapping["max"]).to_numpy()][0]
        raise DataError(
            f"education {bad_cat!r} maps to multiple education-num values"
        )

    frame = frame[list(CLEAN_COLUMNS)].reset_index(drop=True)
    frame["capital-net"] = frame["capital-net"].astype(float)
    frame["age"] = frame["age"].astype(float)
    frame["hours-per-week"] = frame["hours-per-week"].astype(float)
    frame["education-num"] = frame["education-num"].astype(float)

    schema: list[VariableSchema] = []
    edu_order = tuple(mapping["min"].sort_values().index)
    for name in CLEAN_COLUMNS:
        if name in _CLEAN_CONTINUOUS:
            schema.append(VariableSchema(name, "continuous"))
        elif name == "education":
            schema.append(VariableSchema(name, "categorical", edu_order))
        elif name == "income":
            schema.append(VariableSchema(name, "categorical", ("<=50K", ">50K")))
        else:
            cats = tuple(sorted(frame[name].unique()))
            schema.append(VariableSchema(name, "categorical", cats))

    return BaseDataset(
        frame=frame,
        schema=tuple(schema),
        n_raw=n_raw,
        n_dropped_missing=n_dropped,
        source_digest=_digest(frame),
    )


@dataclass(frozen=True)
class CohortStats:
    """Long-form summary table: one row per category or per summary stat."""

    table: pd.DataFrame  # columns: variable, category_or_stat, value
    n: int

    def value(self, variable: str, key: str) -> float:
        t = self.table
        hit = t[(t["variable"] == variable) & (t["category_or_stat"] == key)]
        if hit.empty:
            raise DataError(f"no cohort statistic {key!r} for variable {variable!r}")
        return float(hit["value"].iloc[0])


def cohort_stats(
    frame: pd.DataFrame, schema: tuple[VariableSchema, ...]
) -> CohortStats:
    """Counts and rates for categoricals, mean and IQR for continuous.

    The derived ``income>50K`` rate is always included: from the binary
    label when income is categorical, from the 50 000 threshold when the
    cohort carries simulated continuous incomes.
    """
    n = len(frame)
    if n == 0:
        raise DataError("cannot summarize an empty cohort")
    rows: list[tuple[str, str, float]] = []
    for var in schema:
        if var.name not in frame.columns:
            continue
        col = frame[var.name]
        if var.kind == "categorical":
            counts = col.value_counts()
            for cat in var.categories:
                c = int(counts.get(cat, 0))
                rows.append((var.name, f"count[{cat}]", float(c)))
                rows.append((var.name, f"rate[{cat}]", c / n))
        else:
            values = col.to_numpy(dtype=float)
            rows.append((var.name, "mean", float(np.mean(values))))
            rows.append((var.name, "q25", float(np.quantile(values, 0.25))))
            rows.append((var.name, "q75", float(np.quantile(values, 0.75))))
    if "income" in frame.columns:
        col = frame["income"]
        if col.dtype == object:
            rate = float((col == ">50K").mean())
        else:
            rate = float((col.to_numpy(dtype=float) > 50_000.0).mean())
        rows.append(("income>50K", "rate", rate))
    table = pd.DataFrame(rows, columns=["variable", "category_or_stat", "value"])
    return CohortStats(table=table, n=n)


def compare_cohorts(sim: CohortStats, adult: CohortStats) -> pd.DataFrame:
    """Side-by-side comparison table (variable, category_or_stat,
    value_sim, value_adult); keys present in only one cohort get NaN."""
    merged = pd.merge(
        sim.table.rename(columns={"value": "value_sim"}),
        adult.table.rename(columns={"value": "value_adult"}),
        on=["variable", "category_or_stat"],
        how="outer",
        sort=False,
    )
    return merged.reset_index(drop=True)
