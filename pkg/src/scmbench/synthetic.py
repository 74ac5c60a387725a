"""Deterministic synthetic census file generator.

Produces a file in the canonical Adult distribution format (train and
test partitions concatenated, ``, `` separators, ``?`` missing markers,
trailing periods on test-partition income labels) whose *complete* rows
reproduce the published cleaned-cohort category counts exactly, with
hand-designed joint structure: relationship is almost determined by
marital status and sex, income rises with education, age, hours and
capital, hours depend on occupation, and so on.

This exists because the original census files cannot be redistributed
with the package; the generated surrogate lets the full pipeline (and
its test suite) run end to end without network access.  Point the tools
at a real concatenated Adult file to reproduce the original cohort.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

__all__ = ["generate_census", "write_census_file", "COMPLETE_COUNTS"]

N_COMPLETE = 30_162
N_RAW = 48_842
N_TEST = 16_281

# Cleaned-cohort category counts (n = 30 162).
COMPLETE_COUNTS: dict[str, dict[str, int]] = {
    "native-country": {
        "United-States": 27504, "Mexico": 610, "Philippines": 188, "Germany": 128,
        "Puerto-Rico": 109, "Canada": 107, "El-Salvador": 100, "India": 100,
        "Cuba": 92, "England": 86, "Jamaica": 80, "South": 71, "Italy": 68,
        "China": 68, "Dominican-Republic": 67, "Vietnam": 64, "Guatemala": 63,
        "Japan": 59, "Columbia": 56, "Poland": 56, "Taiwan": 42, "Iran": 42,
        "Haiti": 42, "Portugal": 34, "Nicaragua": 33, "Peru": 30, "Greece": 29,
        "France": 27, "Ecuador": 27, "Ireland": 24, "Hong": 19, "Cambodia": 18,
        "Trinadad&Tobago": 18, "Thailand": 17, "Laos": 17, "Yugoslavia": 16,
        "Outlying-US(Guam-USVI-etc)": 14, "Hungary": 13, "Honduras": 12,
        "Scotland": 11, "Holand-Netherlands": 1,
    },
    "sex": {"Male": 20380, "Female": 9782},
    "race": {
        "White": 25933, "Black": 2817, "Asian-Pac-Islander": 895,
        "Amer-Indian-Eskimo": 286, "Other": 231,
    },
    "education": {
        "Preschool": 45, "1st-4th": 151, "5th-6th": 288, "7th-8th": 557,
        "9th": 455, "10th": 820, "11th": 1048, "12th": 377, "HS-grad": 9840,
        "Some-college": 6678, "Assoc-voc": 1307, "Assoc-acdm": 1008,
        "Bachelors": 5044, "Masters": 1627, "Prof-school": 542, "Doctorate": 375,
    },
    "workclass": {
        "Private": 22286, "Self-emp-not-inc": 2499, "Local-gov": 2067,
        "State-gov": 1279, "Self-emp-inc": 1074, "Federal-gov": 943,
        "Without-pay": 14,
    },
    "occupation": {
        "Prof-specialty": 4038, "Craft-repair": 4030, "Exec-managerial": 3992,
        "Adm-clerical": 3721, "Sales": 3584, "Other-service": 3212,
        "Machine-op-inspct": 1966, "Transport-moving": 1572,
        "Handlers-cleaners": 1350, "Farming-fishing": 989, "Tech-support": 912,
        "Protective-serv": 644, "Priv-house-serv": 143, "Armed-Forces": 9,
    },
    "marital-status": {
        "Married": 14456, "Never-married": 9726, "Divorced": 4214,
        "Separated": 939, "Widowed": 827,
    },
    "relationship": {
        "Husband": 12463, "Not-in-family": 7726, "Own-child": 4466,
        "Unmarried": 3212, "Wife": 1406, "Other-relative": 889,
    },
}

N_INCOME_HIGH = 7508

# education -> education-num, the canonical ordinal coding.
EDUCATION_NUM: dict[str, int] = {
    "Preschool": 1, "1st-4th": 2, "5th-6th": 3, "7th-8th": 4, "9th": 5,
    "10th": 6, "11th": 7, "12th": 8, "HS-grad": 9, "Some-college": 10,
    "Assoc-voc": 11, "Assoc-acdm": 12, "Bachelors": 13, "Masters": 14,
    "Prof-school": 15, "Doctorate": 16,
}

# Raw files carry three Married-* variants that preprocessing collapses.
_MARRIED_SPLIT = {"Married-civ-spouse": 14065, "Married-spouse-absent": 370,
                  "Married-AF-spouse": 21}

RAW_HEADER = (
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
)


def _exact_labels(rng: np.random.Generator, counts: Mapping[str, int]) -> NDArray:
    labels = np.repeat(
        np.array(list(counts), dtype=object), np.fromiter(counts.values(), dtype=int)
    )
    rng.shuffle(labels)
    return labels


def _quota_assign(
    affinity: NDArray[np.float64], quotas: Sequence[int]
) -> NDArray[np.intp]:
    """Assign each row to a category with exact per-category counts.

    Rows are processed in decreasing order of preference confidence (gap
    between best and second-best affinity) and greedily take their most
    preferred category that still has quota left.
    """
    n, k = affinity.shape
    if sum(quotas) != n:
        raise ValueError("quotas must sum to the number of rows")
    top2 = np.partition(affinity, k - 2, axis=1)
    confidence = top2[:, -1] - top2[:, -2]
    order = np.argsort(-confidence, kind="stable")
    preference = np.argsort(-affinity, axis=1, kind="stable")
    remaining = np.asarray(quotas, dtype=np.int64).copy()
    out = np.full(n, -1, dtype=np.intp)
    for i in order:
        for c in preference[i]:
            if remaining[c] > 0:
                out[i] = c
                remaining[c] -= 1
                break
    return out


def _gumbel(rng: np.random.Generator, n: int) -> NDArray[np.float64]:
    return -np.log(-np.log(rng.uniform(1e-12, 1.0, size=n)))


def generate_census(seed: int = 2024) -> dict[str, NDArray]:
    """Build the complete-cohort columns (cleaned vocabulary, 7-way raw
    marital labels added separately by the file writer)."""
    rng = np.random.Generator(np.random.Philox(seed))
    n = N_COMPLETE

    sex = _exact_labels(rng, COMPLETE_COUNTS["sex"])
    male = (sex == "Male").astype(float)
    race = _exact_labels(rng, COMPLETE_COUNTS["race"])
    country = _exact_labels(rng, COMPLETE_COUNTS["native-country"])

    # Age: mixture biased toward young adults; mean ~38.4, IQR ~(28, 47).
    u = rng.uniform(size=n)
    age = np.where(
        u < 0.50, rng.uniform(18, 36, size=n),
        np.where(u < 0.86, rng.uniform(30, 54, size=n), rng.uniform(50, 88, size=n)),
    )
    age = np.round(age)

    # Education: rank-assigned along a latent score so that counts are
    # exact; adults get a mild boost over teenagers.
    edu_names = list(COMPLETE_COUNTS["education"])  # already in ordinal order
    edu_score = rng.normal(size=n) + 0.35 * np.clip((age - 17.0) / 8.0, 0.0, 1.0)
    edu_rank = np.argsort(np.argsort(edu_score, kind="stable"), kind="stable")
    boundaries = np.cumsum([COMPLETE_COUNTS["education"][c] for c in edu_names])
    education = np.array(edu_names, dtype=object)[
        np.searchsorted(boundaries, edu_rank, side="right")
    ]
    edu_num = np.array([EDUCATION_NUM[c] for c in education], dtype=float)

    # Marital status: married concentrates among middle-aged men (the
    # cohort's Wife count is far below its Husband count).
    mar_names = list(COMPLETE_COUNTS["marital-status"])
    hump = -0.002 * (age - 47.0) ** 2
    affinity = np.column_stack([
        2.45 * male + hump + 0.35,                                # Married
        2.6 - 0.115 * (age - 17.0),                               # Never-married
        -0.7 + 0.35 * (1 - male) + 0.5 * hump + 0.02 * age,       # Divorced
        -2.1 + 0.3 * (1 - male) + 0.01 * age,                     # Separated
        -7.0 + 0.105 * age + 0.9 * (1 - male),                    # Widowed
    ])
    affinity += np.column_stack([_gumbel(rng, n) for _ in mar_names])
    mar_order = ["Married", "Never-married", "Divorced", "Separated", "Widowed"]
    codes = _quota_assign(
        affinity, [COMPLETE_COUNTS["marital-status"][c] for c in mar_order]
    )
    marital = np.array(mar_order, dtype=object)[codes]

    # Relationship: Husband/Wife are pinned to married men/women.
    rel_order = ["Husband", "Wife", "Own-child", "Unmarried", "Not-in-family",
                 "Other-relative"]
    married = (marital == "Married").astype(float)
    never = (marital == "Never-married").astype(float)
    broken = np.isin(marital, ("Divorced", "Separated", "Widowed")).astype(float)
    rel_aff = np.column_stack([
        12.0 * married * male - 12.0 * (1 - married * male),
        12.0 * married * (1 - male) - 12.0 * (1 - married * (1 - male)),
        2.0 * never * np.clip((27.0 - age) / 6.0, -2.0, 2.5),
        1.2 * broken + 0.4 * (1 - male) - 3.0 * married,
        0.8 * (1 - married) - 2.0 * married,
        0.2 - 1.5 * married,
    ])
    rel_aff += 0.8 * np.column_stack([_gumbel(rng, n) for _ in rel_order])
    rel_codes = _quota_assign(
        rel_aff, [COMPLETE_COUNTS["relationship"][c] for c in rel_order]
    )
    relationship = np.array(rel_order, dtype=object)[rel_codes]

    # Workclass: government and self-employment skew educated/older.
    wc_order = ["Private", "Self-emp-not-inc", "Local-gov", "State-gov",
                "Self-emp-inc", "Federal-gov", "Without-pay"]
    higher_ed = (edu_num >= 13).astype(float)
    some_ed = (edu_num >= 10).astype(float)
    wc_aff = np.column_stack([
        np.full(n, 1.45),
        -0.9 + 0.45 * male + 0.02 * np.clip(age - 30, 0, 30),
        -1.3 + 0.7 * some_ed,
        -1.7 + 0.8 * some_ed,
        -2.1 + 0.8 * higher_ed + 0.4 * male + 0.01 * np.clip(age - 35, 0, 30),
        -1.9 + 0.8 * some_ed,
        np.full(n, -6.0),
    ])
    wc_aff += np.column_stack([_gumbel(rng, n) for _ in wc_order])
    wc_codes = _quota_assign(wc_aff, [COMPLETE_COUNTS["workclass"][c] for c in wc_order])
    workclass = np.array(wc_order, dtype=object)[wc_codes]

    # Occupation: driven by education, sex, and self-employment.
    occ_order = ["Prof-specialty", "Craft-repair", "Exec-managerial",
                 "Adm-clerical", "Sales", "Other-service", "Machine-op-inspct",
                 "Transport-moving", "Handlers-cleaners", "Farming-fishing",
                 "Tech-support", "Protective-serv", "Priv-house-serv",
                 "Armed-Forces"]
    low_ed = (edu_num <= 9).astype(float)
    self_emp = np.isin(workclass, ("Self-emp-not-inc", "Self-emp-inc")).astype(float)
    occ_aff = np.column_stack([
        -0.6 + 1.6 * higher_ed + 0.9 * (edu_num >= 14),
        -0.3 + 1.1 * male + 0.6 * low_ed - 0.8 * higher_ed,
        -0.5 + 1.0 * higher_ed + 0.35 * some_ed + 0.2 * male,
        -0.2 + 1.1 * (1 - male) - 0.6 * higher_ed,
        0.0 + 0.3 * self_emp,
        -0.2 + 0.5 * low_ed + 0.35 * (1 - male) - 0.8 * higher_ed,
        -0.8 + 0.6 * male + 0.7 * low_ed - 1.2 * higher_ed,
        -1.0 + 0.9 * male + 0.5 * low_ed - 1.2 * higher_ed,
        -1.1 + 0.7 * male + 0.8 * low_ed - 1.2 * higher_ed + 0.02 * (30 - np.minimum(age, 30)),
        -1.6 + 0.6 * male + 0.5 * low_ed + 0.8 * self_emp,
        -1.3 + 0.7 * some_ed,
        -1.9 + 0.9 * male,
        -3.2 + 1.6 * (1 - male) + 0.8 * low_ed,
        -6.0 + 0.8 * male - 0.05 * np.abs(age - 22),
    ])
    occ_aff += np.column_stack([_gumbel(rng, n) for _ in occ_order])
    occ_codes = _quota_assign(occ_aff, [COMPLETE_COUNTS["occupation"][c] for c in occ_order])
    occupation = np.array(occ_order, dtype=object)[occ_codes]

    # Hours: heavily spiked at 40 with occupation-driven spread.
    long_occ = np.isin(occupation, ("Exec-managerial", "Farming-fishing",
                                    "Transport-moving", "Prof-specialty"))
    part_time = ((relationship == "Own-child") & (age < 24)) | (
        occupation == "Priv-house-serv"
    ) | (workclass == "Without-pay")
    u = rng.uniform(size=n)
    hours = np.full(n, 40.0)
    spread_long = (long_occ | (self_emp > 0)) & ~part_time
    hours = np.where(
        spread_long & (u < 0.62),
        42.0 + np.round(rng.exponential(6.5, size=n)),
        hours,
    )
    casual = (~spread_long) & ~part_time
    hours = np.where(casual & (u < 0.13), 44.0 + np.round(rng.exponential(4.0, size=n)), hours)
    hours = np.where(casual & (u > 0.90), np.round(rng.uniform(20, 38, size=n)), hours)
    hours = np.where(part_time, np.round(rng.uniform(8, 35, size=n)), hours)
    hours = np.clip(hours, 1, 99)

    # Capital: mostly zero; gains skew educated/older, losses are smaller.
    cap_score = (
        0.9 * higher_ed + 0.5 * married + 0.02 * np.clip(age - 30, 0, 35)
        + 0.4 * (workclass == "Self-emp-inc") + rng.normal(scale=1.0, size=n)
    )
    p_gain = 1.0 / (1.0 + np.exp(-(cap_score - 3.42)))
    has_gain = rng.uniform(size=n) < p_gain
    has_loss = (~has_gain) & (rng.uniform(size=n) < 0.042 * (1 + 0.6 * higher_ed))
    gains = np.where(has_gain, np.round(rng.lognormal(9.0, 0.9, size=n) / 50) * 50, 0.0)
    gains = np.clip(gains, 0, 99_999)
    losses = np.where(has_loss, np.round(rng.lognormal(7.45, 0.35, size=n) / 10) * 10, 0.0)
    capital_net = gains - losses

    # Income: top-scored rows get the >50K label, counts exact.
    occ_bonus = np.select(
        [np.isin(occupation, ("Exec-managerial",)),
         np.isin(occupation, ("Prof-specialty",)),
         np.isin(occupation, ("Sales", "Tech-support", "Protective-serv")),
         np.isin(occupation, ("Other-service", "Handlers-cleaners",
                              "Priv-house-serv", "Machine-op-inspct"))],
        [1.0, 0.9, 0.35, -0.7],
        default=0.0,
    )
    wc_bonus = np.select(
        [workclass == "Self-emp-inc", workclass == "Federal-gov",
         workclass == "Without-pay"],
        [0.9, 0.4, -3.0],
        default=0.0,
    )
    inc_score = (
        0.62 * (edu_num - 10.0)
        + 1.3 - 0.00215 * (age - 46.0) ** 2
        + 1.55 * married
        + 0.55 * male
        + 0.034 * (hours - 40.0)
        + occ_bonus
        + wc_bonus
        + 0.8 * (capital_net > 0)
        + 1.15 * _gumbel(rng, n)
    )
    threshold = np.partition(inc_score, n - N_INCOME_HIGH)[n - N_INCOME_HIGH]
    income = np.where(inc_score >= threshold, ">50K", "<=50K").astype(object)
    # Exact count even under (improbable) score ties.
    excess = int((income == ">50K").sum()) - N_INCOME_HIGH
    if excess > 0:
        ties = np.flatnonzero((inc_score == threshold) & (income == ">50K"))
        income[ties[:excess]] = "<=50K"

    return {
        "age": age,
        "workclass": workclass,
        "education": education,
        "education-num": edu_num,
        "marital-status": marital,
        "occupation": occupation,
        "relationship": relationship,
        "race": race,
        "sex": sex,
        "capital-gain": gains,
        "capital-loss": losses,
        "hours-per-week": hours,
        "native-country": country,
        "income": income,
    }


def write_census_file(path: str | Path, seed: int = 2024) -> Path:
    """Write the full surrogate file: 48 842 raw rows (30 162 complete,
    the rest with ``?`` fields), split into canonical train and test
    partitions with the test banner line and trailing label periods."""
    path = Path(path)
    rng = np.random.Generator(np.random.Philox(seed + 1))
    cols = generate_census(seed)
    n = N_COMPLETE

    # Expand marital status to the 7 raw categories.  Spouse-absent rows
    # are drawn from married people not listed as Husband/Wife.
    marital_raw = cols["marital-status"].copy()
    married_idx = np.flatnonzero(marital_raw == "Married")
    spouse_in_house = np.isin(cols["relationship"][married_idx], ("Husband", "Wife"))
    absent_pool = married_idx[~spouse_in_house]
    af_pool = married_idx[spouse_in_house & (cols["age"][married_idx] < 35)]
    absent = rng.choice(absent_pool, size=_MARRIED_SPLIT["Married-spouse-absent"],
                        replace=False)
    af = rng.choice(af_pool, size=_MARRIED_SPLIT["Married-AF-spouse"], replace=False)
    marital_raw[married_idx] = "Married-civ-spouse"
    marital_raw[absent] = "Married-spouse-absent"
    marital_raw[af] = "Married-AF-spouse"

    fnlwgt = rng.integers(12_000, 1_400_000, size=N_RAW)

    # Assemble complete raw rows as string fields.
    complete_rows: list[list[str]] = []
    for j in range(n):
        complete_rows.append([
            str(int(cols["age"][j])),
            str(cols["workclass"][j]),
            str(int(fnlwgt[j])),
            str(cols["education"][j]),
            str(int(cols["education-num"][j])),
            str(marital_raw[j]),
            str(cols["occupation"][j]),
            str(cols["relationship"][j]),
            str(cols["race"][j]),
            str(cols["sex"][j]),
            str(int(cols["capital-gain"][j])),
            str(int(cols["capital-loss"][j])),
            str(int(cols["hours-per-week"][j])),
            str(cols["native-country"][j]),
            str(cols["income"][j]),
        ])

    # Incomplete rows: clones of complete rows with masked fields.
    n_incomplete = N_RAW - n
    base = rng.integers(0, n, size=n_incomplete)
    pattern = rng.uniform(size=n_incomplete)
    incomplete_rows: list[list[str]] = []
    for k in range(n_incomplete):
        row = list(complete_rows[int(base[k])])
        row[2] = str(int(fnlwgt[n + k]))
        if pattern[k] < 0.62:
            row[1] = "?"     # workclass
            row[6] = "?"     # occupation
        elif pattern[k] < 0.86:
            row[13] = "?"    # native-country
        else:
            row[1] = "?"
            row[6] = "?"
            row[13] = "?"
        incomplete_rows.append(row)

    all_rows = complete_rows + incomplete_rows
    order = rng.permutation(len(all_rows))
    shuffled = [all_rows[i] for i in order]
    train, test = shuffled[: N_RAW - N_TEST], shuffled[N_RAW - N_TEST:]

    with open(path, "w", encoding="utf-8") as fh:
        for row in train:
            fh.write(", ".join(row) + "\n")
        fh.write("|1x3 Cross validator\n")
        for row in test:
            fh.write(", ".join(row[:-1] + [row[-1] + "."]) + "\n")
    return path
