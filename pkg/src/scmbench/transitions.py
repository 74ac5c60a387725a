"""Hand-designed time-homogeneous transition mechanisms.

Each rule maps (previous state, partially built current state, keyed
noise) to the variable's next value, vectorized over subjects.  Rules
that fall back to "draw a fresh value" delegate to the corresponding
initial-state sampler evaluated on current-time inputs, so the initial
and transition layers stay consistent by construction.

Noise discipline: sampler-internal draws use slots below
``noise.RULE_SLOT``; rule-level coins and perturbations use slots at or
above it.  Every draw is keyed by (subject, variable, time) only, which
is what makes coupled counterfactual arms exactly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import ConfigError
from .noise import RULE_SLOT, NoiseStream
from .samplers import (
    STUDIES_DAY, STUDIES_EVENING, STUDIES_FULL,
    CategoricalSampler, ContinuousSampler, IncomeInitialSampler,
    StudiesInitialSampler, ZeroInflatedSampler, WORKCLASS_UNPAID,
)

__all__ = [
    "AgeTransition", "ConstantTransition", "EducationTransition",
    "StayOrRedrawTransition", "MaritalTransition", "HoursTransition",
    "CapitalTransition", "StudiesTransition", "IncomeTransition",
]

MAX_WEEK_HOURS = 168.0


def _check_probability(value: float, what: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{what} must lie in [0, 1], got {value!r}")
    return value


@dataclass
class AgeTransition:
    variable: str = "age"
    parents_curr: tuple[str, ...] = ()

    @property
    def parents_prev(self) -> tuple[str, ...]:
        return (self.variable,)

    def apply(self, prev: pd.DataFrame, curr: pd.DataFrame,
              stream: NoiseStream, t: int,
              subjects: NDArray[np.int64]) -> NDArray[np.float64]:
        return np.asarray(prev[self.variable], dtype=float) + 1.0


@dataclass
class ConstantTransition:
    variable: str
    parents_curr: tuple[str, ...] = ()

    @property
    def parents_prev(self) -> tuple[str, ...]:
        return (self.variable,)

    def apply(self, prev: pd.DataFrame, curr: pd.DataFrame,
              stream: NoiseStream, t: int,
              subjects: NDArray[np.int64]) -> NDArray:
        return np.asarray(prev[self.variable]).copy()


@dataclass
class EducationTransition:
    """Advance one ordinal level with a probability set by the previous
    year's study enrollment, capped at the top level."""

    levels: tuple[str, ...]
    advance_prob: Mapping[str, float]
    variable: str = "education"
    parents_curr: tuple[str, ...] = ()
    parents_prev: tuple[str, ...] = ("education", "studies")

    def __post_init__(self):
        for cls, p in self.advance_prob.items():
            _check_probability(p, f"education advance probability for {cls!r}")

    def apply(self, prev, curr, stream, t, subjects):
        rank = {cat: i for i, cat in enumerate(self.levels)}
        level = np.array([rank[v] for v in prev["education"]], dtype=np.int64)
        p = np.array(
            [self.advance_prob.get(s, 0.0) for s in prev["studies"]],
            dtype=float,
        )
        u = stream.uniform(self.variable, t, RULE_SLOT, subjects)
        advanced = np.minimum(level + (u < p), len(self.levels) - 1)
        return np.asarray(self.levels, dtype=object)[advanced]


@dataclass
class StayOrRedrawTransition:
    """Keep the previous category with probability ``p_stay`` (possibly
    modified), otherwise draw afresh from the initial sampler on
    current-time inputs."""

    variable: str
    initial: CategoricalSampler
    p_stay: float
    forced_redraw_value: str | None = None     # e.g. unpaid workclass
    study_stay_factor: float | None = None     # occupation under full-time
    extra_parents_prev: tuple[str, ...] = ()

    def __post_init__(self):
        self.p_stay = _check_probability(self.p_stay, f"{self.variable} p_stay")
        if self.study_stay_factor is not None:
            _check_probability(
                self.study_stay_factor, f"{self.variable} study_stay_factor"
            )

    @property
    def parents_curr(self) -> tuple[str, ...]:
        return self.initial.parents

    @property
    def parents_prev(self) -> tuple[str, ...]:
        return (self.variable,) + self.extra_parents_prev

    def apply(self, prev, curr, stream, t, subjects):
        n = len(subjects)
        p_eff = np.full(n, self.p_stay)
        if self.study_stay_factor is not None:
            full = np.asarray(prev["studies"]) == STUDIES_FULL
            p_eff = np.where(full, self.p_stay * self.study_stay_factor, p_eff)
        previous = np.asarray(prev[self.variable])
        if self.forced_redraw_value is not None:
            p_eff = np.where(previous == self.forced_redraw_value, 0.0, p_eff)
        coin = stream.uniform(self.variable, t, RULE_SLOT, subjects)
        stay = coin < p_eff
        codes = self.initial.sample(curr, stream, t, subjects)
        fresh = np.asarray(self.initial.classes, dtype=object)[codes]
        return np.where(stay, previous, fresh)


@dataclass
class MaritalTransition:
    """Markov transition over marital categories with structural zeros,
    an age effect and a study effect on the chance of marrying."""

    classes: tuple[str, ...]
    matrix: NDArray[np.float64]          # rows: previous class
    married_label: str = "Married"
    never_label: str = "Never-married"
    divorced_label: str = "Divorced"
    marriage_study_factor: float = 0.5
    marriage_age_slope: float = -0.25    # per decade away from 40
    variable: str = "marital-status"
    parents_curr: tuple[str, ...] = ("age",)
    parents_prev: tuple[str, ...] = ("marital-status", "studies")

    def __post_init__(self):
        k = len(self.classes)
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (k, k):
            raise ConfigError(
                f"marital matrix must be {k}x{k}, got {m.shape}"
            )
        if np.any(m < 0):
            raise ConfigError("marital matrix entries must be non-negative")
        sums = m.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-9):
            bad = self.classes[int(np.argmax(np.abs(sums - 1.0)))]
            raise ConfigError(
                f"marital matrix row {bad!r} sums to {sums.max():.6f}, not 1"
            )
        idx = {c: i for i, c in enumerate(self.classes)}
        for label in (self.married_label, self.never_label, self.divorced_label):
            if label not in idx:
                raise ConfigError(f"marital class {label!r} missing from schema")
        never, divorced = idx[self.never_label], idx[self.divorced_label]
        if m[never, divorced] != 0.0:
            raise ConfigError(
                "marital matrix must keep Never-married -> Divorced at 0"
            )
        for i, c in enumerate(self.classes):
            if i != never and m[i, never] != 0.0:
                raise ConfigError(
                    f"marital matrix must keep {c!r} -> Never-married at 0"
                )
        _check_probability(self.marriage_study_factor, "marriage_study_factor")
        self.matrix = m

    def apply(self, prev, curr, stream, t, subjects):
        idx = {c: i for i, c in enumerate(self.classes)}
        prev_code = np.array([idx[v] for v in prev["marital-status"]])
        probs = self.matrix[prev_code]
        married_col = idx[self.married_label]
        not_married = prev_code != married_col
        age = np.asarray(curr["age"], dtype=float)
        age_factor = np.clip(
            1.0 + self.marriage_age_slope * (age - 40.0) / 10.0, 0.25, 1.75
        )
        marry_scale = np.where(not_married, age_factor, 1.0)
        full = np.asarray(prev["studies"]) == STUDIES_FULL
        marry_scale = np.where(
            not_married & full, marry_scale * self.marriage_study_factor,
            marry_scale,
        )
        probs[:, married_col] *= marry_scale
        probs /= probs.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            logits = np.log(probs)
        gumbel = stream.gumbel(self.variable, t, subjects, len(self.classes))
        codes = np.argmax(logits + gumbel, axis=1)
        return np.asarray(self.classes, dtype=object)[codes]


@dataclass
class HoursTransition:
    """Convex combination of the previous value and a fresh draw from
    the initial sampler, clipped to a physical week."""

    initial: ContinuousSampler
    alpha: float = 0.9
    variable: str = "hours-per-week"
    parents_prev: tuple[str, ...] = ("hours-per-week",)

    def __post_init__(self):
        self.alpha = _check_probability(self.alpha, "hours alpha")

    @property
    def parents_curr(self) -> tuple[str, ...]:
        return self.initial.parents

    def apply(self, prev, curr, stream, t, subjects):
        fresh = self.initial.sample(curr, stream, t, subjects)
        mixed = (self.alpha * np.asarray(prev["hours-per-week"], dtype=float)
                 + (1.0 - self.alpha) * fresh)
        return np.clip(mixed, 0.0, MAX_WEEK_HOURS)


@dataclass
class CapitalTransition:
    """Zero-inflated update: having capital last year raises the chance
    of having it again; kept values are noisy perturbations of the
    previous amount, otherwise the magnitude model draws afresh."""

    initial: ZeroInflatedSampler
    p_nonzero_given_prev: float = 0.8
    p_perturb: float = 0.8
    perturb_scale: float = 0.2           # relative to the previous amount
    variable: str = "capital-net"
    parents_prev: tuple[str, ...] = ("capital-net",)

    def __post_init__(self):
        _check_probability(self.p_nonzero_given_prev, "capital p_nonzero_given_prev")
        _check_probability(self.p_perturb, "capital p_perturb")
        if self.perturb_scale < 0:
            raise ConfigError("capital perturb_scale must be non-negative")

    @property
    def parents_curr(self) -> tuple[str, ...]:
        return self.initial.parents

    def apply(self, prev, curr, stream, t, subjects):
        prev_cap = np.asarray(prev["capital-net"], dtype=float)
        had = prev_cap != 0.0
        p = np.where(had, self.p_nonzero_given_prev, self.initial.p_nonzero(curr))
        gate = stream.uniform(self.variable, t, 0, subjects) < p
        eps = stream.normal(self.variable, t, 1, subjects)
        fresh = (self.initial.magnitude.mean(curr)
                 + self.initial.magnitude.noise_scale * eps)
        keep_coin = stream.uniform(self.variable, t, RULE_SLOT, subjects)
        perturb_eps = stream.normal(self.variable, t, RULE_SLOT + 1, subjects)
        perturbed = prev_cap * (1.0 + self.perturb_scale * perturb_eps)
        value = np.where(had & (keep_coin < self.p_perturb), perturbed, fresh)
        return np.where(gate, value, 0.0)


@dataclass
class StudiesTransition:
    """The initial enrollment logits plus three modifications: a bonus
    for continuing an unfinished full-time program, a penalty on
    starting full-time with high income, and a hard zero on full-time
    study at the terminal education level."""

    initial: StudiesInitialSampler
    education_levels: tuple[str, ...]
    continue_bonus: float = 4.0
    high_income_penalty: float = -2.0
    income_threshold: float = 50_000.0
    terminal_ranks: tuple[int, ...] = (9, 13, 14, 15, 16)
    variable: str = "studies"
    parents_prev: tuple[str, ...] = ("studies", "income")

    def __post_init__(self):
        if self.high_income_penalty > 0:
            raise ConfigError("high_income_penalty must be non-positive")
        top = len(self.education_levels)
        for r in self.terminal_ranks:
            if not 1 <= r <= top:
                raise ConfigError(
                    f"terminal rank {r} outside [1, {top}]"
                )

    @property
    def parents_curr(self) -> tuple[str, ...]:
        return self.initial.parents

    def apply(self, prev, curr, stream, t, subjects):
        logits = self.initial.logits(curr)
        classes = self.initial.classes
        full_col = classes.index(STUDIES_FULL)
        rank = {cat: i + 1 for i, cat in enumerate(self.education_levels)}
        edu_rank = np.array([rank[v] for v in curr["education"]])
        unfinished = ~np.isin(edu_rank, self.terminal_ranks)
        was_full = np.asarray(prev["studies"]) == STUDIES_FULL
        logits[:, full_col] += np.where(
            was_full & unfinished, self.continue_bonus, 0.0
        )
        high_income = np.asarray(prev["income"], dtype=float) > self.income_threshold
        logits[:, full_col] += np.where(high_income, self.high_income_penalty, 0.0)
        doctorate = edu_rank == len(self.education_levels)
        logits[:, full_col] = np.where(doctorate, -np.inf, logits[:, full_col])
        gumbel = stream.gumbel(self.variable, t, subjects, len(classes))
        codes = np.argmax(logits + gumbel, axis=1)
        return np.asarray(classes, dtype=object)[codes]


@dataclass
class IncomeTransition:
    """Raise the previous income by a study-dependent random percentage,
    or resample from the initial income model when full-time studies
    just ended, the subject had no paid work, or income collapsed."""

    initial: IncomeInitialSampler
    raise_max: float = 0.06
    part_time_bonus: float = 0.04        # evening or day course last year
    completion_bonus: float = 0.10       # full-time finished this year
    resample_floor: float = 5_000.0
    variable: str = "income"
    parents_prev: tuple[str, ...] = ("income", "studies", "workclass")

    def __post_init__(self):
        if self.raise_max < 0 or self.part_time_bonus < 0 or self.completion_bonus < 0:
            raise ConfigError("raise parameters must be non-negative")

    @property
    def parents_curr(self) -> tuple[str, ...]:
        return self.initial.parents

    def apply(self, prev, curr, stream, t, subjects):
        inc_prev = np.asarray(prev["income"], dtype=float)
        stu_prev = np.asarray(prev["studies"])
        stu_curr = np.asarray(curr["studies"])
        ended_full = (stu_prev == STUDIES_FULL) & (stu_curr != STUDIES_FULL)
        unpaid_prev = np.asarray(prev["workclass"]) == WORKCLASS_UNPAID
        resample = ended_full | unpaid_prev | (inc_prev < self.resample_floor)

        # The initial sampler already applies the current-studies and
        # unpaid-work overrides, so both branches end at exact zeros.
        resampled = self.initial.sample(curr, stream, t, subjects)
        resampled = resampled * np.where(ended_full, 1.0 + self.completion_bonus, 1.0)

        u = stream.uniform(self.variable, t, RULE_SLOT, subjects)
        bonus = np.where(
            np.isin(stu_prev, (STUDIES_EVENING, STUDIES_DAY)),
            self.part_time_bonus, 0.0,
        )
        raised = inc_prev * (1.0 + u * self.raise_max + bonus)
        raised[np.asarray(stu_curr) == STUDIES_DAY] *= 0.8
        raised[np.asarray(stu_curr) == STUDIES_FULL] = 0.0
        out = np.where(resample, resampled, raised)
        return np.maximum(out, 0.0)
