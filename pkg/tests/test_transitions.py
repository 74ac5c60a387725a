"""Year-over-year transition rules, checked by arithmetic replay and
frequency estimates against their declared probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import pytest

from scmbench.errors import ConfigError
from scmbench.ingest import VariableSchema
from scmbench.noise import RULE_SLOT, NoiseStream
from scmbench.samplers import (
    STUDIES_CLASSES,
    STUDIES_FULL,
    build_studies_initial,
)
from scmbench.transitions import (
    MAX_WEEK_HOURS,
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

N = 100_000
SUBJECTS = np.arange(N, dtype=np.int64)


def _frames(n=N, **columns):
    """Identical prev/curr frames built from broadcastable columns."""
    frame = pd.DataFrame({k: np.resize(v, n) for k, v in columns.items()})
    return frame.copy(), frame.copy()


@dataclass
class StubCategorical:
    """Minimal stand-in for a fitted categorical initial sampler."""

    classes: tuple[str, ...]
    code: int = 0
    parents: tuple[str, ...] = ()
    calls: list = field(default_factory=list)

    def sample(self, frame, stream, t, subjects):
        self.calls.append(len(subjects))
        return np.full(len(subjects), self.code, dtype=np.int64)


@dataclass
class StubContinuous:
    value: float
    parents: tuple[str, ...] = ()

    def sample(self, frame, stream, t, subjects):
        return np.full(len(subjects), self.value)


@dataclass
class StubIncomeInitial:
    value: float
    parents: tuple[str, ...] = ()

    def sample(self, frame, stream, t, subjects):
        return np.full(len(subjects), self.value)


class TestAgeAndConstant:
    def test_age_advances_by_one_year(self):
        prev, curr = _frames(n=5, age=[18.0, 40.0, 90.5, 25.0, 33.0])
        result = AgeTransition().apply(prev, curr, NoiseStream(0), 2, np.arange(5))
        np.testing.assert_array_equal(result, prev["age"].to_numpy() + 1.0)

    def test_constant_returns_an_independent_copy(self):
        prev, curr = _frames(n=3, sex=["Male", "Female", "Male"])
        rule = ConstantTransition("sex")
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(3))
        np.testing.assert_array_equal(result, prev["sex"].to_numpy())
        result[0] = "Female"
        assert prev["sex"].iloc[0] == "Male"


class TestEducation:
    LEVELS = ("HS-grad", "Some-college", "Bachelors")

    def _rule(self, advance_prob):
        return EducationTransition(levels=self.LEVELS, advance_prob=advance_prob)

    def test_certain_advance_moves_one_level(self):
        prev, curr = _frames(n=4, education=["HS-grad"] * 4,
                             studies=[STUDIES_FULL] * 4)
        rule = self._rule({STUDIES_FULL: 1.0})
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(4))
        assert list(result) == ["Some-college"] * 4

    def test_top_level_is_absorbing(self):
        prev, curr = _frames(n=4, education=["Bachelors"] * 4,
                             studies=[STUDIES_FULL] * 4)
        rule = self._rule({STUDIES_FULL: 1.0})
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(4))
        assert list(result) == ["Bachelors"] * 4

    def test_unlisted_study_class_never_advances(self):
        prev, curr = _frames(n=4, education=["HS-grad"] * 4,
                             studies=["No studies"] * 4)
        rule = self._rule({STUDIES_FULL: 1.0})
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(4))
        assert list(result) == ["HS-grad"] * 4

    def test_advance_frequency_matches_probability(self):
        prev, curr = _frames(education=["HS-grad"] * N, studies=[STUDIES_FULL] * N)
        rule = self._rule({STUDIES_FULL: 0.5})
        result = rule.apply(prev, curr, NoiseStream(3), 2, SUBJECTS)
        assert np.mean(result == "Some-college") == pytest.approx(0.5, abs=0.01)

    def test_rejects_bad_probability(self):
        with pytest.raises(ConfigError, match="probability"):
            self._rule({STUDIES_FULL: 1.5})


class TestStayOrRedraw:
    CLASSES = ("alpha", "beta", "fresh")

    def _rule(self, **kwargs):
        initial = StubCategorical(classes=self.CLASSES, code=2)
        return StayOrRedrawTransition(variable="occupation", initial=initial,
                                      **kwargs)

    def test_stay_probability_one_keeps_everything(self):
        prev, curr = _frames(n=10, occupation=["alpha"] * 10)
        rule = self._rule(p_stay=1.0)
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(10))
        assert list(result) == ["alpha"] * 10

    def test_stay_probability_zero_redraws_everything(self):
        prev, curr = _frames(n=10, occupation=["alpha"] * 10)
        rule = self._rule(p_stay=0.0)
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(10))
        assert list(result) == ["fresh"] * 10

    def test_stay_frequency(self):
        prev, curr = _frames(occupation=["alpha"] * N)
        rule = self._rule(p_stay=0.95)
        result = rule.apply(prev, curr, NoiseStream(1), 3, SUBJECTS)
        assert np.mean(result == "alpha") == pytest.approx(0.95, abs=0.005)

    def test_enrollment_cuts_the_stay_rate(self):
        # 0.95 stay probability times a 0.25 study factor leaves 0.2375.
        prev, curr = _frames(occupation=["alpha"] * N, studies=[STUDIES_FULL] * N)
        rule = self._rule(p_stay=0.95, study_stay_factor=0.25)
        result = rule.apply(prev, curr, NoiseStream(2), 3, SUBJECTS)
        assert np.mean(result == "alpha") == pytest.approx(0.2375, abs=0.005)

    def test_non_students_keep_the_full_stay_rate(self):
        prev, curr = _frames(occupation=["alpha"] * N, studies=["No studies"] * N)
        rule = self._rule(p_stay=0.95, study_stay_factor=0.25)
        result = rule.apply(prev, curr, NoiseStream(2), 3, SUBJECTS)
        assert np.mean(result == "alpha") == pytest.approx(0.95, abs=0.005)

    def test_forced_redraw_value_never_stays(self):
        prev, curr = _frames(n=1000, occupation=["beta"] * 1000)
        rule = self._rule(p_stay=1.0, forced_redraw_value="beta")
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(1000))
        assert set(result) == {"fresh"}

    def test_rejects_bad_probabilities(self):
        with pytest.raises(ConfigError, match="p_stay"):
            self._rule(p_stay=-0.1)
        with pytest.raises(ConfigError, match="study_stay_factor"):
            self._rule(p_stay=0.5, study_stay_factor=2.0)


class TestMarital:
    CLASSES = ("Married", "Never-married", "Divorced")
    MATRIX = np.array(
        [
            [0.90, 0.0, 0.10],
            [0.30, 0.7, 0.00],
            [0.20, 0.0, 0.80],
        ]
    )

    def _rule(self, **kwargs):
        return MaritalTransition(classes=self.CLASSES, matrix=self.MATRIX, **kwargs)

    def test_requires_stochastic_matrix(self):
        bad = self.MATRIX.copy()
        bad[0, 0] = 0.5
        with pytest.raises(ConfigError, match="sums to"):
            MaritalTransition(classes=self.CLASSES, matrix=bad)

    def test_rejects_return_to_never_married(self):
        bad = np.array([[0.8, 0.1, 0.1], [0.3, 0.7, 0.0], [0.2, 0.0, 0.8]])
        with pytest.raises(ConfigError, match="Never-married"):
            MaritalTransition(classes=self.CLASSES, matrix=bad)

    def test_rejects_never_to_divorced(self):
        bad = np.array([[0.9, 0.0, 0.1], [0.3, 0.6, 0.1], [0.2, 0.0, 0.8]])
        with pytest.raises(ConfigError, match="Never-married -> Divorced"):
            MaritalTransition(classes=self.CLASSES, matrix=bad)

    def test_frequencies_at_the_neutral_age(self):
        prev, curr = _frames(
            **{"marital-status": ["Never-married"] * N},
            age=[40.0] * N,
            studies=["No studies"] * N,
        )
        result = self._rule().apply(prev, curr, NoiseStream(4), 2, SUBJECTS)
        assert np.mean(result == "Married") == pytest.approx(0.30, abs=0.01)
        assert np.mean(result == "Never-married") == pytest.approx(0.70, abs=0.01)
        assert np.all(result != "Divorced")

    def test_age_cools_the_marriage_rate(self):
        prev, curr = _frames(
            **{"marital-status": ["Never-married"] * N},
            age=[60.0] * N,
            studies=["No studies"] * N,
        )
        result = self._rule().apply(prev, curr, NoiseStream(5), 2, SUBJECTS)
        scaled = 0.30 * (1.0 - 0.25 * 2.0)  # two decades past forty
        expected = scaled / (scaled + 0.70)
        assert np.mean(result == "Married") == pytest.approx(expected, abs=0.01)

    def test_full_time_study_halves_the_marriage_chance(self):
        prev, curr = _frames(
            **{"marital-status": ["Never-married"] * N},
            age=[40.0] * N,
            studies=[STUDIES_FULL] * N,
        )
        result = self._rule(marriage_study_factor=0.5).apply(
            prev, curr, NoiseStream(6), 2, SUBJECTS
        )
        expected = 0.15 / (0.15 + 0.70)
        assert np.mean(result == "Married") == pytest.approx(expected, abs=0.01)

    def test_married_rows_ignore_the_scaling(self):
        prev, curr = _frames(
            **{"marital-status": ["Married"] * N},
            age=[20.0] * N,
            studies=[STUDIES_FULL] * N,
        )
        result = self._rule().apply(prev, curr, NoiseStream(7), 2, SUBJECTS)
        assert np.mean(result == "Married") == pytest.approx(0.90, abs=0.01)


class TestHours:
    def test_convex_mix_with_fresh_draw(self):
        prev, curr = _frames(n=3, **{"hours-per-week": [40.0, 10.0, 60.0]})
        rule = HoursTransition(initial=StubContinuous(20.0), alpha=0.9)
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(3))
        np.testing.assert_allclose(
            result, 0.9 * prev["hours-per-week"].to_numpy() + 0.1 * 20.0
        )

    def test_clipped_to_a_physical_week(self):
        prev, curr = _frames(n=2, **{"hours-per-week": [500.0, 10.0]})
        rule = HoursTransition(initial=StubContinuous(-400.0), alpha=0.9)
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(2))
        assert result[0] == MAX_WEEK_HOURS
        assert result[1] == 0.0

    def test_alpha_validated(self):
        with pytest.raises(ConfigError, match="alpha"):
            HoursTransition(initial=StubContinuous(0.0), alpha=1.2)


class TestCapital:
    @staticmethod
    def _initial(p_nonzero, mean, scale=0.0):
        @dataclass
        class StubZeroInflated:
            parents: tuple[str, ...] = ()

            def p_nonzero(self, frame):
                return np.full(len(frame), p_nonzero)

        stub = StubZeroInflated()
        stub.magnitude = StubContinuousModel(mean, scale)
        return stub

    def test_holders_keep_capital_at_the_declared_rate(self):
        prev, curr = _frames(**{"capital-net": [1000.0] * N})
        rule = CapitalTransition(
            initial=self._initial(0.0, 500.0), p_nonzero_given_prev=0.8
        )
        result = rule.apply(prev, curr, NoiseStream(8), 2, SUBJECTS)
        assert np.mean(result != 0.0) == pytest.approx(0.8, abs=0.01)

    def test_non_holders_follow_the_gate_model(self):
        prev, curr = _frames(**{"capital-net": [0.0] * N})
        rule = CapitalTransition(initial=self._initial(0.25, 500.0))
        result = rule.apply(prev, curr, NoiseStream(9), 2, SUBJECTS)
        assert np.mean(result != 0.0) == pytest.approx(0.25, abs=0.01)

    def test_pure_perturbation_stays_near_the_previous_amount(self):
        prev, curr = _frames(n=1000, **{"capital-net": [2000.0] * 1000})
        rule = CapitalTransition(
            initial=self._initial(0.0, 99.0),
            p_nonzero_given_prev=1.0,
            p_perturb=1.0,
            perturb_scale=0.0,
        )
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(1000))
        np.testing.assert_array_equal(result, 2000.0)

    def test_fresh_redraws_use_the_magnitude_model(self):
        prev, curr = _frames(n=1000, **{"capital-net": [2000.0] * 1000})
        rule = CapitalTransition(
            initial=self._initial(0.0, 99.0, scale=0.0),
            p_nonzero_given_prev=1.0,
            p_perturb=0.0,
        )
        result = rule.apply(prev, curr, NoiseStream(0), 2, np.arange(1000))
        np.testing.assert_array_equal(result, 99.0)

    def test_parameter_validation(self):
        with pytest.raises(ConfigError, match="perturb_scale"):
            CapitalTransition(initial=self._initial(0.5, 0.0), perturb_scale=-1.0)


@dataclass
class StubContinuousModel:
    value: float
    noise_scale: float = 0.0

    def mean(self, frame):
        return np.full(len(frame), self.value)


class TestStudies:
    LEVELS = tuple(f"level-{i}" for i in range(1, 17))

    def _initial(self):
        config = {
            "intercepts": {c: 0.0 for c in STUDIES_CLASSES},
            "age_coef": {c: 0.0 for c in STUDIES_CLASSES},
            "education_coef": {c: 0.0 for c in STUDIES_CLASSES},
        }
        studies = VariableSchema("studies", "categorical", STUDIES_CLASSES)
        education = VariableSchema("education", "categorical", self.LEVELS)
        return build_studies_initial(config, studies, education)

    def _frames(self, *, education="level-5", prev_studies="No studies",
                prev_income=20_000.0, n=N):
        prev, curr = _frames(
            n=n,
            age=[40.0],
            sex=["Male"],
            education=[education],
            relationship=["Husband"],
            studies=[prev_studies],
            income=[prev_income],
        )
        return prev, curr

    def test_continue_bonus_keeps_students_enrolled(self):
        prev, curr = self._frames(prev_studies=STUDIES_FULL)
        rule = StudiesTransition(
            initial=self._initial(), education_levels=self.LEVELS,
            continue_bonus=50.0,
        )
        result = rule.apply(prev, curr, NoiseStream(10), 3, SUBJECTS)
        assert np.mean(result == STUDIES_FULL) > 0.999

    def test_terminal_rank_removes_the_bonus(self):
        prev, curr = self._frames(prev_studies=STUDIES_FULL, education="level-9")
        rule = StudiesTransition(
            initial=self._initial(), education_levels=self.LEVELS,
            continue_bonus=50.0, terminal_ranks=(9,),
        )
        result = rule.apply(prev, curr, NoiseStream(11), 3, SUBJECTS)
        # Without the bonus all four classes are equally likely.
        assert np.mean(result == STUDIES_FULL) == pytest.approx(0.25, abs=0.01)

    def test_high_income_discourages_enrollment(self):
        prev, curr = self._frames(prev_income=90_000.0)
        rule = StudiesTransition(
            initial=self._initial(), education_levels=self.LEVELS,
            high_income_penalty=-50.0,
        )
        result = rule.apply(prev, curr, NoiseStream(12), 3, SUBJECTS)
        assert np.all(result != STUDIES_FULL)

    def test_top_education_level_blocks_full_time(self):
        prev, curr = self._frames(
            prev_studies=STUDIES_FULL, education=self.LEVELS[-1]
        )
        rule = StudiesTransition(
            initial=self._initial(), education_levels=self.LEVELS,
            continue_bonus=50.0,
        )
        result = rule.apply(prev, curr, NoiseStream(13), 3, SUBJECTS)
        assert np.all(result != STUDIES_FULL)

    def test_parameter_validation(self):
        with pytest.raises(ConfigError, match="non-positive"):
            StudiesTransition(
                initial=self._initial(), education_levels=self.LEVELS,
                high_income_penalty=1.0,
            )
        with pytest.raises(ConfigError, match="terminal rank"):
            StudiesTransition(
                initial=self._initial(), education_levels=self.LEVELS,
                terminal_ranks=(0,),
            )


class TestIncome:
    def _rule(self, **kwargs):
        return IncomeTransition(initial=StubIncomeInitial(30_000.0), **kwargs)

    def _frames(self, *, prev_income=40_000.0, prev_studies="No studies",
                prev_workclass="Private", curr_studies="No studies", n=1000):
        return _frames(
            n=n,
            income=[prev_income],
            studies=[prev_studies],
            workclass=[prev_workclass],
        )[0], _frames(n=n, studies=[curr_studies])[0]

    def test_raise_branch_replays_the_noise_stream(self):
        prev, curr = self._frames()
        rule = self._rule(raise_max=0.06)
        subjects = np.arange(1000)
        result = rule.apply(prev, curr, NoiseStream(14), 4, subjects)
        u = NoiseStream(14).uniform("income", 4, RULE_SLOT, subjects)
        np.testing.assert_allclose(result, 40_000.0 * (1.0 + 0.06 * u))

    def test_part_time_study_earns_a_bonus(self):
        prev, curr = self._frames(prev_studies="Evening course")
        rule = self._rule(raise_max=0.0, part_time_bonus=0.04)
        result = rule.apply(prev, curr, NoiseStream(0), 4, np.arange(1000))
        np.testing.assert_allclose(result, 40_000.0 * 1.04)

    def test_finishing_full_time_resamples_with_a_premium(self):
        prev, curr = self._frames(prev_studies=STUDIES_FULL)
        rule = self._rule(completion_bonus=0.10)
        result = rule.apply(prev, curr, NoiseStream(0), 4, np.arange(1000))
        np.testing.assert_allclose(result, 30_000.0 * 1.10)

    def test_staying_enrolled_earns_nothing(self):
        prev, curr = self._frames(
            prev_studies=STUDIES_FULL, curr_studies=STUDIES_FULL
        )
        result = self._rule().apply(prev, curr, NoiseStream(0), 4, np.arange(1000))
        np.testing.assert_array_equal(result, 0.0)

    def test_unpaid_work_forces_a_resample(self):
        prev, curr = self._frames(prev_workclass="Without-pay")
        result = self._rule().apply(prev, curr, NoiseStream(0), 4, np.arange(1000))
        np.testing.assert_allclose(result, 30_000.0)

    def test_collapsed_income_forces_a_resample(self):
        prev, curr = self._frames(prev_income=100.0)
        rule = self._rule(resample_floor=5_000.0)
        result = rule.apply(prev, curr, NoiseStream(0), 4, np.arange(1000))
        np.testing.assert_allclose(result, 30_000.0)

    def test_day_course_haircut_on_the_raise_branch(self):
        prev, curr = self._frames(curr_studies="Day course")
        rule = self._rule(raise_max=0.0)
        result = rule.apply(prev, curr, NoiseStream(0), 4, np.arange(1000))
        np.testing.assert_allclose(result, 40_000.0 * 0.8)

    def test_parameter_validation(self):
        with pytest.raises(ConfigError, match="non-negative"):
            self._rule(raise_max=-0.1)
