"""Tests for the treatment-effect estimators.

Every estimator is checked against data where the right answer is
known: hand-sized tables whose weighted means can be done on paper,
randomized designs where the naive contrast is already correct, and
confounded designs with known propensities where only the adjusted
estimators recover the truth.  The DML stage is cross-checked against
a direct Frisch-Waugh partialling-out oracle.
"""

import numpy as np
import pandas as pd
import pytest

from scmbench.config import EstimationConfig
from scmbench.errors import ConfigError, DataError, NumericError
from scmbench.estimators import (
    ATE_ONLY_ESTIMATORS,
    ESTIMATOR_ALIASES,
    ESTIMATOR_NAMES,
    EstimationTable,
    estimate_dml,
    estimate_ipw,
    estimate_matching,
    estimate_s_learner,
    estimate_t_learner,
    run_estimator,
    select_hyperparameters,
)
from scmbench.ingest import VariableSchema
from scmbench.learners import r2_score

Z = VariableSchema("z", "continuous")
Z1 = VariableSchema("z1", "continuous")
Z2 = VariableSchema("z2", "continuous")
GRP = VariableSchema("grp", "categorical", ("left", "right"))


def table_of(frame, schemas, **kwargs):
    return EstimationTable(
        frame=frame,
        covariates=tuple(s.name for s in schemas),
        schemas=tuple(schemas),
        **kwargs,
    )


def confounded_table(n, seed, tau=2.0):
    """Treatment taken more often by subjects with high z1 or in the
    'right' group, both of which independently raise the outcome."""
    rng = np.random.default_rng(seed)
    z1 = rng.normal(size=n)
    group = rng.integers(0, 2, size=n)
    logit = 1.5 * z1 + 1.0 * group - 0.5
    e = 1.0 / (1.0 + np.exp(-logit))
    a = (rng.uniform(size=n) < e).astype(np.int64)
    y = tau * a + 2.0 * z1 + 1.5 * group + rng.normal(scale=1.0, size=n)
    frame = pd.DataFrame({
        "subject": np.arange(n),
        "a": a,
        "y": y,
        "z1": z1,
        "grp": np.where(group == 1, "right", "left"),
    })
    return table_of(frame, (Z1, GRP)), e


def randomized_heterogeneous(n, seed):
    """Randomized treatment whose effect 1 + 2 z1 varies with z1."""
    rng = np.random.default_rng(seed)
    z1 = rng.uniform(-2.0, 2.0, size=n)
    z2 = rng.normal(size=n)
    a = rng.integers(0, 2, size=n)
    cate = 1.0 + 2.0 * z1
    y = cate * a + z2 + rng.normal(scale=0.5, size=n)
    frame = pd.DataFrame({"subject": np.arange(n), "a": a, "y": y,
                          "z1": z1, "z2": z2})
    return table_of(frame, (Z1, Z2)), cate


@pytest.fixture(scope="module")
def config():
    return EstimationConfig(
        cv_folds=3,
        rf_trees=20,
        gbt_rounds=50,
        grids={
            "ridge": {"alpha": (0.001, 1.0, 1000.0)},
            "logistic": {"C": (1.0,)},
            "boosted_trees": {"eta": (0.3,), "max_depth": (3,)},
            "random_forest": {"min_samples_leaf": (5,)},
        },
    )


class TestEstimationTable:
    def make_frame(self):
        return pd.DataFrame({
            "subject": [0, 1, 2, 3],
            "a": [1, 0, 1, 0],
            "y": [4.0, 2.0, 5.0, 1.0],
            "z": [0.1, 0.2, 0.3, 0.4],
        })

    def test_accessors(self):
        table = table_of(self.make_frame(), (Z,))
        assert table.n == 4
        assert table.a.tolist() == [1, 0, 1, 0]
        assert table.y.tolist() == [4.0, 2.0, 5.0, 1.0]
        assert list(table.covariate_frame().columns) == ["z"]
        assert table.schema("z") is Z

    def test_reserved_covariate_name(self):
        frame = self.make_frame()
        with pytest.raises(DataError, match="collide"):
            EstimationTable(frame=frame, covariates=("a",),
                            schemas=(VariableSchema("a", "continuous"),))

    def test_missing_column(self):
        frame = self.make_frame().drop(columns=["z"])
        with pytest.raises(DataError, match="missing columns"):
            table_of(frame, (Z,))

    def test_empty_table(self):
        frame = self.make_frame().iloc[:0]
        with pytest.raises(DataError, match="no rows"):
            table_of(frame, (Z,))

    def test_schema_order_must_match(self):
        frame = self.make_frame()
        frame["w"] = 1.0
        with pytest.raises(DataError, match="do not match"):
            EstimationTable(
                frame=frame, covariates=("z", "w"),
                schemas=(VariableSchema("w", "continuous"), Z),
            )

    def test_nonbinary_treatment(self):
        frame = self.make_frame()
        frame.loc[0, "a"] = 2
        with pytest.raises(DataError, match="only 0 and 1"):
            table_of(frame, (Z,))

    def test_nonfinite_outcome(self):
        frame = self.make_frame()
        frame.loc[1, "y"] = np.nan
        with pytest.raises(DataError, match="non-finite"):
            table_of(frame, (Z,))

    def test_conditioning_column_required(self):
        with pytest.raises(DataError, match="missing columns"):
            table_of(self.make_frame(), (Z,), conditioning=("education",))

    def test_unknown_schema_lookup(self):
        table = table_of(self.make_frame(), (Z,))
        with pytest.raises(DataError, match="no covariate named"):
            table.schema("w")

    def test_with_covariates_narrows(self):
        frame = self.make_frame()
        frame["w"] = [1.0, 2.0, 3.0, 4.0]
        wide = EstimationTable(
            frame=frame, covariates=("z", "w"),
            schemas=(Z, VariableSchema("w", "continuous")),
        )
        narrow = wide.with_covariates(["w"])
        assert narrow.covariates == ("w",)
        assert narrow.schemas == (wide.schema("w"),)
        assert narrow.n == wide.n
        with pytest.raises(DataError, match="unknown covariates"):
            wide.with_covariates(["q"])


class TestSelectHyperparameters:
    def linear_data(self, n=90, seed=0):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=n)
        y = 3.0 * z + rng.normal(scale=0.01, size=n)
        return pd.DataFrame({"z": z}), y

    def test_picks_the_light_penalty_on_a_clean_signal(self, config):
        frame, y = self.linear_data()
        fitted, diag = select_hyperparameters("ridge", frame, y, (Z,), config)
        assert diag["params"] == {"alpha": 0.001}
        assert diag["cv_metric"] == "r2"
        assert diag["cv_score"] > 0.99
        assert len(diag["cv_table"]) == 3
        assert all("mean_score" in row for row in diag["cv_table"])

    def test_classifier_scored_by_auc(self, config):
        rng = np.random.default_rng(1)
        z = np.concatenate([rng.normal(-2.0, 1.0, 60),
                            rng.normal(2.0, 1.0, 60)])
        a = np.repeat([0, 1], 60)
        order = rng.permutation(120)
        frame = pd.DataFrame({"z": z[order]})
        fitted, diag = select_hyperparameters(
            "logistic", frame, a[order], (Z,), config)
        assert diag["cv_metric"] == "auc"
        assert diag["cv_score"] > 0.9

    def test_unknown_learner_kind(self, config):
        frame, y = self.linear_data()
        with pytest.raises(ConfigError, match="unknown learner kind"):
            select_hyperparameters("spline", frame, y, (Z,), config)

    def test_missing_grid_family(self):
        bare = EstimationConfig(grids={})
        frame, y = self.linear_data()
        with pytest.raises(ConfigError, match="no hyperparameter grid"):
            select_hyperparameters("ridge", frame, y, (Z,), bare)

    def test_grid_cap(self, config):
        frame, y = self.linear_data()
        grid = {"alpha": tuple(float(k + 1) for k in range(25))}
        with pytest.raises(ConfigError, match="over the cap"):
            select_hyperparameters("ridge", frame, y, (Z,), config,
                                   grid=grid)


class TestIpw:
    def two_row_table(self):
        frame = pd.DataFrame({
            "subject": [0, 1],
            "a": [1, 0],
            "y": [5.0, 3.0],
            "z": [0.0, 0.0],
        })
        return table_of(frame, (Z,))

    def test_two_rows_by_hand(self, config):
        # With e = 1/2 everywhere both variants give 10/2 - 6/2 = 2.
        table = self.two_row_table()
        e = np.array([0.5, 0.5])
        for variant in ("ht", "hayek"):
            est = estimate_ipw(table, config, variant=variant, propensity=e)
            assert est.ate == 2.0
            assert est.diagnostics["mu1"] == 5.0
            assert est.diagnostics["mu0"] == 3.0
            assert est.diagnostics["propensity_source"] == "supplied"

    def test_ht_equals_hayek_on_a_balanced_design(self, config):
        # At e = 1/2 with equal arm sizes the normalising constants of
        # the two variants coincide, so the estimates match bitwise.
        rng = np.random.default_rng(8)
        n = 200
        frame = pd.DataFrame({
            "subject": np.arange(n),
            "a": np.tile([1, 0], n // 2),
            "y": rng.normal(size=n),
            "z": rng.normal(size=n),
        })
        table = table_of(frame, (Z,))
        e = np.full(n, 0.5)
        ht = estimate_ipw(table, config, variant="ht", propensity=e)
        hayek = estimate_ipw(table, config, variant="hayek", propensity=e)
        assert ht.ate == hayek.ate

    def test_true_propensities_remove_confounding(self, config):
        table, e = confounded_table(20000, seed=7)
        a, y = table.a, table.y
        naive = y[a == 1].mean() - y[a == 0].mean()
        ht = estimate_ipw(table, config, variant="ht",
                          propensity=e, clip=0.0)
        hayek = estimate_ipw(table, config, variant="hayek",
                             propensity=e, clip=0.0)
        assert abs(naive - 2.0) > 1.0
        assert abs(ht.ate - 2.0) < 0.1
        assert abs(hayek.ate - 2.0) < 0.1

    def test_fitted_propensities_come_close(self, config):
        table, _ = confounded_table(20000, seed=7)
        est = estimate_ipw(table, config, variant="hayek",
                           learner="logistic", params={"C": 1.0})
        assert est.diagnostics["propensity_source"] == "fitted"
        assert abs(est.ate - 2.0) < 0.2

    def test_clipping_bounds_the_weights(self, config):
        frame = pd.DataFrame({
            "subject": [0, 1, 2, 3],
            "a": [1, 0, 1, 0],
            "y": [10.0, 1.0, 2.0, 3.0],
            "z": np.zeros(4),
        })
        table = table_of(frame, (Z,))
        e = np.array([1e-6, 0.5, 0.5, 0.5])
        raw = estimate_ipw(table, config, propensity=e, clip=0.0)
        clipped = estimate_ipw(table, config, propensity=e, clip=0.1)
        # Row 0 carries weight 1e6 unclipped and 10 clipped.
        assert raw.ate > 1e6
        assert clipped.ate < 50.0
        assert clipped.diagnostics["clip"] == 0.1

    def test_default_clip_comes_from_config(self, config):
        table = self.two_row_table()
        est = estimate_ipw(table, config, propensity=np.array([0.5, 0.5]))
        assert est.diagnostics["clip"] == config.propensity_clip

    def test_supplied_propensity_validation(self, config):
        table = self.two_row_table()
        with pytest.raises(DataError, match="length"):
            estimate_ipw(table, config, propensity=np.array([0.5]))
        with pytest.raises(DataError, match="inside|in \\(0, 1\\)"):
            estimate_ipw(table, config,
                         propensity=np.array([0.0, 0.5]))

    def test_empty_arm(self, config):
        frame = pd.DataFrame({
            "subject": [0, 1],
            "a": [1, 1],
            "y": [1.0, 2.0],
            "z": [0.0, 1.0],
        })
        table = table_of(frame, (Z,))
        with pytest.raises(DataError, match="zero total weight"):
            estimate_ipw(table, config, propensity=np.array([0.5, 0.5]))

    def test_saturated_forest_needs_clipping(self, config):
        # A forest that separates the arms perfectly drives fitted
        # propensities to exactly 0 and 1; without clipping the weights
        # blow up and the failure must be loud.
        z = np.concatenate([np.full(30, -3.0), np.full(30, 3.0)])
        a = (z > 0).astype(np.int64)
        frame = pd.DataFrame({"subject": np.arange(60), "a": a,
                              "y": z + a, "z": z})
        table = table_of(frame, (Z,))
        with pytest.raises(NumericError, match="clipping"):
            estimate_ipw(table, config, learner="forest",
                         params={"min_samples_leaf": 1}, clip=0.0)
        est = estimate_ipw(table, config, learner="forest",
                           params={"min_samples_leaf": 1}, clip=0.02)
        assert np.isfinite(est.ate)

    def test_unknown_variant_and_learner(self, config):
        table = self.two_row_table()
        with pytest.raises(ConfigError, match="unknown IPW variant"):
            estimate_ipw(table, config, variant="hajek2")
        with pytest.raises(ConfigError, match="unknown propensity learner"):
            estimate_ipw(table, config, learner="svm")

    def test_cache_shares_the_propensity_fit(self, config):
        table, _ = confounded_table(600, seed=3)
        cache = {}
        run_estimator("ipw_lr", table, config, cache)
        assert set(cache) == {("propensity", "logistic")}

        # Replace the cached model with a stub; if the Hayek variant
        # really reuses the cache, it now sees e = 1/2 everywhere and
        # collapses to the plain difference of arm means.
        class Half:
            def propensity(self, frame):
                return np.full(len(frame), 0.5)

        cache[("propensity", "logistic")] = (Half(), {"learner": "stub"})
        est = run_estimator("ipw_w_lr", table, config, cache)
        a, y = table.a, table.y
        naive = y[a == 1].mean() - y[a == 0].mean()
        assert est.ate == pytest.approx(naive, rel=1e-12)


class TestSLearner:
    def test_linear_effect_recovered(self, config):
        rng = np.random.default_rng(2)
        n = 400
        z = rng.normal(size=n)
        a = rng.integers(0, 2, size=n)
        y = 5.0 * a + 2.0 * z
        frame = pd.DataFrame({"subject": np.arange(n), "a": a,
                              "y": y, "z": z})
        table = table_of(frame, (Z,))
        est = estimate_s_learner(table, config, learner="ridge",
                                 params={"alpha": 1e-6})
        assert est.ate == pytest.approx(5.0, abs=1e-3)
        assert est.cate == pytest.approx(np.full(n, 5.0), abs=1e-3)

    def test_boosted_base_learns_a_pure_step(self, config):
        # y = 5a with no covariate signal: every boosting round keeps
        # splitting on the treatment column alone, and fifty rounds at
        # eta 0.3 leave a residual factor of 0.7**50 ~ 1.8e-8.
        rng = np.random.default_rng(3)
        n = 400
        a = np.repeat([1, 0], n // 2)
        frame = pd.DataFrame({
            "subject": np.arange(n),
            "a": a,
            "y": 5.0 * a.astype(float),
            "z": rng.normal(size=n),
        })
        table = table_of(frame, (Z,))
        est = estimate_s_learner(table, config, learner="gbt",
                                 params={"eta": 0.3, "max_depth": 3})
        assert est.ate == pytest.approx(5.0, abs=1e-6)
        assert np.ptp(est.cate) == 0.0

    def test_predict_cate_on_new_rows(self, config):
        rng = np.random.default_rng(4)
        n = 300
        z = rng.normal(size=n)
        a = rng.integers(0, 2, size=n)
        frame = pd.DataFrame({"subject": np.arange(n), "a": a,
                              "y": 3.0 * a + z, "z": z})
        table = table_of(frame, (Z,))
        est = estimate_s_learner(table, config, learner="ridge",
                                 params={"alpha": 1e-6})
        fresh = pd.DataFrame({"z": [-1.0, 0.0, 1.0]})
        assert est.predict_cate(fresh) == pytest.approx(
            np.full(3, 3.0), abs=1e-3)

    def test_unknown_base_learner(self, config):
        table, _ = confounded_table(50, seed=0)
        with pytest.raises(ConfigError, match="unknown S-learner base"):
            estimate_s_learner(table, config, learner="stump")


class TestTLearner:
    def test_linear_base_recovers_the_effect_surface(self, config):
        table, cate = randomized_heterogeneous(3000, seed=5)
        est = estimate_t_learner(table, config, learner="ridge",
                                 params={"alpha": 0.001})
        assert r2_score(cate, est.cate) > 0.95
        assert est.ate == pytest.approx(cate.mean(), abs=0.1)
        assert est.ate == pytest.approx(float(np.mean(est.cate)))

    def test_boosted_base_recovers_the_effect_surface(self, config):
        table, cate = randomized_heterogeneous(3000, seed=5)
        est = estimate_t_learner(table, config, learner="gbt",
                                 params={"eta": 0.3, "max_depth": 3})
        assert r2_score(cate, est.cate) > 0.8

    def test_empty_arm(self, config):
        frame = pd.DataFrame({
            "subject": [0, 1, 2],
            "a": [1, 1, 1],
            "y": [1.0, 2.0, 3.0],
            "z": [0.1, 0.2, 0.3],
        })
        table = table_of(frame, (Z,))
        with pytest.raises(DataError, match="arm 0 is empty"):
            estimate_t_learner(table, config, learner="ridge",
                               params={"alpha": 1.0})

    def test_unknown_base_learner(self, config):
        table, _ = confounded_table(50, seed=0)
        with pytest.raises(ConfigError, match="unknown T-learner base"):
            estimate_t_learner(table, config, learner="knn")


class TestDml:
    def linear_table(self, n=4000, seed=21, tau=2.0):
        rng = np.random.default_rng(seed)
        z1 = rng.normal(size=n)
        z2 = rng.normal(size=n)
        e = 1.0 / (1.0 + np.exp(-(0.8 * z1 - 0.5 * z2)))
        a = (rng.uniform(size=n) < e).astype(np.int64)
        y = tau * a + 1.5 * z1 + 1.0 * z2 + rng.normal(size=n)
        frame = pd.DataFrame({"subject": np.arange(n), "a": a, "y": y,
                              "z1": z1, "z2": z2})
        return table_of(frame, (Z1, Z2))

    def test_agrees_with_frisch_waugh(self, config):
        # On a linear design the cross-fit residual-on-residual ATE
        # should land next to the one-shot partialling-out coefficient.
        table = self.linear_table()
        est = estimate_dml(table, config)
        n = table.n
        X = np.column_stack([np.ones(n),
                             table.frame["z1"], table.frame["z2"]])
        r_y = table.y - X @ np.linalg.lstsq(X, table.y, rcond=None)[0]
        r_a = table.a - X @ np.linalg.lstsq(
            X, table.a.astype(float), rcond=None)[0]
        fw = float(r_a @ r_y / (r_a @ r_a))
        assert abs(est.ate - fw) < 1e-2
        assert abs(est.ate - 2.0) < 0.15

    def test_diagnostics_report_both_nuisances(self, config):
        table = self.linear_table(n=1000, seed=9)
        est = estimate_dml(table, config)
        assert est.diagnostics["folds"] == config.cv_folds
        assert 0.5 < est.diagnostics["propensity_auc"] <= 1.0
        assert est.diagnostics["cv_score"] > 0.5
        assert est.ate == pytest.approx(float(np.mean(est.cate)))

    def test_constant_treatment(self, config):
        frame = pd.DataFrame({
            "subject": [0, 1, 2],
            "a": [1, 1, 1],
            "y": [1.0, 2.0, 3.0],
            "z": [0.1, 0.2, 0.3],
        })
        table = table_of(frame, (Z,))
        with pytest.raises(NumericError, match="single value"):
            estimate_dml(table, config)

    def test_residual_floor(self):
        # With the floor raised past 1/2 even a randomized treatment
        # cannot clear it, so the failure mode is reachable directly.
        strict = EstimationConfig(
            cv_folds=3, dml_residual_floor=0.9,
            grids={"ridge": {"alpha": (1.0,)},
                   "logistic": {"C": (1.0,)}},
        )
        rng = np.random.default_rng(6)
        n = 300
        frame = pd.DataFrame({
            "subject": np.arange(n),
            "a": rng.integers(0, 2, size=n),
            "y": rng.normal(size=n),
            "z": rng.normal(size=n),
        })
        table = table_of(frame, (Z,))
        with pytest.raises(NumericError, match="below"):
            estimate_dml(table, strict)

    def test_unknown_learners(self, config):
        table = self.linear_table(n=60, seed=1)
        with pytest.raises(ConfigError, match="unknown DML outcome"):
            estimate_dml(table, config, outcome="spline")
        with pytest.raises(ConfigError, match="unknown DML propensity"):
            estimate_dml(table, config, propensity="svm")
        with pytest.raises(ConfigError, match="unknown DML final"):
            estimate_dml(table, config, final="rf")


class TestMatching:
    def test_identical_pair_by_hand(self, config):
        frame = pd.DataFrame({
            "subject": [0, 1],
            "a": [1, 0],
            "y": [9.0, 3.0],
            "z": [0.5, 0.5],
        })
        table = table_of(frame, (Z,))
        est = estimate_matching(table, config)
        assert est.ate == 6.0
        assert est.diagnostics["n_treated"] == 1
        assert est.diagnostics["n_control"] == 1

    def test_twin_design_is_exact(self, config):
        # Every treated subject has a control twin at the same z whose
        # outcome sits exactly 3 lower, so matching reads off the truth.
        rng = np.random.default_rng(10)
        m = 40
        z = rng.normal(size=m)
        base = 2.0 * z + rng.normal(size=m)
        frame = pd.DataFrame({
            "subject": np.arange(2 * m),
            "a": np.repeat([1, 0], m),
            "y": np.concatenate([base + 3.0, base]),
            "z": np.concatenate([z, z]),
        })
        table = table_of(frame, (Z,))
        est = estimate_matching(table, config)
        assert est.ate == pytest.approx(3.0, abs=1e-12)

    def test_ties_go_to_the_lowest_pool_index(self, config):
        # The treated row at z = 0 is equidistant from both controls;
        # the first control in row order must win the tie.
        frame = pd.DataFrame({
            "subject": [0, 1, 2],
            "a": [1, 0, 0],
            "y": [7.0, 10.0, 20.0],
            "z": [0.0, 1.0, -1.0],
        })
        table = table_of(frame, (Z,))
        est = estimate_matching(table, config)
        assert est.diagnostics["mu0"] == pytest.approx(40.0 / 3.0)
        assert est.ate == pytest.approx(7.0 - 40.0 / 3.0)

    def test_empty_arm(self, config):
        frame = pd.DataFrame({
            "subject": [0, 1],
            "a": [0, 0],
            "y": [1.0, 2.0],
            "z": [0.0, 1.0],
        })
        table = table_of(frame, (Z,))
        with pytest.raises(DataError, match="both treatment arms"):
            estimate_matching(table, config)


class TestRoster:
    def test_roster_names(self):
        assert len(ESTIMATOR_NAMES) == 14
        assert set(ESTIMATOR_NAMES) == {
            "ipw_lr", "ipw_rf", "ipw_w_lr", "ipw_w_rf", "match_eu",
            "s_ridge", "s_gbt", "s_rf",
            "dml_linear", "dml_gbt", "dml_mix",
            "t_ridge", "t_gbt", "t_rf",
        }

    def test_aliases_point_at_roster_members(self):
        assert ESTIMATOR_ALIASES == {
            "s_xgbLike": "s_gbt",
            "t_xgbLike": "t_gbt",
            "dml_xgbLike": "dml_gbt",
        }
        for target in ESTIMATOR_ALIASES.values():
            assert target in ESTIMATOR_NAMES

    def test_ate_only_estimators_are_roster_members(self):
        assert ATE_ONLY_ESTIMATORS <= set(ESTIMATOR_NAMES)
        assert "t_ridge" not in ATE_ONLY_ESTIMATORS

    def test_unknown_estimator(self, config):
        table, _ = confounded_table(50, seed=0)
        with pytest.raises(ConfigError, match="unknown estimator"):
            run_estimator("ols", table, config)

    def test_alias_resolves_and_reports_the_canonical_name(self, config):
        table, _ = confounded_table(400, seed=12)
        est = run_estimator("s_xgbLike", table, config)
        assert est.estimator == "s_gbt"

    def test_ipw_and_matching_report_no_cate(self, config):
        table, _ = confounded_table(400, seed=12)
        est = run_estimator("ipw_w_lr", table, config)
        assert est.cate is None and est.predict_cate is None
        est = run_estimator("match_eu", table, config)
        assert est.cate is None and est.predict_cate is None

    def test_single_ridge_cate_is_constant(self, config):
        # s_ridge stays on the ATE-only list because a single additive
        # linear model cannot express effect heterogeneity.
        assert "s_ridge" in ATE_ONLY_ESTIMATORS
        table, _ = confounded_table(400, seed=12)
        est = run_estimator("s_ridge", table, config)
        assert est.cate is not None
        assert np.ptp(est.cate) < 1e-8

    def test_cache_accumulates_one_fit_per_propensity_model(self, config):
        table, _ = confounded_table(300, seed=13)
        cache = {}
        run_estimator("ipw_lr", table, config, cache)
        run_estimator("ipw_w_lr", table, config, cache)
        assert set(cache) == {("propensity", "logistic")}
        run_estimator("ipw_rf", table, config, cache)
        assert set(cache) == {("propensity", "logistic"),
                              ("propensity", "rf_class")}

    def test_row_order_does_not_matter_without_cross_validation(
            self, config):
        table, _ = confounded_table(500, seed=14)
        perm = np.random.default_rng(0).permutation(table.n)
        shuffled = table_of(
            table.frame.iloc[perm].reset_index(drop=True), table.schemas)
        a = estimate_s_learner(table, config, learner="ridge",
                               params={"alpha": 1.0})
        b = estimate_s_learner(shuffled, config, learner="ridge",
                               params={"alpha": 1.0})
        assert a.ate == pytest.approx(b.ate, rel=1e-9)
