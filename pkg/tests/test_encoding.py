"""Design-matrix encoding: one-hot blocks, standardization, validation."""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scmbench.encoding import FeatureEncoder
from scmbench.errors import DataError
from scmbench.ingest import VariableSchema

SCHEMA = (
    VariableSchema("color", "categorical", ("red", "green", "blue")),
    VariableSchema("size", "continuous"),
)


def _frame(colors, sizes):
    return pd.DataFrame({"color": colors, "size": sizes})


class TestLayout:
    def test_width_and_names(self):
        enc = FeatureEncoder(SCHEMA)
        assert enc.width == 4
        assert enc.feature_names == [
            "color=red",
            "color=green",
            "color=blue",
            "size",
        ]

    def test_one_hot_block(self):
        enc = FeatureEncoder(SCHEMA[:1])
        X = enc.fit_transform(_frame(["blue", "red", "green"], [0, 0, 0]))
        np.testing.assert_array_equal(
            X, [[0, 0, 1], [1, 0, 0], [0, 1, 0]]
        )

    @given(
        st.lists(st.sampled_from(["red", "green", "blue"]), min_size=1, max_size=30)
    )
    def test_each_row_activates_exactly_one_indicator(self, colors):
        enc = FeatureEncoder(SCHEMA[:1])
        X = enc.fit_transform(_frame(colors, [0.0] * len(colors)))
        np.testing.assert_array_equal(X.sum(axis=1), 1.0)
        assert set(np.unique(X)) <= {0.0, 1.0}


class TestStandardization:
    def test_train_columns_become_zero_mean_unit_scale(self):
        enc = FeatureEncoder(SCHEMA[1:])
        sizes = [1.0, 2.0, 3.0, 10.0]
        X = enc.fit_transform(_frame(["red"] * 4, sizes))
        assert X[:, 0].mean() == pytest.approx(0.0, abs=1e-12)
        assert X[:, 0].std() == pytest.approx(1.0)

    def test_transform_reuses_training_statistics(self):
        enc = FeatureEncoder(SCHEMA[1:])
        enc.fit(_frame(["red"] * 3, [0.0, 1.0, 2.0]))
        X = enc.transform(_frame(["red"], [4.0]))
        # mean 1, sd sqrt(2/3)
        assert X[0, 0] == pytest.approx((4.0 - 1.0) / np.sqrt(2.0 / 3.0))

    def test_constant_column_maps_to_zero(self):
        enc = FeatureEncoder(SCHEMA[1:])
        X = enc.fit_transform(_frame(["red"] * 3, [5.0, 5.0, 5.0]))
        np.testing.assert_array_equal(X[:, 0], 0.0)


class TestValidation:
    def test_transform_before_fit(self):
        enc = FeatureEncoder(SCHEMA)
        with pytest.raises(RuntimeError, match="before fit"):
            enc.transform(_frame(["red"], [1.0]))

    def test_unknown_category_named(self):
        enc = FeatureEncoder(SCHEMA)
        enc.fit(_frame(["red"], [1.0]))
        with pytest.raises(DataError, match="'purple'"):
            enc.transform(_frame(["purple"], [1.0]))

    def test_missing_column(self):
        enc = FeatureEncoder(SCHEMA)
        with pytest.raises(DataError, match="missing"):
            enc.fit(pd.DataFrame({"color": ["red"]}))

    def test_non_finite_values(self):
        enc = FeatureEncoder(SCHEMA)
        with pytest.raises(DataError, match="non-finite"):
            enc.fit(_frame(["red"], [np.nan]))
