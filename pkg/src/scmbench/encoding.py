"""Design-matrix construction from typed data frames.

Categorical variables are expanded to a full one-hot block (one column
per known category, none dropped; regularised or tree-based downstream
models do not need a reference level).  Continuous variables are
standardised with statistics frozen at fit time so that train and test
frames are mapped identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import DataError
from .ingest import VariableSchema

__all__ = ["FeatureEncoder"]


@dataclass
class FeatureEncoder:
    """Maps a data frame to a dense float64 design matrix.

    :param variables: schemas of the feature columns, in the order their
        encoded blocks appear in the matrix.
    """

    variables: tuple[VariableSchema, ...]
    _means: dict[str, float] = field(default_factory=dict, repr=False)
    _scales: dict[str, float] = field(default_factory=dict, repr=False)
    _fitted: bool = field(default=False, repr=False)

    def __init__(self, variables: Sequence[VariableSchema]):
        self.variables = tuple(variables)
        self._means = {}
        self._scales = {}
        self._fitted = False

    @property
    def feature_names(self) -> list[str]:
        names: list[str] = []
        for var in self.variables:
            if var.kind == "categorical":
                names.extend(f"{var.name}={cat}" for cat in var.categories)
            else:
                names.append(var.name)
        return names

    @property
    def width(self) -> int:
        return sum(
            len(v.categories) if v.kind == "categorical" else 1
            for v in self.variables
        )

    def fit(self, frame: pd.DataFrame) -> "FeatureEncoder":
        for var in self.variables:
            if var.name not in frame.columns:
                raise DataError(f"feature column {var.name!r} missing from frame")
            if var.kind == "continuous":
                values = np.asarray(frame[var.name], dtype=float)
                if not np.all(np.isfinite(values)):
                    raise DataError(f"non-finite values in column {var.name!r}")
                mean = float(values.mean())
                scale = float(values.std())
                self._means[var.name] = mean
                self._scales[var.name] = scale if scale > 0.0 else 1.0
        self._fitted = True
        return self

    def transform(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        if not self._fitted:
            raise RuntimeError("encoder used before fit()")
        n = len(frame)
        out = np.empty((n, self.width), dtype=np.float64)
        col = 0
        for var in self.variables:
            if var.name not in frame.columns:
                raise DataError(f"feature column {var.name!r} missing from frame")
            if var.kind == "categorical":
                codes = pd.Categorical(
                    frame[var.name], categories=list(var.categories)
                ).codes
                if (codes < 0).any():
                    bad = frame[var.name].iloc[int(np.argmax(codes < 0))]
                    raise DataError(
                        f"unknown category {bad!r} in column {var.name!r}"
                    )
                k = len(var.categories)
                block = np.zeros((n, k), dtype=np.float64)
                block[np.arange(n), codes] = 1.0
                out[:, col:col + k] = block
                col += k
            else:
                values = np.asarray(frame[var.name], dtype=float)
                if not np.all(np.isfinite(values)):
                    raise DataError(f"non-finite values in column {var.name!r}")
                out[:, col] = (values - self._means[var.name]) / self._scales[var.name]
                col += 1
        return out

    def fit_transform(self, frame: pd.DataFrame) -> NDArray[np.float64]:
        return self.fit(frame).transform(frame)
