"""Shared fixtures.

The heavy objects (surrogate census file, cleaned cohort, fitted
simulator, a small benchmark build) are session-scoped so the fit cost
is paid once for the whole run.
"""

from __future__ import annotations

import pytest
from hypothesis import settings

from scmbench.config import load_config
from scmbench.engine import build_cate_benchmark, fit_scm
from scmbench.ingest import load_adult, preprocess
from scmbench.synthetic import write_census_file

settings.register_profile("suite", deadline=None, max_examples=40)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def census_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("census") / "adult.data"
    write_census_file(path, seed=2024)
    return path


@pytest.fixture(scope="session")
def base_data(census_path):
    return preprocess(load_adult(census_path))


@pytest.fixture(scope="session")
def default_config():
    return load_config()


@pytest.fixture(scope="session")
def scm(default_config, base_data):
    return fit_scm(default_config, base_data)


@pytest.fixture(scope="session")
def small_benchmark(scm):
    return build_cate_benchmark(scm, n_observational=4000, n_counterfactual=4000)
