"""
Shared fixtures: scratch directories plus the two worked credit-card datasets.

``credit_scenario`` is the 300-applicant table the fairness and attack checks
are built on; ``credit_sample`` is the 6-record table the solver examples use.
Both mark ``gender`` public and ``income`` sensitive.
"""

import os

import pytest

from attack import SideInformation
from dataset import WeightedDataset, load_dataset, partition_by_qid

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
ROLES = {"gender": "public", "income": "sensitive"}


@pytest.fixture(autouse=True)
def atrp_home(tmp_path, monkeypatch):
    home = tmp_path / "atrp_home"
    monkeypatch.setenv("ATRP_HOME", str(home))
    return home


@pytest.fixture
def input_dir(tmp_path):
    d = tmp_path / "input"
    d.mkdir()
    return d


@pytest.fixture
def output_dir(tmp_path):
    d = tmp_path / "output"
    d.mkdir()
    return d


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def credit_scenario_path():
    return os.path.join(DATA_DIR, "credit_scenario.csv")


@pytest.fixture
def credit_sample_path():
    return os.path.join(DATA_DIR, "credit_sample.csv")


@pytest.fixture
def census_path():
    return os.path.join(DATA_DIR, "census_income_by_gender.csv")


@pytest.fixture
def credit_scenario(credit_scenario_path) -> WeightedDataset:
    return load_dataset(credit_scenario_path, ROLES)


@pytest.fixture
def credit_sample(credit_sample_path) -> WeightedDataset:
    return load_dataset(credit_sample_path, ROLES)


@pytest.fixture
def sample_groups(credit_sample):
    """(female, male) QID groups of the 6-record table."""
    female, male = partition_by_qid(credit_sample)
    return female, male


@pytest.fixture
def census(census_path) -> SideInformation:
    return SideInformation.from_file(census_path, ["gender"])
