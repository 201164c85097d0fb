import sys

import pytest

from sspmtl.config import ExperimentConfig
from sspmtl.harness import prepare_experiment


def small_config(**benchmark):
    """A world small enough for end-to-end tests to finish in seconds."""
    doc = {
        "world": {"cluster_count": 3, "profiles_per_cluster": 6, "seed": 5},
        "mtl": {"cluster_count": 3, "clusters_per_epoch": 2, "pretrain_epochs": 3,
                "task_epochs": 4},
        "pso": {"particles": 4, "iterations": 2},
        "benchmark": {"repetitions": 2, "timing_calls": 2, "mfp_timing_calls": 1, **benchmark},
    }
    return ExperimentConfig.from_dict(doc)


@pytest.fixture(scope="session")
def small_cfg():
    return small_config()


@pytest.fixture(scope="session")
def small_exp(small_cfg):
    return prepare_experiment(small_cfg)


@pytest.fixture(scope="session")
def default_exp():
    return prepare_experiment(ExperimentConfig())


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
