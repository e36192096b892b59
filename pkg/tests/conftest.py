from pathlib import Path

import pytest

from svcgraph.gae import ModelConfig, train
from svcgraph.sim import load_scenario, simulate_corpus
from svcgraph.telemetry import Partition

ROOT = Path(__file__).resolve().parents[1]
SAMPLE = ROOT / "scenarios" / "sample.scn"


@pytest.fixture(scope="session")
def sample_corpus():
    return simulate_corpus(load_scenario(SAMPLE))


@pytest.fixture(scope="session")
def sample_model(sample_corpus):
    config = ModelConfig.for_registry(len(sample_corpus.registry), seed=0)
    params, report = train(sample_corpus.select(Partition.TRAIN), config)
    return params, report


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
