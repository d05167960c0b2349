import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sparsepose.grid import PatchGrid  # noqa: E402
from sparsepose.harness import Pipeline, PipelineConfig  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    # 256 x 192 input, 16 px patches -> 16 rows x 12 cols
    return PatchGrid(256, 192, 16)


@pytest.fixture(scope="session")
def toy_pipeline():
    return Pipeline.build(PipelineConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
