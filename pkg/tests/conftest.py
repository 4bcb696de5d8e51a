import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hawkesgame.experiment import ExperimentConfig  # noqa: E402


@pytest.fixture
def tiny_config(tmp_path):
    """A sweep small enough to run in a second or two."""
    return ExperimentConfig(L=6, b=(1.2, 1.6), cases=tuple(ExperimentConfig().cases), alpha=(0.5,), nu=(1.0,),
                            G_end=40, G_ave=10, replicates=2, seed=11, out=str(tmp_path / "out"), jobs=1)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
