import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from erthermo.synth import SynthesisConfig  # noqa: E402


@pytest.fixture
def default_synth():
    return SynthesisConfig()


@pytest.fixture(autouse=True)
def _isolated_output_root(monkeypatch):
    monkeypatch.delenv("ERTHERMO_OUTPUT_ROOT", raising=False)


VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
