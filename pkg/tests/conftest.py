import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def expected():
    return json.loads((HERE / "expected_values.json").read_text())


@pytest.fixture
def acceptance_record():
    """Call with (criterion_id, passed, detail) to list the criterion in the summary."""
    def record(cid: int, passed: bool, detail: str):
        _ACCEPTANCE[cid] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if passed else 'FAIL'}: {detail}")
