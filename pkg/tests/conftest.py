import numpy as np
import pytest

from toposeg import kernels

_criteria = []
_details = {}


@pytest.fixture(scope="session", autouse=True)
def _jit_warm():
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def record(request):
    """Attach a measured-value note to the acceptance summary line."""
    def _record(text):
        _details.setdefault(request.node.nodeid, []).append(text)
    return _record


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    tag = name.split("_")[1].upper() if name.startswith("test_a") else name
    _criteria.append((tag, report.nodeid, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for tag, nodeid, outcome in _criteria:
        name = nodeid.split("::")[-1]
        note = "; ".join(_details.get(nodeid, []))
        terminalreporter.write_line(f"{tag:<4} {outcome:<7} {name}  {note}".rstrip())
