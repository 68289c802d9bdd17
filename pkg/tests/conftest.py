import pytest

from qdfss.device import DeviceSpec, Grid2D

_CRITERIA: list[str] = []


def pytest_configure(config):
    config._qdfss_criteria = _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line, then assert."""

    def check(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" | {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return check


@pytest.fixture(scope="session")
def spec():
    return DeviceSpec()


@pytest.fixture(scope="session")
def coarse_grid(spec):
    """Cheap electrostatic grid for unit tests (~3.7 nm cells)."""
    return Grid2D.for_device(spec, 256)


@pytest.fixture(scope="session")
def ref_grid(spec):
    """The 512x512 reference grid."""
    return Grid2D.for_device(spec, 512)
