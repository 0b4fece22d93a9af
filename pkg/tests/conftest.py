import pytest

from lsdunnett.datamodel import builtin_dataset


@pytest.fixture(scope="session")
def chol():
    return builtin_dataset("CHOL")


@pytest.fixture(scope="session")
def f4():
    return builtin_dataset("F4")


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_log():
    """Collects one summary line per acceptance criterion."""
    return _ACCEPTANCE.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
