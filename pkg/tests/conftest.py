import pytest

from wishart_mac.ensemble import ChannelConfig, EnsembleContext

# reference scenario: n_A = 4, n_B = 5, a = 1, b = 1/3
NA, NB, A, B = 4, 5, 1.0, 1.0 / 3.0

ACCEPTANCE_LINES: list[str] = []


def scenario(n, a=A, b=B, na=NA, nb=NB) -> EnsembleContext:
    return EnsembleContext(ChannelConfig(n, na, nb, a, b))


@pytest.fixture(scope="session")
def ctx2():
    return scenario(2)


@pytest.fixture(scope="session")
def ctx3():
    return scenario(3)


@pytest.fixture(scope="session")
def ctx4():
    return scenario(4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
