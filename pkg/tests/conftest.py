import pytest

from tilnsim.devices import CnotCircuit, ModeAnalyzer
from tilnsim.modesolver import ModeSolver

_acceptance_lines = []


def record_acceptance(line: str) -> None:
    """Collect one pass/fail line per acceptance criterion for the summary."""
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def solver():
    """One shared solver so mode solutions are memoized across the suite."""
    return ModeSolver()


@pytest.fixture(scope="session")
def material(solver):
    return solver.material


@pytest.fixture(scope="session")
def tm_analyzer(solver):
    return ModeAnalyzer.designed(solver, polarization="TM")


@pytest.fixture(scope="session")
def te_analyzer(solver):
    return ModeAnalyzer.designed(solver, polarization="TE")


@pytest.fixture(scope="session")
def cnot_circuit(solver):
    return CnotCircuit.designed(solver)
