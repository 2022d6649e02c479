import pytest

from biphoton import SourceModel, SpectralGrid, assemble_jsa
from biphoton.instruments import InstrumentConfig

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def model():
    return SourceModel()


@pytest.fixture(scope="session")
def grid():
    return SpectralGrid.reference_window()


@pytest.fixture(scope="session")
def amp(model, grid):
    return assemble_jsa(model, grid, "full_phase")


@pytest.fixture(scope="session")
def smooth_model():
    """Source without facet reflections: a single smooth ridge."""
    return SourceModel(r_te=0.0, r_tm=0.0)


@pytest.fixture
def instrument():
    return InstrumentConfig()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if passed else 'FAIL'}  {detail}")
