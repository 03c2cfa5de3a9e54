import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from confspec.mesh import EQUILATERAL_LATTICE, SQUARE_LATTICE, flat_torus, icosphere

settings.register_profile(
    "confspec",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("confspec")


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(3)


@pytest.fixture(scope="session")
def sphere4():
    return icosphere(4)


@pytest.fixture(scope="session")
def eq_torus():
    return flat_torus(EQUILATERAL_LATTICE, 32)


@pytest.fixture(scope="session")
def sq_torus():
    return flat_torus(SQUARE_LATTICE, 32)


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    if request.param == "numpy":
        monkeypatch.setenv("CONFSPEC_DISABLE_NUMBA", "1")
    else:
        monkeypatch.delenv("CONFSPEC_DISABLE_NUMBA", raising=False)
    return request.param



def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {num:>2} {title}: {detail}")
