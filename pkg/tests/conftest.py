import numpy as np
import pytest

from netmoment.kernels import Geometry
from netmoment.spectral import gram_assemble, rhs_vector, target_norm2

N_REF = 250


@pytest.fixture(scope="session")
def geometry():
    return Geometry.reference()


@pytest.fixture(scope="session")
def gram(geometry):
    return gram_assemble(geometry, N_REF, check=False)


@pytest.fixture(scope="session")
def rhs(geometry):
    return {t: rhs_vector(geometry, N_REF, t) for t in ("e1", "e2")}


@pytest.fixture(scope="session")
def norm2(geometry):
    return target_norm2(geometry, "e1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(module, "RESULTS", {})
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
