import numpy as np
import pytest

from reebtorus.hamiltonian import build_model
from reebtorus.torus_flows import InvariantSetSpec, TorusVectorField, TrigPoly

SQRT2 = float(np.sqrt(2.0))


@pytest.fixture(scope="session")
def default_model():
    """n = 2, V = (1, sqrt 2), full torus, C = 0.7, lambda = 1.5 (b resolves to 4)."""
    V = TorusVectorField.constant((1.0, SQRT2))
    return build_model(V, InvariantSetSpec.full_torus(2), 1.5, 0.7)


@pytest.fixture(scope="session")
def half_model():
    """Constant k = (1/2, 1/2) with b = 4."""
    V = TorusVectorField.constant((1.0, 1.0))
    return build_model(V, InvariantSetSpec.full_torus(2), 1.5, 0.7, b=4)


def wavy_field():
    nu1 = TrigPoly.from_terms(2, [((0, 0), 1.0, 0.0), ((1, 0), 0.2, 0.1), ((1, 1), 0.0, 0.15)])
    nu2 = TrigPoly.from_terms(2, [((0, 1), 0.0, 0.3)])  # vanishes on theta_2 = 0
    return TorusVectorField((nu1, nu2))


@pytest.fixture(scope="session")
def wavy_model():
    """Non-constant V with the invariant circle {theta_2 = 0}."""
    return build_model(wavy_field(), InvariantSetSpec.sub_torus(2, [1], [0.0]), 1.4, 0.6)


def random_polar(rng, count, n=2, r=(0.4, 3.5), z=1.5):
    return (
        rng.uniform(*r, (count, n)),
        rng.uniform(0.0, 2.0 * np.pi, (count, n)),
        rng.uniform(-z, z, count),
    )


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Call with (number, title, passed, detail) to add a line to the end-of-run summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, title, passed, detail):
        lines.append((number, f"criterion {number} ({title}): {'PASS' if passed else 'FAIL'}  {detail}"))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
