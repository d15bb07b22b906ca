import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stokes_near_eval.geometry import Sphere, Spheroid
from stokes_near_eval.quadrature import build_quadrature, generate_targets

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def sphere():
    return Sphere((0.0, 0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def spheroid():
    return Spheroid((1.0, 0.5, 0.5))


@pytest.fixture(scope="session")
def sphere_qs16(sphere):
    return build_quadrature(sphere, 1.0 / 16)


@pytest.fixture(scope="session")
def spheroid_qs32(spheroid):
    return build_quadrature(spheroid, 1.0 / 32)


@pytest.fixture(scope="session")
def spheroid_targets32(spheroid):
    return generate_targets(spheroid, 1.0 / 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one ``PASS``/``FAIL`` line per acceptance criterion."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
