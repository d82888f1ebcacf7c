import pytest
from hypothesis import HealthCheck, settings

from hextripod import hexgeom

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def flower():
    return hexgeom.build_flower(1)


@pytest.fixture(scope="session")
def flower_marked(flower):
    from hextripod.harness import FLOWER_MARKS
    return hexgeom.mark_boundary_edges(flower, FLOWER_MARKS)


@pytest.fixture(scope="session")
def disk10():
    return hexgeom.approximate_disk((0.0, 0.0), 1.0, 0.1)


@pytest.fixture(scope="session")
def disk02():
    return hexgeom.approximate_disk((0.0, 0.0), 1.0, 0.02)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: literal acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
