import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from palpsdf.grid import GridGeometry, ScalarGrid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def sphere_field(n=81, half=2.0, radius=1.0, scale=1.0, ndim=3):
    geo = GridGeometry.from_bounds([-half] * ndim, [half] * ndim, n)
    r = np.linalg.norm(geo.points(), axis=1)
    return ScalarGrid(geo, scale * (r - radius)), r.reshape(geo.dims)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def doubled_sphere_reinit():
    from palpsdf.reinit import reinitialize

    f, r = sphere_field(81, scale=2.0)
    return f, r, reinitialize(f)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
