import numpy as np
import pytest

from widedeg.mesh import TriMesh, interpolate
from widedeg.solver import RhsSpec, SolveConfig, minimize

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _ACCEPTANCE.append((number, title, call.excinfo is None, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f": {detail}" if detail else "")
        )


@pytest.fixture(scope="session")
def manufactured():
    """Solved manufactured problems keyed by ``(p, n)``, computed lazily."""
    cache = {}

    def get(p=2.0, n=16):
        key = (float(p), int(n))
        if key not in cache:
            mesh = TriMesh((1.0, 2.0, 0.0, 1.0), n, n)
            g = interpolate(mesh, lambda x, y: -x * x)
            cache[key] = minimize(g, RhsSpec.manufactured(p), p, SolveConfig(tolerance=1e-8))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
