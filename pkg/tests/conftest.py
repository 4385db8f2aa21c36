import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mnplan.geometry import BoxObstacle, Scene, Workspace, empty_scene, sample_cloud

settings.register_profile("mnplan", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mnplan")


def make_scene(boxes, bound=20.0, dim=2, cloud=50, seed=0):
    """Scene from ``[(center, half_extents), ...]`` with a small surface cloud."""
    ws = Workspace(np.full(dim, -bound), np.full(dim, bound))
    obs = tuple(BoxObstacle(c, h) for c, h in boxes)
    bare = Scene(ws, obs, None, seed)
    if obs and cloud:
        return bare.with_cloud(sample_cloud(bare, cloud, seed))
    return bare


@pytest.fixture
def unit_box_scene():
    return make_scene([((0.0, 0.0), (1.0, 1.0))])


@pytest.fixture
def empty2d():
    return empty_scene(2)


@pytest.fixture
def sealed_scene():
    """A start region at the origin fully enclosed by four walls."""
    walls = [((0.0, 4.0), (5.0, 1.0)), ((0.0, -4.0), (5.0, 1.0)),
             ((4.0, 0.0), (1.0, 5.0)), ((-4.0, 0.0), (1.0, 5.0))]
    return make_scene(walls)


# one pass/fail line per acceptance criterion at the end of the run
_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    key = int(name.split("_")[2])
    if report.when == "call" or report.outcome != "passed":
        prev = _CRITERIA.get(key, "PASS")
        _CRITERIA[key] = "PASS" if prev == "PASS" and report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {key}: {_CRITERIA[key]}")
