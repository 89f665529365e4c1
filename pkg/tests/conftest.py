import numpy as np
import pytest

from gacl import gridnav, taskgen
from gacl.kernels import numba_impl, numpy_impl


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    return numba_impl if request.param == "numba" else numpy_impl


def empty_task(width=16, height=16, start=None, goal=None):
    occ = np.zeros((height, width), dtype=bool)
    taskgen.force_border(occ)
    s, g = taskgen.default_endpoints(width, height)
    return gridnav.GridTask(width, height, occ, start or s, goal or g)


@pytest.fixture
def empty16():
    return empty_task()


@pytest.fixture(scope="session")
def small_refs():
    return taskgen.make_reference_set(5, n=40)


@pytest.fixture(scope="session")
def random_maps():
    return [taskgen.generate_reference(1000 + i, 16, 16, 0.2 + 0.005 * i, 2).occupancy for i in range(50)]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
