import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tetbiot.mesh import TetMesh

settings.register_profile(
    "default", deadline=None, max_examples=200,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

UNIT_TET = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture
def unit_tet_mesh():
    return TetMesh.build(UNIT_TET, np.array([[0, 1, 2, 3]]), np.tile([0.0, 0.0, 1.0], (4, 1)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
