import sys

import numpy as np
import pytest
from hypothesis import settings

from objnav_bench.world import ObjectInstance, Pose, Scene, _footprint

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def box_scene(h=40, w=60, objects=(), start=Pose(0.5, 0.5, 0), goal="chair", walls=(), res=0.05):
    """Open room with a one-cell border wall; ``walls`` are (r0, r1, c0, c1) blocks."""
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    for r0, r1, c0, c1 in walls:
        occ[r0:r1, c0:c1] = True
    objs = []
    for cat, x, y in objects:
        r, c = int(np.floor(y / res)), int(np.floor(x / res))
        objs.append(ObjectInstance(cat, x, y, _footprint(r, c, occ)))
    return Scene(occ, tuple(objs), start, goal, "box", res)


@pytest.fixture
def make_box():
    return box_scene


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance")
        for line in verdicts:
            terminalreporter.write_line(line)
