import functools

import numpy as np
import pytest

from tracefem import mesh
from tracefem.fespace import TraceSpaces
from tracefem.levelset import unit_sphere

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def sphere_spaces(level, with_p2=True):
    surface = unit_sphere()
    act = mesh.select_active(mesh.build_level(level), surface)
    return TraceSpaces(surface, act, with_p2=with_p2)


@pytest.fixture(scope="session")
def sphere2():
    return sphere_spaces(2)


@pytest.fixture(scope="session")
def sphere3():
    return sphere_spaces(3)


@pytest.fixture(scope="session")
def sphere4_p1():
    return sphere_spaces(4, with_p2=False)


def rotation(x):
    """Rigid rotation ``e3 x x``."""
    x = np.asarray(x)
    return np.stack([-x[..., 1], x[..., 0], np.zeros_like(x[..., 0])], axis=-1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
