"""Shared fixtures: small meshes and solver contexts reused across modules.

Everything here stays below the direct-solver threshold so the whole
unit-test layer runs on sparse LU in seconds; the acceptance suite has
its own desk-scale fixtures in test_acceptance.py.
"""
from __future__ import annotations

import pytest

from emenclose.fem import FemOptions, SolverContext
from emenclose.geometry import AxisBox, DomainGeometry, Medium
from emenclose.mesh import build_mesh

BOX_LO = (-0.25, -0.25, -0.25)
BOX_HI = (0.25, 0.25, 0.25)


@pytest.fixture(scope="session")
def medium():
    return Medium()


@pytest.fixture(scope="session")
def empty_geometry():
    return DomainGeometry()


@pytest.fixture(scope="session")
def box_geometry():
    return DomainGeometry(obstacle=AxisBox(BOX_LO, BOX_HI), kind="hard")


@pytest.fixture(scope="session")
def mesh4_empty(empty_geometry):
    return build_mesh(empty_geometry, 4)


@pytest.fixture(scope="session")
def mesh8_empty(empty_geometry):
    return build_mesh(empty_geometry, 8)


@pytest.fixture(scope="session")
def mesh8_box(box_geometry):
    return build_mesh(box_geometry, 8)


@pytest.fixture(scope="session")
def ctx4_empty(mesh4_empty, medium):
    return SolverContext(mesh4_empty, medium, "hard", FemOptions())


@pytest.fixture(scope="session")
def ctx8_empty(mesh8_empty, medium):
    return SolverContext(mesh8_empty, medium, "hard", FemOptions())


@pytest.fixture(scope="session")
def ctx8_box(mesh8_box, medium):
    return SolverContext(mesh8_box, medium, "hard", FemOptions())
