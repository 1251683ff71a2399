from __future__ import annotations

import numpy as np
import pytest

from emenclose.geometry import AxisBox, Ball, DomainGeometry, contains
from emenclose.mesh import build_mesh, write_point_grid_vtk, write_structured_vtk


def test_empty_mesh_counts(mesh4_empty):
    m = mesh4_empty
    assert m.n_nodes == 125
    assert m.n_cells == 64
    assert m.n_annulus_cells == 64
    assert m.n_obstacle_cells == 0
    assert m.interface_facets.count == 0
    assert m.outer_facets.count == 96
    assert m.outer_facets.area == pytest.approx(24.0)


def test_box_mesh_counts(mesh8_box):
    m = mesh8_box
    # the [-0.25, 0.25]^3 box at n = 8 captures exactly the 2^3 center cells
    assert m.n_obstacle_cells == 8
    assert m.n_annulus_cells == 504
    assert m.interface_facets.count == 24
    assert m.interface_facets.area == pytest.approx(1.5)
    assert m.outer_facets.count == 384
    assert m.outer_facets.area == pytest.approx(24.0)
    # exactly one node (the center) is buried inside the obstacle
    assert int(m.obstacle_interior_node_mask().sum()) == 1


def test_box_staircase_is_exact_here(mesh8_box):
    # cell centers inside the box reproduce the box exactly at this n
    centers = mesh8_box.cell_centers()
    inside = contains(mesh8_box.geometry.obstacle, centers)
    mask = inside.reshape(8, 8, 8).transpose(2, 1, 0)
    assert np.array_equal(mask, mesh8_box.obstacle_mask)
    i, j, k = np.nonzero(mesh8_box.obstacle_mask)
    assert set(i) == {3, 4} and set(j) == {3, 4} and set(k) == {3, 4}


def test_ball_staircase_cell_count():
    geo = DomainGeometry(obstacle=Ball((0.0, 0.0, 0.0), 0.3))
    m = build_mesh(geo, 8)
    # only the 8 innermost cell centers fall inside radius 0.3
    assert m.n_obstacle_cells == 8
    assert m.interface_facets.count == 24


def test_interface_normals_point_out_of_obstacle(mesh8_box):
    fac = mesh8_box.interface_facets
    nrm = fac.normals()
    eps = 0.05
    box = mesh8_box.geometry.obstacle
    assert not contains(box, fac.center + eps * nrm).any()
    assert contains(box, fac.center - eps * nrm).all()
    # the adjacent cell recorded for each facet lies in the annulus
    i, j, k = mesh8_box.cell_ijk(fac.cell)
    assert not mesh8_box.obstacle_mask[i, j, k].any()


def test_outer_normals_point_out_of_domain(mesh4_empty):
    fac = mesh4_empty.outer_facets
    nrm = fac.normals()
    outside = fac.center + 0.05 * nrm
    lo = np.asarray(mesh4_empty.geometry.box_lo)
    hi = np.asarray(mesh4_empty.geometry.box_hi)
    assert not np.all((outside >= lo) & (outside <= hi), axis=1).any()


def test_facet_nodes_lie_on_facet_plane(mesh8_box):
    for fac in (mesh8_box.outer_facets, mesh8_box.interface_facets):
        coords = mesh8_box.node_coords()[fac.nodes]       # (F, 4, 3)
        planes = np.take_along_axis(
            coords, fac.axis[:, None, None], axis=2)[:, :, 0]
        expected = fac.center[np.arange(fac.count), fac.axis]
        assert np.allclose(planes, expected[:, None])


def test_facet_quadrature(mesh8_box):
    fac = mesh8_box.outer_facets
    # four equal weights summing to the facet area
    assert np.allclose(fac.qw, 0.25**2 / 4.0)
    # quadrature points stay on the facet plane and inside its extent
    plane = fac.qp[np.arange(fac.count), :, fac.axis]
    assert np.allclose(plane, fac.center[np.arange(fac.count), fac.axis][:, None])
    spread = np.abs(fac.qp - fac.center[:, None, :]).max()
    assert spread < 0.125


def test_node_ordering_and_coords(mesh4_empty):
    m = mesh4_empty
    # node ids run x fastest
    assert m.node_id(1, 0, 0) == 1
    assert m.node_id(0, 1, 0) == 5
    assert m.node_id(0, 0, 1) == 25
    coords = m.node_coords()
    assert np.allclose(coords[m.node_id(2, 3, 1)],
                       [m.node_grid_1d(0)[2], m.node_grid_1d(1)[3],
                        m.node_grid_1d(2)[1]])


def test_cell_nodes_order_matches_local_corner_convention(mesh4_empty):
    m = mesh4_empty
    nodes = m.cell_nodes(np.array([m.cell_id(1, 2, 3)]))[0]
    coords = m.node_coords()[nodes]
    base = coords[0]
    # local node l = li + 2*lj + 4*lk
    for l in range(8):
        off = np.array([l & 1, (l >> 1) & 1, (l >> 2) & 1]) * m.h
        assert np.allclose(coords[l], base + off)


def test_locate_roundtrip(mesh8_box):
    rng = np.random.default_rng(5)
    pts = rng.uniform(-0.99, 0.99, size=(50, 3))
    ijk, loc = mesh8_box.locate(pts)
    assert (np.abs(loc) <= 1.0 + 1e-12).all()
    lo = np.asarray(mesh8_box.geometry.box_lo)
    rebuilt = lo + (ijk + 0.5 * (loc + 1.0)) * mesh8_box.h
    assert np.allclose(rebuilt, pts)


def test_annulus_and_obstacle_ids_partition(mesh8_box):
    ann = mesh8_box.annulus_cell_ids()
    obs = mesh8_box.obstacle_cell_ids()
    assert ann.size + obs.size == mesh8_box.n_cells
    assert np.intersect1d(ann, obs).size == 0
    centers = mesh8_box.cell_centers()
    assert contains(mesh8_box.geometry.obstacle, centers[obs]).all()
    assert not contains(mesh8_box.geometry.obstacle, centers[ann]).any()


def test_build_mesh_rejects_bad_resolutions():
    with pytest.raises(ValueError, match="at least 4"):
        build_mesh(DomainGeometry(), 3)
    # at n = 4 the default box cannot keep a two-cell boundary margin
    geo = DomainGeometry(obstacle=AxisBox((-0.25,) * 3, (0.25,) * 3))
    with pytest.raises(ValueError, match="margin"):
        build_mesh(geo, 4)
    # an obstacle too small to capture any cell center is rejected
    tiny = DomainGeometry(obstacle=Ball((0.0, 0.0, 0.0), 0.05))
    with pytest.raises(ValueError, match="no cell centers"):
        build_mesh(tiny, 8)


def test_structured_vtk_roundtrip(tmp_path, mesh4_empty):
    rng = np.random.default_rng(2)
    E = rng.normal(size=(125, 3)) + 1j * rng.normal(size=(125, 3))
    path = tmp_path / "field.vtk"
    write_structured_vtk(str(path), mesh4_empty, vectors={"E": E},
                         scalars={"tag": np.arange(125.0)})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert "DATASET STRUCTURED_GRID" in lines
    assert "DIMENSIONS 5 5 5" in lines
    assert "POINTS 125 float" in lines
    assert "VECTORS re_E float" in lines
    assert "VECTORS im_E float" in lines
    assert "SCALARS tag float 1" in lines
    # %.17g rendering reparses exactly
    first_re = lines.index("VECTORS re_E float") + 1
    parsed = [float(v) for v in lines[first_re].split()]
    assert parsed == list(E[0].real)


def test_point_grid_vtk_scalars_only(tmp_path):
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    path = tmp_path / "grid.vtk"
    write_point_grid_vtk(str(path), "probe grid", (2, 1, 1), pts,
                         scalars={"mark": np.array([0.5, 1.5])})
    text = path.read_text()
    assert "probe grid" in text
    assert "LOOKUP_TABLE default" in text
    assert text.strip().splitlines()[-1] == "1.5"
