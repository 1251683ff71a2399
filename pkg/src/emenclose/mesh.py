"""Structured hexahedral mesh over the domain box with obstacle tagging.

Cells are tagged obstacle/annulus by cell-center membership, so curved
obstacles are staircase approximations with O(h) boundary error (folded
into the reconstruction tolerances).  Node ids run x-fastest; cell (i,j,k)
owns nodes (i..i+1, j..j+1, k..k+1).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, IO, Optional, Tuple

import numpy as np

from .geometry import DomainGeometry, contains

__all__ = (
    "Facets",
    "Mesh",
    "build_mesh",
    "write_structured_vtk",
    "write_point_grid_vtk",
)

_GAUSS1 = 1.0 / np.sqrt(3.0)  # 2-point Gauss abscissa on [-1, 1]


@dataclass
class Facets:
    """Axis-aligned quadrilateral facets as a struct of arrays.

    normal = sign * e_axis.  For outer facets the normal points out of the
    domain; for interface facets it points out of the obstacle (into the
    annulus).  Each facet carries its 4 node ids (tangential axes in
    increasing order, first tangential axis fastest), the adjacent annulus
    cell, and a 2x2 Gauss rule (4 points, weight area/4 each).
    """

    axis: np.ndarray        # (F,) int, normal axis 0/1/2
    sign: np.ndarray        # (F,) int, +1 / -1
    nodes: np.ndarray       # (F, 4) int node ids
    cell: np.ndarray        # (F,) int flat id of adjacent annulus cell
    center: np.ndarray      # (F, 3) float facet centers
    qp: np.ndarray          # (F, 4, 3) quadrature points
    qw: np.ndarray          # (F, 4) quadrature weights

    @property
    def count(self) -> int:
        return int(self.axis.shape[0])

    @property
    def area(self) -> float:
        return float(self.qw.sum())

    def normals(self) -> np.ndarray:
        nrm = np.zeros((self.count, 3))
        nrm[np.arange(self.count), self.axis] = self.sign
        return nrm


def _empty_facets() -> Facets:
    return Facets(
        axis=np.zeros(0, dtype=np.int64),
        sign=np.zeros(0, dtype=np.int64),
        nodes=np.zeros((0, 4), dtype=np.int64),
        cell=np.zeros(0, dtype=np.int64),
        center=np.zeros((0, 3)),
        qp=np.zeros((0, 4, 3)),
        qw=np.zeros((0, 4)),
    )


@dataclass
class Mesh:
    """Uniform hexahedral mesh with obstacle tags and boundary facets."""

    geometry: DomainGeometry
    n: int
    h: np.ndarray                     # (3,) cell spacing
    obstacle_mask: np.ndarray         # (n, n, n) bool, x index first
    outer_facets: Facets
    interface_facets: Facets
    _node_coords: Optional[np.ndarray] = field(default=None, repr=False)

    # -- counts ---------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 3

    @property
    def n_cells(self) -> int:
        return self.n**3

    @property
    def n_obstacle_cells(self) -> int:
        return int(self.obstacle_mask.sum())

    @property
    def n_annulus_cells(self) -> int:
        return self.n_cells - self.n_obstacle_cells

    # -- geometry helpers -------------------------------------------------
    def node_grid_1d(self, axis: int) -> np.ndarray:
        lo = self.geometry.box_lo[axis]
        return lo + self.h[axis] * np.arange(self.n + 1)

    def node_coords(self) -> np.ndarray:
        """(n_nodes, 3) coordinates, x index fastest."""
        if self._node_coords is None:
            xs = [self.node_grid_1d(d) for d in range(3)]
            Z, Y, X = np.meshgrid(xs[2], xs[1], xs[0], indexing="ij")
            self._node_coords = np.stack(
                [X.ravel(), Y.ravel(), Z.ravel()], axis=1
            )
        return self._node_coords

    def node_id(self, i, j, k):
        m = self.n + 1
        return np.asarray(i) + m * (np.asarray(j) + m * np.asarray(k))

    def cell_id(self, i, j, k):
        n = self.n
        return np.asarray(i) + n * (np.asarray(j) + n * np.asarray(k))

    def cell_ijk(self, cell_ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.n
        c = np.asarray(cell_ids)
        return c % n, (c // n) % n, c // (n * n)

    def cell_centers(self) -> np.ndarray:
        """(n_cells, 3) centers, x index fastest."""
        ids = np.arange(self.n_cells)
        i, j, k = self.cell_ijk(ids)
        lo = np.asarray(self.geometry.box_lo)
        return lo + (np.stack([i, j, k], axis=1) + 0.5) * self.h

    def cell_nodes(self, cell_ids: np.ndarray) -> np.ndarray:
        """(M, 8) node ids; local order x fastest, then y, then z."""
        i, j, k = self.cell_ijk(np.asarray(cell_ids))
        corner = self.node_id(i, j, k)
        m = self.n + 1
        offs = np.array(
            [0, 1, m, m + 1, m * m, m * m + 1, m * m + m, m * m + m + 1]
        )
        # reorder to (li + 2*lj + 4*lk): [0,1,m,m+1,...] already matches
        return corner[:, None] + offs[None, :]

    def annulus_cell_ids(self) -> np.ndarray:
        mask = ~self.obstacle_mask
        return np.flatnonzero(np.transpose(mask, (2, 1, 0)).ravel())

    def obstacle_cell_ids(self) -> np.ndarray:
        return np.flatnonzero(np.transpose(self.obstacle_mask, (2, 1, 0)).ravel())

    def obstacle_interior_node_mask(self) -> np.ndarray:
        """True for nodes all of whose adjacent cells are obstacle cells."""
        n = self.n
        pad = np.zeros((n + 2, n + 2, n + 2), dtype=bool)
        pad[1:-1, 1:-1, 1:-1] = self.obstacle_mask
        interior = np.ones((n + 1, n + 1, n + 1), dtype=bool)
        for di in range(2):
            for dj in range(2):
                for dk in range(2):
                    interior &= pad[di:di + n + 1, dj:dj + n + 1, dk:dk + n + 1]
        return np.transpose(interior, (2, 1, 0)).ravel()

    def outer_face_node_ids(self, axis: int, side: int) -> np.ndarray:
        """Node ids on one outer face (side 0 = lo, 1 = hi)."""
        m = self.n + 1
        idx = [np.arange(m)] * 3
        idx[axis] = np.array([0 if side == 0 else m - 1])
        I, J, K = np.meshgrid(idx[0], idx[1], idx[2], indexing="ij")
        return self.node_id(I.ravel(), J.ravel(), K.ravel())

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Map points to (cell ijk (M,3) int, local coords in [-1,1]^3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.geometry.box_lo)
        rel = (pts - lo) / self.h
        ijk = np.clip(np.floor(rel).astype(np.int64), 0, self.n - 1)
        loc = 2.0 * (rel - ijk) - 1.0
        return ijk, loc

    def contains_obstacle_cells(self, points: np.ndarray) -> np.ndarray:
        """True where a point falls in a cell tagged as obstacle."""
        ijk, _ = self.locate(points)
        return self.obstacle_mask[ijk[:, 0], ijk[:, 1], ijk[:, 2]]


def _facet_quadrature(mesh: Mesh, axis: int, center: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    t1, t2 = [d for d in range(3) if d != axis]
    g1 = 0.5 * mesh.h[t1] * _GAUSS1
    g2 = 0.5 * mesh.h[t2] * _GAUSS1
    qp = np.repeat(center[:, None, :], 4, axis=1)
    offs = [(-g1, -g2), (g1, -g2), (-g1, g2), (g1, g2)]
    for q, (o1, o2) in enumerate(offs):
        qp[:, q, t1] += o1
        qp[:, q, t2] += o2
    area = float(mesh.h[t1] * mesh.h[t2])
    qw = np.full((center.shape[0], 4), area / 4.0)
    return qp, qw


def _facet_nodes(mesh: Mesh, axis: int, fi: np.ndarray, fj: np.ndarray,
                 fk: np.ndarray) -> np.ndarray:
    """Node ids of facets whose lower corner node is (fi, fj, fk), normal axis."""
    t1, t2 = [d for d in range(3) if d != axis]
    base = [fi, fj, fk]
    out = []
    for d2 in (0, 1):
        for d1 in (0, 1):
            idx = [b.copy() for b in base]
            idx[t1] = idx[t1] + d1
            idx[t2] = idx[t2] + d2
            out.append(mesh.node_id(idx[0], idx[1], idx[2]))
    return np.stack(out, axis=1)


def _build_outer_facets(mesh: Mesh) -> Facets:
    n = mesh.n
    lo = np.asarray(mesh.geometry.box_lo)
    axes, signs, nodes, cells, centers = [], [], [], [], []
    for axis in range(3):
        t1, t2 = [d for d in range(3) if d != axis]
        u, v = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        u = u.ravel()
        v = v.ravel()
        for side in (0, 1):
            ijk = [None, None, None]
            ijk[axis] = np.full_like(u, 0 if side == 0 else n - 1)
            ijk[t1] = u
            ijk[t2] = v
            cell = mesh.cell_id(ijk[0], ijk[1], ijk[2])
            fcorner = [x.copy() for x in ijk]
            if side == 1:
                fcorner[axis] = fcorner[axis] + 1
            nds = _facet_nodes(mesh, axis, fcorner[0], fcorner[1], fcorner[2])
            ctr = lo + (np.stack(ijk, axis=1) + 0.5) * mesh.h
            ctr[:, axis] = lo[axis] + (0.0 if side == 0 else n * mesh.h[axis])
            axes.append(np.full_like(u, axis))
            signs.append(np.full_like(u, -1 if side == 0 else 1))
            nodes.append(nds)
            cells.append(cell)
            centers.append(ctr)
    axis_a = np.concatenate(axes)
    center_a = np.concatenate(centers, axis=0)
    qps, qws = [], []
    for ax in range(3):
        sel = axis_a == ax
        qp, qw = _facet_quadrature(mesh, ax, center_a[sel])
        qps.append((sel, qp, qw))
    qp_a = np.zeros((axis_a.size, 4, 3))
    qw_a = np.zeros((axis_a.size, 4))
    for sel, qp, qw in qps:
        qp_a[sel] = qp
        qw_a[sel] = qw
    return Facets(
        axis=axis_a,
        sign=np.concatenate(signs),
        nodes=np.concatenate(nodes, axis=0),
        cell=np.concatenate(cells),
        center=center_a,
        qp=qp_a,
        qw=qw_a,
    )


def _build_interface_facets(mesh: Mesh) -> Facets:
    n = mesh.n
    mask = mesh.obstacle_mask
    if not mask.any():
        return _empty_facets()
    lo = np.asarray(mesh.geometry.box_lo)
    axes, signs, nodes, cells, centers = [], [], [], [], []
    for axis in range(3):
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[axis] = slice(0, n - 1)
        sl_hi[axis] = slice(1, n)
        a = mask[tuple(sl_lo)]
        b = mask[tuple(sl_hi)]
        # obstacle below / annulus above: normal +e_axis
        for obs_low, where in ((True, a & ~b), (False, ~a & b)):
            I, J, K = np.nonzero(where)
            if I.size == 0:
                continue
            ijk_low = [I, J, K]
            ijk_low[axis] = ijk_low[axis]  # cell on the low side of the face
            face_corner = [I.copy(), J.copy(), K.copy()]
            face_corner[axis] = face_corner[axis] + 1
            nds = _facet_nodes(mesh, axis, face_corner[0], face_corner[1], face_corner[2])
            ctr = lo + (np.stack([I, J, K], axis=1) + 0.5) * mesh.h
            ctr[:, axis] = lo[axis] + (np.asarray(face_corner[axis])) * mesh.h[axis]
            if obs_low:
                sign = 1
                ann = [I.copy(), J.copy(), K.copy()]
                ann[axis] = ann[axis] + 1
            else:
                sign = -1
                ann = [I, J, K]
            cell = mesh.cell_id(ann[0], ann[1], ann[2])
            axes.append(np.full(I.size, axis, dtype=np.int64))
            signs.append(np.full(I.size, sign, dtype=np.int64))
            nodes.append(nds)
            cells.append(cell)
            centers.append(ctr)
    axis_a = np.concatenate(axes)
    center_a = np.concatenate(centers, axis=0)
    qp_a = np.zeros((axis_a.size, 4, 3))
    qw_a = np.zeros((axis_a.size, 4))
    for ax in range(3):
        sel = axis_a == ax
        if sel.any():
            qp, qw = _facet_quadrature(mesh, ax, center_a[sel])
            qp_a[sel] = qp
            qw_a[sel] = qw
    return Facets(
        axis=axis_a,
        sign=np.concatenate(signs),
        nodes=np.concatenate(nodes, axis=0),
        cell=np.concatenate(cells),
        center=center_a,
        qp=qp_a,
        qw=qw_a,
    )


def _check_annulus_connected(mask: np.ndarray) -> None:
    """Flood fill over face adjacency; annulus must be one component."""
    ann = ~mask
    total = int(ann.sum())
    if total == 0:
        raise ValueError("obstacle covers the whole domain")
    start = tuple(int(v) for v in np.argwhere(ann)[0])
    seen = np.zeros_like(ann)
    seen[start] = True
    queue = deque([start])
    shape = ann.shape
    while queue:
        i, j, k = queue.popleft()
        for di, dj, dk in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
                           (0, 0, 1), (0, 0, -1)):
            p = (i + di, j + dj, k + dk)
            if (0 <= p[0] < shape[0] and 0 <= p[1] < shape[1]
                    and 0 <= p[2] < shape[2] and ann[p] and not seen[p]):
                seen[p] = True
                queue.append(p)
    if int(seen.sum()) != total:
        raise ValueError("annulus (domain minus obstacle) is not connected")


def build_mesh(geometry: DomainGeometry, n: int) -> Mesh:
    """Build the n^3 mesh, tag obstacle cells, and extract facets.

    Requires n >= 4 and, when an obstacle is present, at least two cell
    layers between the obstacle bounding box and the outer boundary.
    """
    if n < 4:
        raise ValueError("mesh resolution must be at least 4")
    lo = np.asarray(geometry.box_lo)
    hi = np.asarray(geometry.box_hi)
    h = (hi - lo) / n
    mesh = Mesh(
        geometry=geometry,
        n=n,
        h=h,
        obstacle_mask=np.zeros((n, n, n), dtype=bool),
        outer_facets=_empty_facets(),
        interface_facets=_empty_facets(),
    )
    if geometry.has_obstacle:
        blo, bhi = geometry.obstacle_bbox()
        if np.any(blo < lo + 2 * h) or np.any(bhi > hi - 2 * h):
            raise ValueError(
                "obstacle must keep a margin of at least two cells from the "
                f"outer boundary at resolution n={n}"
            )
        centers = mesh.cell_centers()
        inside = contains(geometry.obstacle, centers)
        # centers run x-fastest; mask is indexed [i, j, k]
        mask = inside.reshape(n, n, n).transpose(2, 1, 0)
        if not mask.any():
            raise ValueError(
                "obstacle present but captures no cell centers; refine the mesh"
            )
        mesh.obstacle_mask = mask
        _check_annulus_connected(mask)
    mesh.outer_facets = _build_outer_facets(mesh)
    mesh.interface_facets = _build_interface_facets(mesh)
    return mesh


# ---------------------------------------------------------------------------
# Legacy ASCII VTK output

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_vtk_header(fh: IO[str], title: str, dims: Tuple[int, int, int],
                      points: np.ndarray) -> None:
    fh.write("# vtk DataFile Version 3.0\n")
    fh.write(title + "\n")
    fh.write("ASCII\n")
    fh.write("DATASET STRUCTURED_GRID\n")
    fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
    fh.write(f"POINTS {points.shape[0]} float\n")
    for p in points:
        fh.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")


def write_point_grid_vtk(path: str, title: str, dims: Tuple[int, int, int],
                         points: np.ndarray,
                         vectors: Optional[Dict[str, np.ndarray]] = None,
                         scalars: Optional[Dict[str, np.ndarray]] = None) -> None:
    """Write a structured point grid with named vector/scalar point data.

    Complex vector fields are written as two real vector arrays with
    re_/im_ prefixes.  Point order must be x-fastest to match DIMENSIONS.
    """
    with open(path, "w") as fh:
        _write_vtk_header(fh, title, dims, points)
        fh.write(f"POINT_DATA {points.shape[0]}\n")
        for name, arr in (vectors or {}).items():
            arr = np.asarray(arr)
            parts = (
                [(name, arr)] if not np.iscomplexobj(arr)
                else [("re_" + name, arr.real), ("im_" + name, arr.imag)]
            )
            for pname, part in parts:
                fh.write(f"VECTORS {pname} float\n")
                for v in part:
                    fh.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
        for name, arr in (scalars or {}).items():
            arr = np.asarray(arr)
            fh.write(f"SCALARS {name} float 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in arr:
                fh.write(f"{_fmt(v)}\n")


def write_structured_vtk(path: str, mesh: Mesh,
                         vectors: Optional[Dict[str, np.ndarray]] = None,
                         scalars: Optional[Dict[str, np.ndarray]] = None,
                         title: str = "emenclose field dump") -> None:
    """Dump nodal fields on the mesh as legacy ASCII VTK."""
    m = mesh.n + 1
    write_point_grid_vtk(path, title, (m, m, m), mesh.node_coords(),
                         vectors=vectors, scalars=scalars)
