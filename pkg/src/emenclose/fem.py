"""Nodal hexahedral finite elements for the regularized time-harmonic system.

The weak form discretized here is

    (mu^-1 curl E, curl F) + s (div(eps E), div(eps F)) - omega^2 (eps E, F)
        = <g, F>_{dD}

on the annulus (domain minus obstacle), with trilinear vector elements,
2x2x2 Gauss quadrature, componentwise essential constraints on the
axis-aligned boundaries, and the interface flux g entering as a natural
term.  The assembled matrix is symmetric; for the lossless background it
is real and (below the first cavity resonance) positive definite on the
constrained subspace.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .geometry import Medium
from .linalg import SolveDiagnostics, prepare_solver
from .mesh import Facets, Mesh

__all__ = (
    "FemOptions",
    "element_matrices",
    "SparseSystem",
    "assemble",
    "EssentialBC",
    "apply_essential",
    "InterfaceData",
    "NodalField",
    "FieldSolution",
    "SolverContext",
    "solve_mixed_bvp",
    "compute_H",
    "tangential_trace",
    "magnetic_trace",
    "energy_split",
    "l2_error",
    "divergence_linf",
)

log = logging.getLogger(__name__)

_G1 = 1.0 / math.sqrt(3.0)
_CORNER_SIGNS = np.array(
    [[(-1) ** (1 + (l >> d & 1)) for d in range(3)] for l in range(8)],
    dtype=float,
)  # local node l = li + 2*lj + 4*lk -> signs (+-1, +-1, +-1)


def _shape_values(ref_pts: np.ndarray) -> np.ndarray:
    """Trilinear shape values; ref_pts (..., 3) in [-1,1]^3 -> (..., 8)."""
    p = np.asarray(ref_pts, dtype=float)
    out = np.ones(p.shape[:-1] + (8,))
    for l in range(8):
        s = _CORNER_SIGNS[l]
        out[..., l] = 0.125 * np.prod(1.0 + p * s, axis=-1)
    return out


def _shape_gradients(ref_pts: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Physical gradients of the 8 shape functions; -> (..., 8, 3)."""
    p = np.asarray(ref_pts, dtype=float)
    grads = np.empty(p.shape[:-1] + (8, 3))
    for l in range(8):
        s = _CORNER_SIGNS[l]
        terms = 1.0 + p * s  # (..., 3)
        for d in range(3):
            other = [e for e in range(3) if e != d]
            grads[..., l, d] = (
                0.125 * s[d] * terms[..., other[0]] * terms[..., other[1]]
                * (2.0 / h[d])
            )
    return grads


def _gauss_points() -> np.ndarray:
    pts = np.array(
        [[sx * _G1, sy * _G1, sz * _G1]
         for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)]
    )
    return pts


def element_matrices(h: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """24x24 curl-curl, div-div and mass element matrices for spacing h.

    Dof order is 3*local_node + component.  The 2x2x2 Gauss rule is exact
    for every entry (integrands are at most triquadratic).
    """
    h = np.asarray(h, dtype=float)
    detj = float(np.prod(h)) / 8.0
    q = _gauss_points()
    N = _shape_values(q)               # (8q, 8n)
    G = _shape_gradients(q, h)         # (8q, 8n, 3)
    w = np.full(8, detj)
    Mn = np.einsum("q,qa,qb->ab", w, N, N)
    T1 = np.einsum("q,qad,qbd->ab", w, G, G)
    T2 = np.einsum("q,qad,qbe->abde", w, G, G)
    Kc = np.zeros((24, 24))
    Kd = np.zeros((24, 24))
    Me = np.zeros((24, 24))
    for c in range(3):
        for cp in range(3):
            block_rows = 3 * np.arange(8)[:, None] + c
            block_cols = 3 * np.arange(8)[None, :] + cp
            term = -T2[:, :, cp, c]
            if c == cp:
                term = term + T1
                Me[block_rows, block_cols] = Mn
            Kc[block_rows, block_cols] = term
            Kd[block_rows, block_cols] = T2[:, :, c, cp]
    return Kc, Kd, Me


@dataclass(frozen=True)
class FemOptions:
    """Discretization and solver knobs.

    s is the divergence-penalty weight of the regularized operator;
    trace_mode selects how magnetic traces are extracted from discrete
    fields ("layered" extrapolates the curl from the two interior
    cell-midplane layers to the surface, "onesided" samples the adjacent
    cell directly).
    """

    s: float = 1.0
    tol: float = 1e-10
    iter_cap_factor: float = 20.0
    direct_threshold: int = 20000
    preconditioner: str = "amg"
    trace_mode: str = "layered"


@dataclass
class SparseSystem:
    """Assembled symmetric operator over all 3*n_nodes dofs.

    Only annulus cells contribute; dofs of nodes interior to the obstacle
    have empty rows and are eliminated via the constraint machinery.
    """

    matrix: sp.csr_matrix
    mesh: Mesh
    medium: Medium
    options: FemOptions
    Kc: np.ndarray
    Kd: np.ndarray
    Me: np.ndarray
    cells: np.ndarray  # flat ids of assembled (annulus) cells


def assemble(mesh: Mesh, medium: Medium, options: Optional[FemOptions] = None) -> SparseSystem:
    """Assemble curl-curl + s div-div - omega^2 mass over annulus cells."""
    opts = options or FemOptions()
    Kc, Kd, Me = element_matrices(mesh.h)
    gamma = medium.eps0  # sigma = 0
    Ae = (1.0 / medium.mu0) * Kc + opts.s * gamma * gamma * Kd \
        - medium.omega**2 * gamma * Me
    cells = mesh.annulus_cell_ids()
    nodes = mesh.cell_nodes(cells)                       # (Nc, 8)
    dofs = (3 * nodes[:, :, None] + np.arange(3)).reshape(-1, 24)
    rows = np.repeat(dofs, 24, axis=1).ravel().astype(np.int32)
    cols = np.tile(dofs, (1, 24)).ravel().astype(np.int32)
    data = np.tile(Ae.ravel(), dofs.shape[0])
    ndof = 3 * mesh.n_nodes
    A = sp.coo_matrix((data, (rows, cols)), shape=(ndof, ndof)).tocsr()
    A.sum_duplicates()
    return SparseSystem(A, mesh, medium, opts, Kc, Kd, Me, cells)


# ---------------------------------------------------------------------------
# Essential constraints

@dataclass
class EssentialBC:
    """Componentwise essential constraints: values at fixed dofs.

    dofs are unique and sorted; every dof not listed stays free.  Nodes
    buried inside the obstacle are always present with value zero.
    """

    dofs: np.ndarray
    values: np.ndarray

    @property
    def count(self) -> int:
        return int(self.dofs.size)


@dataclass
class ConstraintStructure:
    """Which dofs are fixed, split by origin, for one (mesh, kind)."""

    outer_dofs: np.ndarray
    iface_dofs: np.ndarray
    inactive_dofs: np.ndarray
    all_dofs: np.ndarray  # unique sorted union

    def with_values(self, mesh: Mesh, outer_source=None, iface_source=None,
                    iface_scale: complex = 0.0) -> EssentialBC:
        """Fill constraint values by nodal interpolation of the sources.

        outer: tangential trace data nu x E = nu x E_source on the outer
        boundary (all three components at box edges and corners).
        interface: scale * source components (normal for hard obstacles,
        tangential for soft ones); zero when no source or scale 0.
        """
        coords = mesh.node_coords()
        values = np.zeros(self.all_dofs.size, dtype=complex)
        pos = np.searchsorted(self.all_dofs, self.outer_dofs)
        if outer_source is not None and self.outer_dofs.size:
            nd = self.outer_dofs // 3
            cp = self.outer_dofs % 3
            ev = outer_source.eval_E(coords[nd])
            values[pos] = ev[np.arange(nd.size), cp]
        if iface_source is not None and iface_scale != 0.0 and self.iface_dofs.size:
            posi = np.searchsorted(self.all_dofs, self.iface_dofs)
            nd = self.iface_dofs // 3
            cp = self.iface_dofs % 3
            ev = iface_source.eval_E(coords[nd])
            values[posi] = iface_scale * ev[np.arange(nd.size), cp]
        return EssentialBC(dofs=self.all_dofs, values=values)


def constraint_structure(mesh: Mesh, kind: str) -> ConstraintStructure:
    """Fixed-dof pattern for the outer boundary and obstacle interface.

    Outer faces fix the two tangential components of every face node
    (edge and corner nodes collect all three from adjacent faces).  Hard
    interfaces fix the facet-normal component, soft interfaces the two
    tangential ones; staircase edges take the union.
    """
    if kind not in ("hard", "soft"):
        raise ValueError("kind must be 'hard' or 'soft'")
    outer = []
    for axis in range(3):
        comps = [c for c in range(3) if c != axis]
        for side in (0, 1):
            nodes = mesh.outer_face_node_ids(axis, side)
            for c in comps:
                outer.append(3 * nodes + c)
    outer_dofs = np.unique(np.concatenate(outer))

    iface = []
    fac = mesh.interface_facets
    for axis in range(3):
        sel = fac.axis == axis
        if not np.any(sel):
            continue
        nodes = fac.nodes[sel].ravel()
        comps = [axis] if kind == "hard" else [c for c in range(3) if c != axis]
        for c in comps:
            iface.append(3 * nodes + c)
    iface_dofs = (np.unique(np.concatenate(iface)) if iface
                  else np.zeros(0, dtype=np.int64))

    interior = mesh.obstacle_interior_node_mask()
    inact_nodes = np.flatnonzero(interior)
    inactive = (3 * inact_nodes[:, None] + np.arange(3)).ravel()

    if np.intersect1d(outer_dofs, iface_dofs).size:
        raise ValueError("obstacle touches the outer boundary")
    all_dofs = np.unique(np.concatenate([outer_dofs, iface_dofs, inactive]))
    return ConstraintStructure(outer_dofs, iface_dofs, inactive, all_dofs)


def apply_essential(system: SparseSystem, bc: EssentialBC):
    """Eliminate fixed dofs; returns (A_ff, free_dofs, rhs_correction).

    rhs_correction = A[free, fixed] @ values must be subtracted from the
    natural right-hand side restricted to the free dofs.
    """
    ndof = system.matrix.shape[0]
    fixed_mask = np.zeros(ndof, dtype=bool)
    fixed_mask[bc.dofs] = True
    free = np.flatnonzero(~fixed_mask)
    A = system.matrix
    A_f = A[free]
    A_ff = A_f[:, free].tocsr()
    A_fc = A_f[:, bc.dofs].tocsr()
    correction = A_fc @ bc.values
    return A_ff, free, correction


# ---------------------------------------------------------------------------
# Fields

@dataclass
class NodalField:
    """Complex vector field with nodal values on the mesh."""

    mesh: Mesh
    values: np.ndarray  # (n_nodes, 3) complex

    def eval_E(self, points: np.ndarray) -> np.ndarray:
        """Trilinear interpolation at points (..., 3)."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 3)
        ijk, loc = self.mesh.locate(flat)
        cells = self.mesh.cell_id(ijk[:, 0], ijk[:, 1], ijk[:, 2])
        nodes = self.mesh.cell_nodes(cells)               # (M, 8)
        vals = self.values[nodes]                         # (M, 8, 3)
        N = _shape_values(loc)                            # (M, 8)
        out = np.einsum("ma,mac->mc", N, vals)
        return out.reshape(pts.shape)

    # niceties so analytic fields and nodal fields share one protocol
    eval = eval_E

    def eval_curl(self, points: np.ndarray) -> np.ndarray:
        """Curl of the interpolant at points strictly inside cells."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 3)
        ijk, loc = self.mesh.locate(flat)
        cells = self.mesh.cell_id(ijk[:, 0], ijk[:, 1], ijk[:, 2])
        nodes = self.mesh.cell_nodes(cells)
        vals = self.values[nodes]                         # (M, 8, 3)
        G = _shape_gradients(loc, self.mesh.h)            # (M, 8, 3)
        curl = np.empty_like(vals[:, 0, :])
        curl[:, 0] = np.einsum("ma,ma->m", G[:, :, 1], vals[:, :, 2]) \
            - np.einsum("ma,ma->m", G[:, :, 2], vals[:, :, 1])
        curl[:, 1] = np.einsum("ma,ma->m", G[:, :, 2], vals[:, :, 0]) \
            - np.einsum("ma,ma->m", G[:, :, 0], vals[:, :, 2])
        curl[:, 2] = np.einsum("ma,ma->m", G[:, :, 0], vals[:, :, 1]) \
            - np.einsum("ma,ma->m", G[:, :, 1], vals[:, :, 0])
        return curl.reshape(pts.shape)


@dataclass
class FieldSolution(NodalField):
    """Nodal solution plus solver diagnostics."""

    diagnostics: SolveDiagnostics = field(
        default_factory=lambda: SolveDiagnostics(0, 0.0, 0.0))
    kind: str = "hard"

    @property
    def iterations(self) -> int:
        return self.diagnostics.iterations

    @property
    def relres(self) -> float:
        return self.diagnostics.relres


@dataclass(frozen=True)
class InterfaceData:
    """Obstacle-interface data derived from a known incident field.

    Encodes the natural flux g = scale * i*omega * (nu x H_source) for
    hard obstacles together with the matching essential values
    (normal components scale * E_source for hard, tangential components
    scale * E_source for soft).  scale = -1 produces the reflected
    problem for the given probe.
    """

    source: object
    scale: complex = -1.0


# ---------------------------------------------------------------------------
# Solve orchestration

_FACET_W4 = None


def _facet_shape_matrix() -> np.ndarray:
    """(4 qp, 4 nodes) bilinear weights on a facet, fixed 2x2 Gauss rule."""
    global _FACET_W4
    if _FACET_W4 is None:
        qs = np.array([(-_G1, -_G1), (_G1, -_G1), (-_G1, _G1), (_G1, _G1)])
        ss = np.array([(-1, -1), (1, -1), (-1, 1), (1, 1)], dtype=float)
        _FACET_W4 = 0.25 * (1 + qs[:, None, 0] * ss[None, :, 0]) \
            * (1 + qs[:, None, 1] * ss[None, :, 1])
    return _FACET_W4


def interface_flux_rhs(mesh: Mesh, medium: Medium, data: InterfaceData) -> np.ndarray:
    """Assemble <g, F>_{dD} with g = scale * i*omega * nu x H_source."""
    fac = mesh.interface_facets
    rhs = np.zeros(3 * mesh.n_nodes, dtype=complex)
    if fac.count == 0 or data.scale == 0.0:
        return rhs
    H = data.source.eval_H(fac.qp.reshape(-1, 3)).reshape(fac.count, 4, 3)
    nrm = fac.normals()
    g = data.scale * 1j * medium.omega * np.cross(
        np.broadcast_to(nrm[:, None, :], H.shape), H)
    W = _facet_shape_matrix()                       # (4qp, 4node)
    # contrib[f, node, comp] = sum_q w_q g[f,q,comp] W[q,node]
    contrib = np.einsum("fq,fqc,qa->fac", fac.qw, g, W)
    dof = (3 * fac.nodes[:, :, None] + np.arange(3)).ravel()
    np.add.at(rhs, dof, contrib.ravel())
    return rhs


class SolverContext:
    """Reusable assembled-and-eliminated system for one (mesh, kind).

    The matrix, fixed-dof pattern, and factorization/preconditioner are
    independent of the probing direction and of tau, so one context
    serves an entire sweep of right-hand sides.
    """

    def __init__(self, mesh: Mesh, medium: Medium, kind: str = "hard",
                 options: Optional[FemOptions] = None):
        self.mesh = mesh
        self.medium = medium
        self.kind = kind
        self.options = options or FemOptions()
        self.system = assemble(mesh, medium, self.options)
        self.structure = constraint_structure(mesh, kind)
        ndof = self.system.matrix.shape[0]
        fixed_mask = np.zeros(ndof, dtype=bool)
        fixed_mask[self.structure.all_dofs] = True
        self.free = np.flatnonzero(~fixed_mask)
        A_f = self.system.matrix[self.free]
        self.A_ff = A_f[:, self.free].tocsr()
        self.A_fc = A_f[:, self.structure.all_dofs].tocsr()
        comp = self.free % 3
        near_null = np.zeros((self.free.size, 3))
        near_null[np.arange(self.free.size), comp] = 1.0
        self._solve = prepare_solver(
            self.A_ff,
            tol=self.options.tol,
            direct_threshold=self.options.direct_threshold,
            iter_cap_factor=self.options.iter_cap_factor,
            preconditioner=self.options.preconditioner,
            near_nullspace=near_null,
        )

    @property
    def n_free(self) -> int:
        return int(self.free.size)

    def solve(self, outer_source=None, interface: Optional[InterfaceData] = None
              ) -> FieldSolution:
        """Solve with outer data nu x E = nu x outer_source and the given
        interface data (both may be None for homogeneous data)."""
        iface_source = interface.source if interface is not None else None
        iface_scale = interface.scale if interface is not None else 0.0
        bc = self.structure.with_values(
            self.mesh, outer_source=outer_source,
            iface_source=iface_source if self.kind in ("hard", "soft") else None,
            iface_scale=iface_scale)
        rhs = np.zeros(3 * self.mesh.n_nodes, dtype=complex)
        if self.kind == "hard" and interface is not None:
            rhs = interface_flux_rhs(self.mesh, self.medium, interface)
        b_f = rhs[self.free] - self.A_fc @ bc.values
        x_f, diag = self._solve(b_f)
        log.info(diag.log_line())
        full = np.zeros(3 * self.mesh.n_nodes, dtype=complex)
        full[self.free] = x_f
        full[bc.dofs] = bc.values
        return FieldSolution(
            mesh=self.mesh, values=full.reshape(-1, 3),
            diagnostics=diag, kind=self.kind)


def solve_mixed_bvp(mesh: Mesh, medium: Medium, f=None,
                    interface: Optional[InterfaceData] = None,
                    kind: str = "hard",
                    options: Optional[FemOptions] = None,
                    context: Optional[SolverContext] = None) -> FieldSolution:
    """One-shot mixed boundary-value solve.

    f: field-like source whose tangential trace is imposed on the outer
    boundary (None for homogeneous data).  interface: InterfaceData for
    the obstacle boundary (None imposes the homogeneous obstacle
    condition of the given kind).  Passing a prebuilt context skips
    re-assembly.
    """
    ctx = context or SolverContext(mesh, medium, kind, options)
    if ctx.kind != kind:
        raise ValueError("context kind does not match requested kind")
    return ctx.solve(outer_source=f, interface=interface)


# ---------------------------------------------------------------------------
# Derived fields and traces

def compute_H(solution: NodalField, medium: Medium) -> NodalField:
    """Magnetic field H = curl(E) / (i omega mu) as a nodal field.

    The curl of each annulus cell's interpolant is evaluated at the cell
    corners and averaged over the adjacent annulus cells (equal volumes
    on the uniform mesh); nodes inside the obstacle stay zero.
    """
    mesh = solution.mesh
    cells = mesh.annulus_cell_ids()
    nodes = mesh.cell_nodes(cells)                        # (Nc, 8)
    vals = solution.values[nodes]                         # (Nc, 8, 3)
    corners = _CORNER_SIGNS                               # (8, 3) ref coords
    G = _shape_gradients(corners, mesh.h)                 # (8c, 8n, 3)
    curl = np.empty((cells.size, 8, 3), dtype=complex)
    curl[:, :, 0] = np.einsum("qa,ma->mq", G[:, :, 1], vals[:, :, 2]) \
        - np.einsum("qa,ma->mq", G[:, :, 2], vals[:, :, 1])
    curl[:, :, 1] = np.einsum("qa,ma->mq", G[:, :, 2], vals[:, :, 0]) \
        - np.einsum("qa,ma->mq", G[:, :, 0], vals[:, :, 2])
    curl[:, :, 2] = np.einsum("qa,ma->mq", G[:, :, 0], vals[:, :, 1]) \
        - np.einsum("qa,ma->mq", G[:, :, 1], vals[:, :, 0])
    acc = np.zeros((mesh.n_nodes, 3), dtype=complex)
    cnt = np.zeros(mesh.n_nodes)
    np.add.at(acc, nodes.ravel(), curl.reshape(-1, 3))
    np.add.at(cnt, nodes.ravel(), 1.0)
    cnt[cnt == 0.0] = 1.0
    acc /= cnt[:, None]
    acc /= 1j * medium.omega * medium.mu0
    return NodalField(mesh=mesh, values=acc)


def tangential_trace(fld, facets: Facets) -> np.ndarray:
    """nu x field at the facet quadrature points; (F, 4, 3) complex."""
    qp = facets.qp.reshape(-1, 3)
    vals = fld.eval_E(qp).reshape(facets.count, 4, 3)
    nrm = facets.normals()
    return np.cross(np.broadcast_to(nrm[:, None, :], vals.shape), vals)


def magnetic_trace(solution: NodalField, medium: Medium, facets: Facets,
                   inward: bool = True, mode: str = "layered") -> np.ndarray:
    """nu x H of a discrete solution at facet quadrature points.

    The curl is sampled on the one or two cell-midplane layers adjacent
    to the facet (on the annulus side; `inward=True` for outer facets,
    False for interface facets) and, in "layered" mode, extrapolated
    linearly to the surface.  Midplane sampling avoids the one-sided
    derivative loss of plain corner evaluation.
    """
    nrm = facets.normals()
    step = np.abs(nrm) @ solution.mesh.h  # (F,) spacing along the normal
    direction = -nrm if inward else nrm
    qp = facets.qp
    off1 = qp + 0.5 * step[:, None, None] * direction[:, None, :]
    c1 = solution.eval_curl(off1.reshape(-1, 3)).reshape(qp.shape)
    if mode == "layered":
        off2 = qp + 1.5 * step[:, None, None] * direction[:, None, :]
        c2 = solution.eval_curl(off2.reshape(-1, 3)).reshape(qp.shape)
        curl = 1.5 * c1 - 0.5 * c2
    elif mode == "onesided":
        curl = c1
    else:
        raise ValueError(f"unknown trace mode {mode!r}")
    H = curl / (1j * medium.omega * medium.mu0)
    return np.cross(np.broadcast_to(nrm[:, None, :], H.shape), H)


# ---------------------------------------------------------------------------
# Quadratic functionals

def _gather_cell_dofs(mesh: Mesh, values: np.ndarray, cells: np.ndarray) -> np.ndarray:
    nodes = mesh.cell_nodes(cells)
    return values[nodes].reshape(cells.size, 24)


def energy_split(mesh: Mesh, medium: Medium, values: np.ndarray,
                 cells: np.ndarray, s: float = 1.0) -> Tuple[float, float, float]:
    """(curl, mass, div) energies of a nodal field over the given cells:

    integral mu^-1 |curl E|^2, omega^2 eps |E|^2, and |div E|^2.
    """
    Kc, Kd, Me = element_matrices(mesh.h)
    V = _gather_cell_dofs(mesh, values, cells)
    curl = float(np.einsum("ci,ij,cj->", V.conj(), Kc, V).real) / medium.mu0
    mass = float(np.einsum("ci,ij,cj->", V.conj(), Me, V).real) \
        * medium.omega**2 * medium.eps0
    div = float(np.einsum("ci,ij,cj->", V.conj(), Kd, V).real)
    return curl, mass, div


def l2_error(mesh: Mesh, exact, approx: NodalField,
             cells: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(||approx - exact||_L2, ||exact||_L2) over cells by 2x2x2 Gauss."""
    if cells is None:
        cells = mesh.annulus_cell_ids()
    i, j, k = mesh.cell_ijk(cells)
    lo = np.asarray(mesh.geometry.box_lo)
    centers = lo + (np.stack([i, j, k], axis=1) + 0.5) * mesh.h
    offs = _gauss_points() * (0.5 * mesh.h)
    pts = centers[:, None, :] + offs[None, :, :]
    flat = pts.reshape(-1, 3)
    diff = approx.eval_E(flat) - exact.eval_E(flat)
    ref = exact.eval_E(flat)
    w = float(np.prod(mesh.h)) / 8.0
    err = math.sqrt(float(np.sum(np.abs(diff) ** 2)) * w)
    nrm = math.sqrt(float(np.sum(np.abs(ref) ** 2)) * w)
    return err, nrm


def divergence_linf(solution: NodalField, cells: Optional[np.ndarray] = None) -> float:
    """Max |div E| of the interpolant at cell centers (gauge diagnostic)."""
    mesh = solution.mesh
    if cells is None:
        cells = mesh.annulus_cell_ids()
    nodes = mesh.cell_nodes(cells)
    vals = solution.values[nodes]
    G = _shape_gradients(np.zeros(3), mesh.h)             # (8, 3)
    div = np.einsum("ad,mad->m", G, vals)
    return float(np.abs(div).max()) if div.size else 0.0
