"""Synthesized boundary impedance data on the outer surface.

The impedance map sends the tangential electric trace f = nu x E on the
outer boundary to the tangential magnetic trace nu x H of the
corresponding obstacle solution.  For the empty domain and a source that
solves the background Maxwell system exactly, the map is evaluated
analytically; the obstacle map is synthesized by the forward solver.
The difference of the two maps (the gap) is what the indicator pairs
against, and it is computed directly from the reflected solution so its
accuracy does not ride on cancelling two large totals.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fem import (
    FieldSolution,
    InterfaceData,
    SolverContext,
    magnetic_trace,
    tangential_trace,
)
from .mesh import Facets

__all__ = (
    "BoundaryTrace",
    "surface_inner",
    "lambda_empty",
    "lambda_D",
    "impedance_gap",
    "reflected_solve",
    "write_trace_csv",
)

_FMT = "%.17g"


@dataclass
class BoundaryTrace:
    """Tangential vector data sampled at the facet quadrature points."""

    facets: Facets
    values: np.ndarray  # (F, 4, 3) complex

    def rotated(self) -> np.ndarray:
        """(nu x values) at the quadrature points.

        Applied to a trace that is already of the form nu x V this
        returns nu x (nu x V) = -V_t, so the tangential part of V is
        -self.rotated().
        """
        nrm = self.facets.normals()
        return np.cross(np.broadcast_to(nrm[:, None, :], self.values.shape),
                        self.values)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.facets.qw * np.sum(
            np.abs(self.values) ** 2, axis=2))))

    def __add__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.facets, self.values + other.values)

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.facets, self.values - other.values)


def surface_inner(a: BoundaryTrace, b: BoundaryTrace) -> complex:
    """integral a . conj(b) dS by the facet quadrature."""
    return complex(np.sum(a.facets.qw * np.sum(
        a.values * np.conj(b.values), axis=2)))


def lambda_empty(ctx_or_facets, medium_or_none=None, source=None) -> BoundaryTrace:
    """Impedance trace of the empty domain, evaluated analytically.

    The admissible sources carry their own exact magnetic partner, so
    nu x H_source on the outer facets is the exact empty-domain response
    to f = nu x E_source.  Accepts (context, source) or
    (facets, medium, source).
    """
    if isinstance(ctx_or_facets, SolverContext):
        facets = ctx_or_facets.mesh.outer_facets
        src = medium_or_none if source is None else source
    else:
        facets = ctx_or_facets
        src = source
    qp = facets.qp.reshape(-1, 3)
    H = src.eval_H(qp).reshape(facets.count, 4, 3)
    nrm = facets.normals()
    vals = np.cross(np.broadcast_to(nrm[:, None, :], H.shape), H)
    return BoundaryTrace(facets, vals)


def lambda_D(ctx: SolverContext, source) -> BoundaryTrace:
    """Obstacle impedance trace nu x H of the total field.

    Solves the full forward problem with outer data nu x E = nu x
    E_source and homogeneous obstacle conditions, then extracts the
    magnetic trace on the outer boundary.  This is the raw synthesized
    map; prefer impedance_gap for differences against lambda_empty.
    """
    sol = ctx.solve(outer_source=source)
    vals = magnetic_trace(sol, ctx.medium, ctx.mesh.outer_facets,
                          inward=True, mode=ctx.options.trace_mode)
    return BoundaryTrace(ctx.mesh.outer_facets, vals)


def reflected_solve(ctx: SolverContext, source) -> FieldSolution:
    """Reflected field for the given probing source.

    Homogeneous tangential data on the outer boundary; obstacle data
    chosen so that reflected + source satisfies the obstacle condition
    of ctx.kind.  An empty obstacle yields the zero field exactly.
    """
    if ctx.mesh.interface_facets.count == 0:
        return ctx.solve()
    return ctx.solve(interface=InterfaceData(source=source, scale=-1.0))


def impedance_gap(ctx: SolverContext, source,
                  reflected: Optional[FieldSolution] = None) -> BoundaryTrace:
    """(Lambda_D - Lambda_empty)(nu x E_source) on the outer facets.

    Computed as the magnetic trace of the reflected solution, which
    represents the gap directly instead of subtracting two traces that
    agree to leading order.
    """
    sol = reflected if reflected is not None else reflected_solve(ctx, source)
    if ctx.mesh.interface_facets.count == 0:
        shape = (ctx.mesh.outer_facets.count, 4, 3)
        return BoundaryTrace(ctx.mesh.outer_facets,
                             np.zeros(shape, dtype=complex))
    vals = magnetic_trace(sol, ctx.medium, ctx.mesh.outer_facets,
                          inward=True, mode=ctx.options.trace_mode)
    return BoundaryTrace(ctx.mesh.outer_facets, vals)


def electric_trace(facets: Facets, source) -> BoundaryTrace:
    """nu x E_source at the facet quadrature points."""
    return BoundaryTrace(facets, tangential_trace(source, facets))


def write_trace_csv(path, trace: BoundaryTrace) -> None:
    """Dump a boundary trace, one row per quadrature point."""
    facets = trace.facets
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["facet_id", "qp_id", "x", "y", "z",
                    "re_t0", "im_t0", "re_t1", "im_t1", "re_t2", "im_t2"])
        for f in range(facets.count):
            for q in range(4):
                p = facets.qp[f, q]
                v = trace.values[f, q]
                row = [str(f), str(q)]
                row += [_FMT % c for c in p]
                for comp in v:
                    row += [_FMT % comp.real, _FMT % comp.imag]
                w.writerow(row)
