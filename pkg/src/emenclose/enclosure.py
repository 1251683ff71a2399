"""Support-function sweeps and half-space enclosure of the obstacle.

One solver context serves the whole sweep: the probing field enters
only through boundary data, so the assembled operator and its
preconditioner are shared by every (direction, tau) pair.  Solves run
at the recentered threshold t = h_Omega(rho) to keep the exponential
factors in range; every other threshold follows from the exact shift
law, so t is never swept by re-solving.  The support value along rho
is the growth rate of log |I(tau, 0)| in 2 tau, read off either by
least squares over the tau grid or from its last point.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .cgo import make_frame
from .fem import FemOptions, SolverContext
from .geometry import (
    DomainGeometry,
    Empty,
    Medium,
    box_support,
    support_function,
)
from .indicator import IndicatorSample, compute_indicator
from .linalg import SolverError
from .mesh import Mesh, build_mesh, write_point_grid_vtk

__all__ = (
    "SweepConfig",
    "SupportEstimate",
    "HullResult",
    "axis_directions",
    "diagonal_directions",
    "fibonacci_directions",
    "estimate_support",
    "sweep",
    "half_space_hull",
    "write_support_csv",
    "write_hull_vtk",
)

_FMT = "%.17g"
DEFAULT_TAU_GRID = (2.0, 4.0, 6.0, 8.0)
DEFAULT_FIT = "prefactor"
# indicator magnitudes below this multiple of (solver tol * trace norms)
# count as zero and drive the no-obstacle path
NOISE_FACTOR = 1e3
DEFAULT_GRID_N = 64
# minimum usable (tau, I) pairs per fit mode
_MIN_SAMPLES = {"last": 1, "slope": 3, "prefactor": 4}


def axis_directions() -> np.ndarray:
    """The six signed coordinate directions."""
    eye = np.eye(3)
    return np.concatenate([eye, -eye], axis=0)


def diagonal_directions() -> np.ndarray:
    """The eight normalized (+-1, +-1, +-1) directions."""
    corners = np.array([(i, j, k) for k in (-1.0, 1.0) for j in (-1.0, 1.0)
                        for i in (-1.0, 1.0)])
    return corners / math.sqrt(3.0)


def fibonacci_directions(count: int) -> np.ndarray:
    """Deterministic quasi-uniform unit directions on the sphere."""
    if count < 1:
        raise ValueError("direction count must be positive")
    i = np.arange(count, dtype=float)
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = 2.0 * math.pi * i / golden
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@dataclass(frozen=True)
class SweepConfig:
    """Directions, tau grid, and fit controls for a support sweep.

    fit selects how the support value is read off the tau grid:
    "prefactor" fits log |I| = 2 tau h + p log tau + c with the
    prefactor power p free (needs at least 4 tau values; the contact
    geometry sets p, so no fixed power is assumed), "slope" is the
    fixed-power least-squares growth rate (needs at least 3), "last" a
    single-point read at tau_max.  For slope and last the correction
    flag subtracts the quadratic prefactor 2 log tau from log |I|
    first; prefactor ignores it.
    """

    directions: np.ndarray = field(default_factory=axis_directions)
    tau_grid: Tuple[float, ...] = DEFAULT_TAU_GRID
    fit: str = DEFAULT_FIT
    correction: bool = True
    noise_factor: float = NOISE_FACTOR

    def __post_init__(self) -> None:
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if dirs.ndim != 2 or dirs.shape[1] != 3 or dirs.shape[0] == 0:
            raise ValueError("directions must be a nonempty (N, 3) array")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(norms <= 0.0):
            raise ValueError("directions must be nonzero vectors")
        dirs = dirs / norms[:, None]
        dirs.flags.writeable = False
        object.__setattr__(self, "directions", dirs)
        taus = tuple(float(t) for t in self.tau_grid)
        if not taus or taus[0] <= 0.0:
            raise ValueError("tau_grid must contain positive values")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("tau_grid strictly increasing")
        if self.fit not in _MIN_SAMPLES:
            raise ValueError("fit must be 'prefactor', 'slope', or 'last'")
        if len(taus) < _MIN_SAMPLES[self.fit]:
            raise ValueError(f"{self.fit} fit needs a tau_grid of length "
                             f">= {_MIN_SAMPLES[self.fit]}")
        object.__setattr__(self, "tau_grid", taus)


@dataclass(frozen=True)
class SupportEstimate:
    """Estimated support value along one direction.

    samples holds the (tau, log |I(tau, 0)|) pairs that entered the
    fit.  detected is False when the indicator stayed at the noise
    floor (or the solve failed); h_hat and fit_residual are then NaN
    and message says why.
    """

    rho: np.ndarray
    h_hat: float
    fit_residual: float
    samples: Tuple[Tuple[float, float], ...]
    detected: bool = True
    message: str = ""


@dataclass(frozen=True)
class HullResult:
    """Half-space intersection of the support estimates on a grid.

    membership is indexed like the mesh obstacle mask (x index first)
    over a grid_n^3 cell-center grid covering the domain box.
    support_error is the sup over directions of |h_hat - h_true| when
    the true obstacle is known, NaN otherwise.
    """

    half_spaces: Tuple[Tuple[np.ndarray, float], ...]
    grid_n: int
    membership: np.ndarray
    volume: float
    support_error: float
    centers: Tuple[np.ndarray, np.ndarray, np.ndarray]


def _fit_support(taus, logs, fit: str, correction: bool) -> Tuple[float, float]:
    t = np.asarray(taus, dtype=float)
    y = np.asarray(logs, dtype=float)
    x = 2.0 * t
    if fit == "prefactor":
        A = np.stack([x, np.log(t), np.ones_like(x)], axis=1)
    else:
        if correction:
            y = y - 2.0 * np.log(t)
        if fit == "last":
            return float(y[-1] / x[-1]), 0.0
        A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def _undetected(rho, samples, message: str) -> SupportEstimate:
    return SupportEstimate(
        rho=np.asarray(rho, dtype=float),
        h_hat=float("nan"),
        fit_residual=float("nan"),
        samples=tuple(samples),
        detected=False,
        message=message,
    )


def estimate_support(samples, rho=(0.0, 0.0, 1.0), fit: str = DEFAULT_FIT,
                     correction: bool = True,
                     noise_floor: float = 0.0) -> SupportEstimate:
    """Fit a support value from (tau, I(tau, 0)) pairs.

    Parameters
    ----------
    samples : sequence of (tau, I)
        Indicator values at threshold t = 0; I may be complex, only the
        magnitude enters.  Pairs with |I| <= noise_floor are dropped.
    rho : array_like
        Direction label carried into the estimate.
    fit, correction
        As in SweepConfig.

    Returns
    -------
    SupportEstimate
        detected = False (with h_hat NaN) when fewer usable samples
        remain than the fit needs; that is the no-obstacle signal.
    """
    if fit not in _MIN_SAMPLES:
        raise ValueError("fit must be 'prefactor', 'slope', or 'last'")
    taus, logs = [], []
    for tau, value in samples:
        mag = abs(value)
        if mag <= noise_floor or mag == 0.0:
            continue
        taus.append(float(tau))
        logs.append(math.log(mag))
    pairs = tuple(zip(taus, logs))
    if len(taus) < _MIN_SAMPLES[fit]:
        return _undetected(rho, pairs, "no obstacle detected along rho")
    h_hat, resid = _fit_support(taus, logs, fit, correction)
    return SupportEstimate(
        rho=np.asarray(rho, dtype=float),
        h_hat=h_hat,
        fit_residual=resid,
        samples=pairs,
    )


def sweep(config: SweepConfig, geometry: DomainGeometry, medium: Medium,
          n: int = 32, kind: Optional[str] = None,
          options: Optional[FemOptions] = None,
          mesh: Optional[Mesh] = None,
          context: Optional[SolverContext] = None,
          collect: Optional[Callable[[IndicatorSample], None]] = None,
          ) -> List[SupportEstimate]:
    """Estimate the support function along every configured direction.

    Builds one mesh and one solver context (unless given), then runs
    one reflected solve per (direction, tau) at the recentered
    threshold t = h_Omega(rho) and shifts to t = 0 in log space.

    Parameters
    ----------
    config : SweepConfig
    geometry : DomainGeometry
    medium : Medium
    n : int
        Mesh resolution (ignored when mesh or context is passed).
    kind : str, optional
        Obstacle condition; defaults to geometry.kind.
    collect : callable, optional
        Receives every IndicatorSample, e.g. for CSV dumps.

    Returns
    -------
    list of SupportEstimate
        In direction order.  A solver failure marks that direction
        undetected with the failure message; it is not fatal.
    """
    kind = kind or geometry.kind
    options = options or FemOptions()
    msh = mesh if mesh is not None else build_mesh(geometry, n)
    ctx = context if context is not None else SolverContext(
        msh, medium, kind, options)
    estimates: List[SupportEstimate] = []
    for rho in config.directions:
        frame = make_frame(rho)
        t_solve = box_support(geometry.box_lo, geometry.box_hi, rho)
        taus, logs = [], []
        try:
            for tau in config.tau_grid:
                sample = compute_indicator(ctx, frame, tau, t=t_solve)
                if collect is not None:
                    collect(sample)
                floor = (config.noise_factor * options.tol
                         * sample.f_norm * sample.gap_norm)
                mag = abs(sample.value)
                if mag <= floor or mag == 0.0:
                    continue
                taus.append(float(tau))
                logs.append(sample.log_abs_at(0.0))
        except SolverError as exc:
            estimates.append(_undetected(rho, zip(taus, logs),
                                         f"solver failure: {exc}"))
            continue
        if len(taus) < _MIN_SAMPLES[config.fit]:
            estimates.append(_undetected(rho, zip(taus, logs),
                                         "no obstacle detected along rho"))
            continue
        h_hat, resid = _fit_support(taus, logs, config.fit, config.correction)
        estimates.append(SupportEstimate(
            rho=np.asarray(rho, dtype=float),
            h_hat=h_hat,
            fit_residual=resid,
            samples=tuple(zip(taus, logs)),
        ))
    return estimates


def _center_grid(geometry: DomainGeometry, grid_n: int):
    lo = np.asarray(geometry.box_lo)
    hi = np.asarray(geometry.box_hi)
    h = (hi - lo) / grid_n
    centers = tuple(lo[d] + h[d] * (np.arange(grid_n) + 0.5) for d in range(3))
    Z, Y, X = np.meshgrid(centers[2], centers[1], centers[0], indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)  # x fastest
    return centers, pts, float(np.prod(h))


def half_space_hull(estimates, geometry: DomainGeometry,
                    grid_n: int = DEFAULT_GRID_N) -> HullResult:
    """Intersect the estimated half-spaces over a cell-center grid.

    A point belongs to the hull iff x . rho <= h_hat(rho) for every
    detected estimate.  Raises ValueError for fewer than 4 detected
    directions, a degenerate direction set, or an empty intersection
    (inconsistent estimates).
    """
    usable = [e for e in estimates if e.detected and math.isfinite(e.h_hat)]
    if len(usable) < 4:
        raise ValueError("need at least 4 detected directions for a hull")
    R = np.stack([e.rho for e in usable])
    if np.linalg.matrix_rank(R) < 3:
        raise ValueError("hull directions are degenerate (rank < 3)")
    centers, pts, cell_vol = _center_grid(geometry, grid_n)
    member = np.ones(pts.shape[0], dtype=bool)
    for e in usable:
        member &= (pts @ e.rho) <= e.h_hat + 1e-12
    if not member.any():
        raise ValueError("estimated half-spaces have empty intersection; "
                         "inconsistent estimates")
    volume = float(member.sum()) * cell_vol
    if isinstance(geometry.obstacle, Empty):
        sup_err = float("nan")
    else:
        sup_err = max(
            abs(e.h_hat - support_function(geometry.obstacle, e.rho))
            for e in usable)
    membership = member.reshape(grid_n, grid_n, grid_n).transpose(2, 1, 0)
    return HullResult(
        half_spaces=tuple((e.rho, float(e.h_hat)) for e in usable),
        grid_n=grid_n,
        membership=membership,
        volume=volume,
        support_error=float(sup_err),
        centers=centers,
    )


def write_support_csv(path, estimates, geometry: Optional[DomainGeometry] = None
                      ) -> None:
    """One row per direction: rho, h_hat, h_true (NaN if unknown), residual."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho_x", "rho_y", "rho_z", "h_hat", "h_true",
                    "fit_residual"])
        for e in estimates:
            h_true = float("nan")
            if geometry is not None and not isinstance(geometry.obstacle, Empty):
                h_true = support_function(geometry.obstacle, e.rho)
            row = [_FMT % c for c in e.rho]
            row += [_FMT % e.h_hat, _FMT % h_true, _FMT % e.fit_residual]
            w.writerow(row)


def write_hull_vtk(path, hull: HullResult) -> None:
    """Hull membership grid as a legacy ASCII VTK structured point grid."""
    cx, cy, cz = hull.centers
    Z, Y, X = np.meshgrid(cz, cy, cx, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    values = hull.membership.transpose(2, 1, 0).ravel().astype(float)
    write_point_grid_vtk(
        path, "emenclose hull membership",
        (hull.grid_n, hull.grid_n, hull.grid_n), pts,
        scalars={"membership": values},
    )
