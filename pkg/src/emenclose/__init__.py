"""Obstacle reconstruction from boundary impedance data by CGO probing."""
from __future__ import annotations

__version__ = "0.1.0"

from .geometry import (
    AxisBox,
    Ball,
    DomainGeometry,
    Empty,
    Medium,
    support_function,
    wavenumber,
)
from .cgo import (
    CgoField,
    DirectionFrame,
    PlaneWave,
    make_amplitudes,
    make_frame,
    make_zeta,
)
from .mesh import Mesh, build_mesh
from .fem import FemOptions, SolverContext, solve_mixed_bvp
from .impedance import (
    BoundaryTrace,
    impedance_gap,
    lambda_D,
    lambda_empty,
    reflected_solve,
)
from .indicator import IndicatorSample, compute_indicator
from .enclosure import (
    HullResult,
    SupportEstimate,
    SweepConfig,
    estimate_support,
    half_space_hull,
    sweep,
)
from .config import ConfigError, RunConfig, parse_config
from .acceptance import run_acceptance
from .cli import main

__all__ = (
    "__version__",
    "Medium",
    "wavenumber",
    "Empty",
    "AxisBox",
    "Ball",
    "DomainGeometry",
    "support_function",
    "DirectionFrame",
    "make_frame",
    "make_zeta",
    "make_amplitudes",
    "CgoField",
    "PlaneWave",
    "Mesh",
    "build_mesh",
    "FemOptions",
    "SolverContext",
    "solve_mixed_bvp",
    "BoundaryTrace",
    "lambda_empty",
    "lambda_D",
    "reflected_solve",
    "impedance_gap",
    "IndicatorSample",
    "compute_indicator",
    "SweepConfig",
    "SupportEstimate",
    "HullResult",
    "estimate_support",
    "sweep",
    "half_space_hull",
    "ConfigError",
    "RunConfig",
    "parse_config",
    "run_acceptance",
    "main",
)
