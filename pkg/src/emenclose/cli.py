"""Command line entry points: forward, indicator, sweep, validate.

Every command reads one dotted-key config file, writes its outputs
under one directory, and ends with a summary.json embedding the full
resolved configuration.  Exit codes: 0 success, 1 config error,
2 solver failure, 3 validation failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from .cgo import CgoField, PlaneWave, make_frame
from .config import ConfigError, RunConfig, config_echo, load_config
from .enclosure import half_space_hull, sweep, write_hull_vtk, write_support_csv
from .fem import SolverContext, compute_H
from .geometry import Empty, box_support, support_function
from .indicator import compute_indicator, write_indicator_csv
from .linalg import SolverError
from .mesh import build_mesh, write_structured_vtk

__all__ = ("main", "execute_forward", "execute_indicator", "execute_sweep",
           "execute_validate")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VALIDATION = 3

_THREAD_LIMITER = None


def _limit_threads(count: int) -> None:
    global _THREAD_LIMITER
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(count)
    try:
        from threadpoolctl import threadpool_limits
        _THREAD_LIMITER = threadpool_limits(limits=count)
    except Exception:
        pass


def _versions() -> Dict[str, str]:
    import pyamg
    import scipy

    from . import __version__
    return {
        "emenclose": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyamg": pyamg.__version__,
    }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _write_json(out_dir: str, name: str, payload: dict) -> None:
    with open(os.path.join(out_dir, name), "w") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finish(cfg: RunConfig, out_dir: str, metrics: dict, timings: dict
            ) -> dict:
    """Write summary.json and timings.json; return the summary payload.

    Wall-clock numbers go to the separate timings.json so that every
    other output of a run, summary.json included, is bit-reproducible
    for identical configs; summary.json carries the pointer.
    """
    _write_json(out_dir, "timings.json", timings)
    summary = {
        "config": config_echo(cfg),
        "metrics": metrics,
        "timings": {"file": "timings.json"},
        "versions": _versions(),
    }
    _write_json(out_dir, "summary.json", summary)
    return summary


def _probe_field(cfg: RunConfig):
    if cfg.probe.source == "cgo":
        return CgoField(cfg.medium, make_frame(cfg.probe.rho),
                        cfg.probe.tau, cfg.probe.t)
    if cfg.probe.source == "plane":
        return PlaneWave(cfg.medium, cfg.probe.direction,
                         cfg.probe.polarization)
    return None


def execute_forward(cfg: RunConfig, out_dir: str) -> dict:
    """Solve the configured forward problem; write forward.vtk + summary."""
    t0 = time.perf_counter()
    mesh = build_mesh(cfg.geometry, cfg.n)
    ctx = SolverContext(mesh, cfg.medium, cfg.geometry.kind, cfg.fem)
    t_setup = time.perf_counter()
    probe = _probe_field(cfg)
    sol = ctx.solve(outer_source=probe)
    t_solve = time.perf_counter()
    field_h = compute_H(sol, cfg.medium)
    write_structured_vtk(os.path.join(out_dir, "forward.vtk"), mesh,
                         vectors={"E": sol.values, "H": field_h.values})
    metrics = {
        "probe": cfg.probe.source,
        "iterations": sol.iterations,
        "relres": sol.relres,
        "e_dof_norm": float(np.linalg.norm(sol.values)),
        "n_nodes": mesh.n_nodes,
    }
    timings = {"setup": t_setup - t0, "solve": t_solve - t_setup,
               "total": time.perf_counter() - t0}
    return _finish(cfg, out_dir, metrics, timings)


def execute_indicator(cfg: RunConfig, out_dir: str) -> dict:
    """Indicator values along probe.rho over the sweep tau grid.

    One solve per tau at the recentered threshold; rows for every
    requested threshold come from the exact shift.  Writes
    indicator.csv + summary.
    """
    if cfg.probe.source != "cgo":
        raise ConfigError("indicator requires probe.source = \"cgo\"")
    t0 = time.perf_counter()
    frame = make_frame(cfg.probe.rho)
    mesh = build_mesh(cfg.geometry, cfg.n)
    ctx = SolverContext(mesh, cfg.medium, cfg.geometry.kind, cfg.fem)
    t_setup = time.perf_counter()
    t_solve = box_support(cfg.geometry.box_lo, cfg.geometry.box_hi, frame.rho)
    samples = []
    for tau in cfg.sweep.tau_grid:
        base = compute_indicator(ctx, frame, tau, t=t_solve)
        for t in cfg.t_grid:
            samples.append(base.at_t(t))
    write_indicator_csv(os.path.join(out_dir, "indicator.csv"), samples)
    metrics = {
        "rho": [float(c) for c in frame.rho],
        "tau_grid": list(cfg.sweep.tau_grid),
        "t_grid": list(cfg.t_grid),
        "rows": len(samples),
    }
    timings = {"setup": t_setup - t0, "total": time.perf_counter() - t0}
    return _finish(cfg, out_dir, metrics, timings)


def execute_sweep(cfg: RunConfig, out_dir: str) -> dict:
    """Support sweep over the configured directions; writes support.csv,
    hull.vtk (when at least four directions detect the obstacle), and
    summary.json."""
    t0 = time.perf_counter()
    mesh = build_mesh(cfg.geometry, cfg.n)
    ctx = SolverContext(mesh, cfg.medium, cfg.geometry.kind, cfg.fem)
    t_setup = time.perf_counter()
    estimates = sweep(cfg.sweep, cfg.geometry, cfg.medium, n=cfg.n,
                      options=cfg.fem, mesh=mesh, context=ctx)
    t_sweep = time.perf_counter()
    write_support_csv(os.path.join(out_dir, "support.csv"), estimates,
                      cfg.geometry)
    known = not isinstance(cfg.geometry.obstacle, Empty)
    rows = []
    for e in estimates:
        rows.append({
            "rho": [float(c) for c in e.rho],
            "detected": e.detected,
            "h_hat": e.h_hat,
            "h_true": (support_function(cfg.geometry.obstacle, e.rho)
                       if known else None),
            "fit_residual": e.fit_residual,
            "message": e.message if e.message else "ok",
        })
    detected = sum(1 for e in estimates if e.detected)
    hull_info: dict
    if detected >= 4:
        try:
            hull = half_space_hull(estimates, cfg.geometry, cfg.grid_n)
            write_hull_vtk(os.path.join(out_dir, "hull.vtk"), hull)
            hull_info = {
                "grid_n": hull.grid_n,
                "volume": hull.volume,
                "support_error": hull.support_error,
                "half_spaces": len(hull.half_spaces),
            }
        except ValueError as exc:
            hull_info = {"skipped": str(exc)}
    else:
        hull_info = {"skipped": "no obstacle detected in enough directions"}
    metrics = {
        "directions": rows,
        "detected_directions": detected,
        "hull": hull_info,
    }
    timings = {"setup": t_setup - t0, "sweep": t_sweep - t_setup,
               "total": time.perf_counter() - t0}
    return _finish(cfg, out_dir, metrics, timings)


def execute_validate(cfg: RunConfig, out_dir: str,
                     echo: Optional[callable] = print) -> int:
    """Run the acceptance suite; write acceptance_report.json.

    The suite runs at its own pinned desk-scale parameters; the config
    is echoed for the audit trail.  Returns the process exit code.
    """
    from .acceptance import run_acceptance

    results = run_acceptance(progress=echo)
    payload = {
        "config": config_echo(cfg),
        "criteria": [{
            "index": r.index,
            "name": r.name,
            "passed": r.passed,
            "detail": r.detail,
        } for r in results],
        "versions": _versions(),
    }
    _write_json(out_dir, "acceptance_report.json", payload)
    failed = sum(1 for r in results if not r.passed)
    if echo is not None:
        echo(f"{len(results) - failed} of {len(results)} criteria passed; "
             f"report in {os.path.join(out_dir, 'acceptance_report.json')}")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="emenclose",
        description="Obstacle reconstruction from boundary impedance data: "
                    "forward solves, indicator evaluation, support sweeps, "
                    "and the acceptance suite.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
            ("forward", "solve one forward problem and dump the fields"),
            ("indicator", "evaluate the indicator along one direction"),
            ("sweep", "estimate the support function and enclose the hull"),
            ("validate", "run the acceptance suite")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", default=None,
                       help="output directory (default: out.dir from config)")
        p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS/OpenMP thread pools")
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("config error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        _limit_threads(args.threads)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out if args.out is not None else cfg.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "forward":
            execute_forward(cfg, out_dir)
        elif args.command == "indicator":
            execute_indicator(cfg, out_dir)
        elif args.command == "sweep":
            execute_sweep(cfg, out_dir)
        else:
            return execute_validate(cfg, out_dir)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
