"""Run configuration: a flat dotted-key text format and its schema.

The accepted syntax is a TOML-compatible subset: one `dotted.key =
value` per line, values being strings, numbers, booleans, or
(possibly nested) arrays of numbers, plus # comments.  Unknown keys
are errors, not warnings, so a typo cannot silently fall back to a
default.  All constraint checks run at parse time and report the
violated invariant by name.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .enclosure import (
    DEFAULT_GRID_N,
    SweepConfig,
    axis_directions,
    diagonal_directions,
    fibonacci_directions,
)
from .fem import FemOptions
from .geometry import AxisBox, Ball, DomainGeometry, Empty, Medium

__all__ = (
    "ConfigError",
    "ProbeSpec",
    "RunConfig",
    "parse_config",
    "load_config",
    "config_echo",
)

_DIRECTION_PRESETS = ("axis", "diagonal", "axis+diagonal")


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class ProbeSpec:
    """Probing field selection for the forward and indicator commands.

    source "cgo" uses the exponential probe along rho at the given tau
    and threshold t; source "plane" uses a unit plane wave with the
    given propagation direction and polarization; source "none" runs
    with homogeneous data (zero-field check).
    """

    source: str = "cgo"
    rho: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    tau: float = 2.0
    t: float = 0.0
    direction: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    polarization: Tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.source not in ("cgo", "plane", "none"):
            raise ConfigError("probe.source must be 'cgo', 'plane', or 'none'")
        if self.tau <= 0.0:
            raise ConfigError("probe.tau must be positive")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for one CLI run."""

    medium: Medium = field(default_factory=Medium)
    geometry: DomainGeometry = field(default_factory=lambda: DomainGeometry(
        obstacle=AxisBox((-0.25, -0.25, -0.25), (0.25, 0.25, 0.25))))
    n: int = 32
    fem: FemOptions = field(default_factory=FemOptions)
    sweep: SweepConfig = field(default_factory=lambda: SweepConfig(
        directions=np.concatenate([axis_directions(), diagonal_directions()])))
    grid_n: int = DEFAULT_GRID_N
    probe: ProbeSpec = field(default_factory=ProbeSpec)
    t_grid: Tuple[float, ...] = (0.0,)
    out_dir: str = "out"
    resonance_guard: float = 3.8


def _parse_scalar(text: str, line_no: int) -> Any:
    text = text.strip()
    if not text:
        raise ConfigError(f"line {line_no}: missing value")
    if text == "true":
        return True
    if text == "false":
        return False
    if text.startswith('"'):
        if not text.endswith('"') or len(text) < 2 or '"' in text[1:-1]:
            raise ConfigError(f"line {line_no}: malformed string {text!r}")
        return text[1:-1]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"line {line_no}: cannot parse value {text!r}")


def _split_items(body: str, line_no: int) -> List[str]:
    # split a bracket-stripped array body on commas at depth zero
    items, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise ConfigError(f"line {line_no}: unbalanced brackets")
        elif ch == "," and depth == 0:
            items.append(body[start:i])
            start = i + 1
    if depth != 0:
        raise ConfigError(f"line {line_no}: unbalanced brackets")
    tail = body[start:]
    if tail.strip():
        items.append(tail)
    elif items:
        raise ConfigError(f"line {line_no}: trailing comma in array")
    return items


def _parse_value(text: str, line_no: int) -> Any:
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(f"line {line_no}: arrays must close on one line")
        return [_parse_value(item, line_no)
                for item in _split_items(text[1:-1], line_no)]
    return _parse_scalar(text, line_no)


def _parse_lines(text: str) -> Dict[str, Tuple[Any, int]]:
    entries: Dict[str, Tuple[Any, int]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key or not all(part.isidentifier()
                              for part in key.split(".")):
            raise ConfigError(f"line {line_no}: malformed key {key!r}")
        if key in entries:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        entries[key] = (_parse_value(value, line_no), line_no)
    return entries


class _Entries:
    """Typed takeout from the raw key-value map."""

    def __init__(self, entries: Dict[str, Tuple[Any, int]]) -> None:
        self._entries = dict(entries)

    def _take(self, key: str):
        return self._entries.pop(key, None)

    def _typed(self, key: str, kinds, describe: str, default):
        item = self._take(key)
        if item is None:
            return default
        value, line_no = item
        if isinstance(value, bool) or not isinstance(value, kinds):
            raise ConfigError(f"line {line_no}: {key} must be {describe}")
        return value

    def number(self, key: str, default: float) -> float:
        value = self._typed(key, (int, float), "a number", default)
        return float(value)

    def integer(self, key: str, default: int) -> int:
        return self._typed(key, int, "an integer", default)

    def boolean(self, key: str, default: bool) -> bool:
        item = self._take(key)
        if item is None:
            return default
        value, line_no = item
        if not isinstance(value, bool):
            raise ConfigError(f"line {line_no}: {key} must be true or false")
        return value

    def string(self, key: str, default: str) -> str:
        return self._typed(key, str, "a string", default)

    def vector(self, key: str, default) -> Tuple[float, ...]:
        item = self._take(key)
        if item is None:
            return tuple(default)
        value, line_no = item
        if (not isinstance(value, list) or len(value) != 3
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in value)):
            raise ConfigError(f"line {line_no}: {key} must be a 3-vector")
        return tuple(float(v) for v in value)

    def numbers(self, key: str, default) -> Tuple[float, ...]:
        item = self._take(key)
        if item is None:
            return tuple(default)
        value, line_no = item
        if (not isinstance(value, list) or not value
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in value)):
            raise ConfigError(f"line {line_no}: {key} must be a number array")
        return tuple(float(v) for v in value)

    def raw(self, key: str):
        return self._take(key)

    def assert_empty(self) -> None:
        if self._entries:
            key, (_, line_no) = next(iter(self._entries.items()))
            raise ConfigError(f"line {line_no}: unknown key {key!r}")


def _build_obstacle(e: _Entries):
    shape = e.string("obstacle.shape", "box")
    lo = e.vector("obstacle.lo", (-0.25, -0.25, -0.25))
    hi = e.vector("obstacle.hi", (0.25, 0.25, 0.25))
    center = e.vector("obstacle.center", (0.0, 0.0, 0.0))
    radius = e.number("obstacle.radius", 0.25)
    if shape == "box":
        return AxisBox(lo, hi)
    if shape == "ball":
        return Ball(center, radius)
    if shape == "none":
        return Empty()
    raise ConfigError("obstacle.shape must be 'box', 'ball', or 'none'")


def _build_directions(e: _Entries) -> np.ndarray:
    item = e.raw("sweep.directions")
    if item is None:
        return np.concatenate([axis_directions(), diagonal_directions()])
    value, line_no = item
    if isinstance(value, bool):
        raise ConfigError(f"line {line_no}: sweep.directions must be a count, "
                          "a preset name, or a list of 3-vectors")
    if isinstance(value, int):
        if value < 4:
            raise ConfigError(f"line {line_no}: sweep.directions count must "
                              "be at least 4")
        return fibonacci_directions(value)
    if isinstance(value, str):
        if value == "axis":
            return axis_directions()
        if value == "diagonal":
            return diagonal_directions()
        if value == "axis+diagonal":
            return np.concatenate([axis_directions(), diagonal_directions()])
        raise ConfigError(f"line {line_no}: unknown direction preset "
                          f"{value!r}; expected one of {_DIRECTION_PRESETS}")
    if isinstance(value, list):
        rows = []
        for row in value:
            if (not isinstance(row, list) or len(row) != 3
                    or not all(isinstance(v, (int, float))
                               and not isinstance(v, bool) for v in row)):
                raise ConfigError(f"line {line_no}: sweep.directions entries "
                                  "must be 3-vectors")
            rows.append([float(v) for v in row])
        return np.asarray(rows)
    raise ConfigError(f"line {line_no}: sweep.directions must be a count, "
                      "a preset name, or a list of 3-vectors")


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text into a RunConfig.

    Every module-level precondition that is checkable at parse time is
    validated here, before any solve: unknown keys, type mismatches,
    and constraint violations all raise ConfigError naming the
    offending line or invariant.
    """
    e = _Entries(_parse_lines(text))
    try:
        medium = Medium(
            eps0=e.number("medium.eps0", 1.0),
            mu0=e.number("medium.mu0", 1.0),
            omega=e.number("medium.omega", 1.0),
        )
        obstacle = _build_obstacle(e)
        geometry = DomainGeometry(
            box_lo=e.vector("domain.box_lo", (-1.0, -1.0, -1.0)),
            box_hi=e.vector("domain.box_hi", (1.0, 1.0, 1.0)),
            obstacle=obstacle,
            kind=e.string("obstacle.kind", "hard"),
        )
        resonance_guard = e.number("medium.resonance_guard", 3.8)
        geometry.check_resonance_guard(medium, resonance_guard)
        n = e.integer("mesh.n", 32)
        if n < 4:
            raise ConfigError("mesh.n must be at least 4")
        fem = FemOptions(
            s=e.number("fem.s", 1.0),
            tol=e.number("fem.tol", 1e-10),
            iter_cap_factor=e.number("fem.iter_cap_factor", 20.0),
            direct_threshold=e.integer("fem.direct_threshold", 20000),
            preconditioner=e.string("fem.preconditioner", "amg"),
            trace_mode=e.string("fem.trace_mode", "layered"),
        )
        if fem.s <= 0.0:
            raise ConfigError("fem.s must be positive")
        if fem.tol <= 0.0:
            raise ConfigError("fem.tol must be positive")
        directions = _build_directions(e)
        sweep_cfg = SweepConfig(
            directions=directions,
            tau_grid=e.numbers("sweep.tau_grid", (2.0, 4.0, 6.0, 8.0)),
            fit=e.string("sweep.fit", "prefactor"),
            correction=e.boolean("sweep.correction", True),
            noise_factor=e.number("sweep.noise_factor", 1e3),
        )
        grid_n = e.integer("sweep.grid_n", DEFAULT_GRID_N)
        if grid_n < 2:
            raise ConfigError("sweep.grid_n must be at least 2")
        probe = ProbeSpec(
            source=e.string("probe.source", "cgo"),
            rho=e.vector("probe.rho", (0.0, 0.0, 1.0)),
            tau=e.number("probe.tau", 2.0),
            t=e.number("probe.t", 0.0),
            direction=e.vector("probe.direction", (0.0, 0.0, 1.0)),
            polarization=e.vector("probe.polarization", (1.0, 0.0, 0.0)),
        )
        t_grid = e.numbers("indicator.t_grid", (0.0,))
        out_dir = e.string("out.dir", "out")
        e.assert_empty()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        medium=medium,
        geometry=geometry,
        n=n,
        fem=fem,
        sweep=sweep_cfg,
        grid_n=grid_n,
        probe=probe,
        t_grid=t_grid,
        out_dir=out_dir,
        resonance_guard=resonance_guard,
    )


def load_config(path) -> RunConfig:
    with open(path, "r") as fh:
        return parse_config(fh.read())


def _obstacle_echo(geometry: DomainGeometry) -> Dict[str, Any]:
    ob = geometry.obstacle
    if isinstance(ob, AxisBox):
        return {"shape": "box", "lo": list(ob.lo), "hi": list(ob.hi)}
    if isinstance(ob, Ball):
        return {"shape": "ball", "center": list(ob.center),
                "radius": ob.radius}
    return {"shape": "none"}


def config_echo(cfg: RunConfig) -> Dict[str, Any]:
    """Deterministic dict of every resolved setting, for the summary JSON."""
    ob = _obstacle_echo(cfg.geometry)
    ob["kind"] = cfg.geometry.kind
    return {
        "medium": {"eps0": cfg.medium.eps0, "mu0": cfg.medium.mu0,
                   "omega": cfg.medium.omega,
                   "resonance_guard": cfg.resonance_guard},
        "domain": {"box_lo": list(cfg.geometry.box_lo),
                   "box_hi": list(cfg.geometry.box_hi)},
        "obstacle": ob,
        "mesh": {"n": cfg.n},
        "fem": {"s": cfg.fem.s, "tol": cfg.fem.tol,
                "iter_cap_factor": cfg.fem.iter_cap_factor,
                "direct_threshold": cfg.fem.direct_threshold,
                "preconditioner": cfg.fem.preconditioner,
                "trace_mode": cfg.fem.trace_mode},
        "sweep": {"directions": [list(row) for row in cfg.sweep.directions],
                  "tau_grid": list(cfg.sweep.tau_grid),
                  "fit": cfg.sweep.fit,
                  "correction": cfg.sweep.correction,
                  "noise_factor": cfg.sweep.noise_factor,
                  "grid_n": cfg.grid_n},
        "probe": {"source": cfg.probe.source, "rho": list(cfg.probe.rho),
                  "tau": cfg.probe.tau, "t": cfg.probe.t,
                  "direction": list(cfg.probe.direction),
                  "polarization": list(cfg.probe.polarization)},
        "indicator": {"t_grid": list(cfg.t_grid)},
        "out": {"dir": cfg.out_dir},
    }
