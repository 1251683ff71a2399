"""Acceptance suite: ten gated checks at the default desk scale.

Each criterion produces one pass/fail line with the measured numbers
and the pinned tolerance.  Heavy artifacts (meshes, factorizations,
multigrid hierarchies) are shared across criteria and dropped as soon
as the last consumer has run, so the whole suite fits comfortably in
a few GB and a few minutes.  Criteria never weaken tolerances at run
time; a failing line is a finding, not an error.
"""
from __future__ import annotations

import filecmp
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .cgo import (
    CgoField,
    PlaneWave,
    make_amplitudes,
    make_frame,
    make_zeta,
    sommerfeld_symbol,
    zeta_norm,
)
from .enclosure import (
    SweepConfig,
    axis_directions,
    diagonal_directions,
    half_space_hull,
    sweep,
)
from .fem import FemOptions, SolverContext, l2_error
from .geometry import (
    AxisBox,
    DomainGeometry,
    Medium,
    contains,
    support_function,
    wavenumber,
)
from .indicator import compute_indicator, obstacle_energy
from .mesh import build_mesh

__all__ = ("CriterionResult", "run_acceptance", "format_report")

RNG_SEED = 20260816
_E3 = (0.0, 0.0, 1.0)

CRITERION_NAMES = (
    "probe algebra",
    "amplitude asymptotics",
    "forward convergence",
    "energy identity, hard obstacle",
    "energy identity, soft obstacle",
    "indicator growth switch",
    "obstacle energy scalings",
    "support sweep and hull",
    "threshold shift exactness",
    "reproducibility",
)


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.index:2d} ({self.name}): {self.detail}"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _criterion_probe_algebra(medium: Medium) -> Tuple[bool, str]:
    rng = np.random.default_rng(RNG_SEED)
    k = wavenumber(medium)
    eye8 = np.eye(8)
    worst = 0.0
    for _ in range(100):
        v = rng.normal(size=3)
        while float(np.linalg.norm(v)) < 0.1:
            v = rng.normal(size=3)
        tau = float(10.0 ** rng.uniform(math.log10(0.5), 3.0))
        frame = make_frame(v)
        zeta = make_zeta(frame, tau, k)
        amp = make_amplitudes(frame, tau, k)
        zn = zeta_norm(tau, k)
        P = sommerfeld_symbol(zeta)
        resid = (P - k * eye8) @ amp.y0
        scale = zn * float(np.linalg.norm(amp.y0))
        defects = (
            abs(zeta @ zeta - k * k) / zn**2,
            float(np.linalg.norm(np.cross(zeta, amp.eta) - k * amp.theta))
            / (k * float(np.linalg.norm(amp.theta))),
            abs(zeta @ amp.eta) / (zn * float(np.linalg.norm(amp.eta))),
            abs(resid[0]) / scale,
            abs(resid[7]) / scale,
            float(np.linalg.norm(P @ P - (zeta @ zeta) * eye8)) / zn**2,
        )
        worst = max(worst, max(defects))
    return worst <= 1e-12, (
        f"max relative defect {worst:.3e} over 100 random frames, "
        "tau in [0.5, 1000] (tol 1e-12)")


def _criterion_amplitude_asymptotics(medium: Medium) -> Tuple[bool, str]:
    k = wavenumber(medium)
    frame = make_frame(_E3)
    limit = 1j * k * frame.a
    taus = (64.0, 128.0, 256.0)
    amps = [make_amplitudes(frame, tau, k) for tau in taus]
    devs = [float(np.linalg.norm(a.eta - limit)) for a in amps]
    ratios = [devs[i] / devs[i + 1] for i in range(2)]
    scaled = [float(np.linalg.norm(a.theta)) / tau for a, tau in zip(amps, taus)]
    spread = max(scaled) / min(scaled) - 1.0
    ok = all(1.8 <= r <= 2.2 for r in ratios) and spread <= 0.05
    return ok, (
        f"eta-deviation ratios per tau doubling {ratios[0]:.3f}, {ratios[1]:.3f} "
        f"(need within [1.8, 2.2]); |theta|/tau spread {100 * spread:.2f}% "
        "(need <= 5%)")


def _forward_block(medium: Medium, note: Callable[[str], None]):
    """Convergence data for criterion 3 plus the empty-domain sweep that
    criterion 8 reuses (both need the n = 32 empty context)."""
    empty = DomainGeometry()
    pw = PlaneWave(medium, _E3, (1.0, 0.0, 0.0))
    cgo = CgoField(medium, make_frame(_E3), 2.0, 0.0)
    rel = {"plane": [], "probe": []}
    zero_norm = float("nan")
    empty_estimates = None
    for n in (8, 16, 32):
        note(f"forward convergence: empty domain, n = {n}")
        mesh = build_mesh(empty, n)
        ctx = SolverContext(mesh, medium, "hard", FemOptions())
        for name, src in (("plane", pw), ("probe", cgo)):
            sol = ctx.solve(outer_source=src)
            err, nrm = l2_error(mesh, src, sol)
            rel[name].append(err / nrm)
        if n == 32:
            zero_norm = float(np.linalg.norm(ctx.solve().values))
            note("sweep: empty obstacle, 14 directions")
            cfg = SweepConfig(directions=np.concatenate(
                [axis_directions(), diagonal_directions()]))
            empty_estimates = sweep(cfg, empty, medium, context=ctx, mesh=mesh)
        del ctx
    return rel, zero_norm, empty_estimates


def _criterion_forward(rel, zero_norm) -> Tuple[bool, str]:
    orders = {name: math.log2(e[0] / e[2]) / 2.0 for name, e in rel.items()}
    pair = {name: (math.log2(e[0] / e[1]), math.log2(e[1] / e[2]))
            for name, e in rel.items()}
    ok = all(o >= 1.8 for o in orders.values()) and zero_norm <= 1e-10
    return ok, (
        f"L2 orders over n in (8, 16, 32): plane wave {orders['plane']:.2f} "
        f"(pairwise {pair['plane'][0]:.2f}, {pair['plane'][1]:.2f}), "
        f"exponential probe {orders['probe']:.2f} "
        f"(pairwise {pair['probe'][0]:.2f}, {pair['probe'][1]:.2f}); "
        "mean order needs >= 1.8; "
        f"zero-data field norm {zero_norm:.2e} (need <= 1e-10)")


def _route_gap(sample) -> float:
    return abs(sample.value - sample.domain_value) / abs(sample.domain_value)


def _criterion_energy_hard(samples16, samples32) -> Tuple[bool, str]:
    parts = []
    ok = True
    for tau in (2.0, 4.0):
        r16 = _route_gap(samples16[tau])
        r32 = _route_gap(samples32[tau])
        im_frac = abs(samples32[tau].value.imag) / abs(samples32[tau].value)
        ok = ok and r32 <= 0.05 and r32 < r16 and im_frac <= 0.05
        parts.append(
            f"tau={tau:g}: I vs I_domain rel gap {r16:.3f} (n=16) -> "
            f"{r32:.3f} (n=32, need <= 0.05 and improving), "
            f"Im fraction {im_frac:.3f} (need <= 0.05)")
    return ok, "; ".join(parts)


def _criterion_energy_soft(soft32, hard32) -> Tuple[bool, str]:
    parts = []
    ok = True
    for tau in (2.0, 4.0):
        r = _route_gap(soft32[tau])
        ok = ok and r <= 0.05
        parts.append(f"tau={tau:g}: soft rel gap {r:.3f} (need <= 0.05)")
    re_hard = hard32[4.0].value.real
    re_soft = soft32[4.0].value.real
    sign_ok = re_hard > 0.0 and re_soft < 0.0
    ok = ok and sign_ok
    parts.append(
        f"Re I at tau=4, t=0: hard {re_hard:.4g}, soft {re_soft:.4g} "
        "(need hard > 0 > soft)")
    return ok, "; ".join(parts)


def _criterion_growth_switch(c6_samples) -> Tuple[bool, str]:
    taus = sorted(c6_samples)
    l_out = [c6_samples[t].log_abs_at(0.45) for t in taus]
    l_in = [c6_samples[t].log_abs_at(0.05) for t in taus]
    dec = all(b < a for a, b in zip(l_out, l_out[1:]))
    inc = all(b > a for a, b in zip(l_in, l_in[1:]))
    tau_max = taus[-1]
    h_read = c6_samples[tau_max].log_abs_at(0.0) / (2.0 * tau_max)
    near = abs(h_read - 0.25) <= 0.1
    ok = dec and inc and near
    return ok, (
        f"|I| at t=0.45 strictly decreasing: {dec}; at t=0.05 strictly "
        f"increasing: {inc}; support readout log|I|/(2 tau) at tau={tau_max:g} "
        f"is {h_read:.3f} (need within 0.1 of 0.25)")


def _criterion_obstacle_scalings(medium: Medium, mesh) -> Tuple[bool, str]:
    frame = make_frame(_E3)
    h_d = 0.25
    taus = (4.0, 8.0, 16.0)
    curls, ratios = [], []
    for tau in taus:
        field = CgoField(medium, frame, tau, h_d)
        curl, mass = obstacle_energy(mesh, field)
        curls.append(curl)
        ratios.append(mass / curl)
    nondec = all(b >= a for a, b in zip(curls, curls[1:]))
    drops = [ratios[i] / ratios[i + 1] for i in range(2)]
    drops_ok = all(3.0 <= d <= 5.0 for d in drops)
    ok = nondec and drops_ok
    return ok, (
        f"curl term at t=0.25 across tau (4, 8, 16): "
        + ", ".join(f"{c:.4g}" for c in curls)
        + f" (need non-decreasing: {nondec}); mass/curl drop factors "
        f"{drops[0]:.2f}, {drops[1]:.2f} (need within [3, 5])")


def _criterion_sweep_hull(hard_estimates, empty_estimates,
                          geometry: DomainGeometry) -> Tuple[bool, str]:
    undetected = [e for e in hard_estimates if not e.detected]
    if undetected:
        return False, (f"{len(undetected)} of {len(hard_estimates)} directions "
                       "came back undetected on the box obstacle")
    errs = [abs(e.h_hat - support_function(geometry.obstacle, e.rho))
            for e in hard_estimates]
    max_err = max(errs)
    hull = half_space_hull(hard_estimates, geometry, grid_n=64)
    cx, cy, cz = hull.centers
    Z, Y, X = np.meshgrid(cz, cy, cx, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    inside = contains(geometry.obstacle, pts)
    member = hull.membership.transpose(2, 1, 0).ravel()
    contained = bool(np.all(member[inside]))
    excess = hull.volume / geometry.obstacle.volume - 1.0
    empty_ok = all((not e.detected) and "no obstacle detected" in e.message
                   for e in empty_estimates)
    ok = max_err <= 0.1 and contained and excess <= 0.6 and empty_ok
    return ok, (
        f"max |h_hat - h_true| {max_err:.4f} over 14 directions (need <= 0.1); "
        f"hull contains true box: {contained}; volume excess "
        f"{100 * excess:.1f}% (need <= 60%); empty domain undetected in all "
        f"directions: {empty_ok}")


def _criterion_shift_exactness(sample) -> Tuple[bool, str]:
    worst = 0.0
    for t_new in (-0.2, 0.0, 0.3, 0.45):
        factor = math.exp(-2.0 * sample.tau * (t_new - sample.t))
        direct = sample.value * factor
        shifted = sample.at_t(t_new).value
        worst = max(worst, abs(shifted - direct) / abs(direct))
        via_log = math.exp(sample.log_abs_at(t_new))
        worst = max(worst, _rel(via_log, abs(shifted)))
    return worst <= 1e-12, (
        f"max relative deviation of shifted indicator from "
        f"exp(-2 tau dt) scaling: {worst:.3e} (tol 1e-12)")


_REPRO_CONFIG = """
mesh.n = 8
sweep.directions = "axis"
sweep.tau_grid = [2, 4, 6]
sweep.fit = "slope"
"""


def _criterion_reproducibility() -> Tuple[bool, str]:
    from .cli import execute_sweep
    from .config import parse_config

    cfg = parse_config(_REPRO_CONFIG)
    with tempfile.TemporaryDirectory() as top:
        dirs = [os.path.join(top, d) for d in ("a", "b")]
        for d in dirs:
            os.makedirs(d)
            execute_sweep(cfg, d)
        same = {}
        for name in ("support.csv", "hull.vtk", "summary.json"):
            paths = [os.path.join(d, name) for d in dirs]
            exists = [os.path.exists(p) for p in paths]
            if all(exists):
                same[name] = filecmp.cmp(*paths, shallow=False)
            else:
                # hull.vtk is only written when a hull exists; skipping
                # it in both runs is itself reproducible behaviour.
                same[name] = not any(exists)
    ok = all(same.values())
    labels = ", ".join(f"{k}: {'same' if v else 'DIFFERENT'}"
                       for k, v in sorted(same.items()))
    return ok, ("double run of the sweep pipeline, byte compare (wall "
                f"clocks live outside these files): {labels}")


def run_acceptance(progress: Optional[Callable[[str], None]] = None
                   ) -> List[CriterionResult]:
    """Run all ten criteria and return their results in order.

    progress, when given, receives coarse stage notes followed by one
    line per finished criterion.  A crash inside one criterion marks it
    failed with the error message and the suite continues.
    """
    note = progress if progress is not None else (lambda line: None)
    medium = Medium()
    box = AxisBox((-0.25, -0.25, -0.25), (0.25, 0.25, 0.25))
    geometry_hard = DomainGeometry(obstacle=box, kind="hard")
    geometry_soft = DomainGeometry(obstacle=box, kind="soft")
    frame = make_frame(_E3)
    outcomes: Dict[int, Tuple[bool, str]] = {}

    def stage(fn, *indices):
        try:
            return fn()
        except Exception as exc:
            for idx in indices:
                outcomes.setdefault(idx, (False, f"error: {exc}"))
            return None

    def run(index: int, fn) -> None:
        if index not in outcomes:
            outcomes[index] = stage(fn, index) or outcomes.get(
                index, (False, "error: criterion produced no result"))

    run(1, lambda: _criterion_probe_algebra(medium))
    run(2, lambda: _criterion_amplitude_asymptotics(medium))

    forward_data = stage(lambda: _forward_block(medium, note), 3, 8)
    if forward_data is not None:
        rel, zero_norm, empty_estimates = forward_data
        run(3, lambda: _criterion_forward(rel, zero_norm))
    else:
        empty_estimates = None

    def box_block():
        opts = FemOptions()
        note("energy identity: hard obstacle, n = 16")
        mesh16 = build_mesh(geometry_hard, 16)
        ctx = SolverContext(mesh16, medium, "hard", opts)
        samples16 = {tau: compute_indicator(ctx, frame, tau, t=0.0)
                     for tau in (2.0, 4.0)}
        del ctx, mesh16
        note("energy identity: hard obstacle, n = 32")
        mesh32 = build_mesh(geometry_hard, 32)
        ctx = SolverContext(mesh32, medium, "hard", opts)
        samples32 = {tau: compute_indicator(ctx, frame, tau, t=0.0)
                     for tau in (2.0, 4.0)}
        note("indicator growth: tau grid at recentered threshold")
        c6 = {tau: compute_indicator(ctx, frame, tau, t=1.0)
              for tau in (2.0, 4.0, 6.0, 8.0)}
        note("sweep: box obstacle, 14 directions")
        cfg = SweepConfig(directions=np.concatenate(
            [axis_directions(), diagonal_directions()]))
        hard_estimates = sweep(cfg, geometry_hard, medium,
                               context=ctx, mesh=mesh32)
        del ctx
        note("energy identity: soft obstacle, n = 32")
        ctx = SolverContext(mesh32, medium, "soft", opts)
        soft32 = {tau: compute_indicator(ctx, frame, tau, t=0.0)
                  for tau in (2.0, 4.0)}
        del ctx
        return samples16, samples32, c6, hard_estimates, soft32, mesh32

    box_data = stage(box_block, 4, 5, 6, 7, 8, 9)
    if box_data is not None:
        samples16, samples32, c6, hard_estimates, soft32, mesh32 = box_data
        run(4, lambda: _criterion_energy_hard(samples16, samples32))
        run(5, lambda: _criterion_energy_soft(soft32, samples32))
        run(6, lambda: _criterion_growth_switch(c6))
        run(7, lambda: _criterion_obstacle_scalings(medium, mesh32))
        run(8, lambda: _criterion_sweep_hull(hard_estimates, empty_estimates,
                                             geometry_hard))
        run(9, lambda: _criterion_shift_exactness(c6[2.0]))

    note("reproducibility: double sweep run at n = 8")
    run(10, _criterion_reproducibility)

    results = []
    for idx in range(1, 11):
        passed, detail = outcomes.get(
            idx, (False, "error: stage prerequisites failed"))
        res = CriterionResult(idx, CRITERION_NAMES[idx - 1], passed, detail)
        results.append(res)
        note(res.line())
    return results


def format_report(results: List[CriterionResult]) -> str:
    lines = [r.line() for r in results]
    failed = sum(1 for r in results if not r.passed)
    lines.append(f"{len(results) - failed} of {len(results)} criteria passed")
    return "\n".join(lines)
