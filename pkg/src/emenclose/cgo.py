"""Complex geometrical-optics probing fields and related analytic solutions.

Probing directions come in orthonormal pairs (rho, rho_perp); the complex
frequency vector zeta = -i*tau*rho + sqrt(tau^2 + k^2)*rho_perp satisfies
zeta . zeta = k^2, so exp(i zeta . x) solves the homogeneous Helmholtz
equation exactly and the derived (E0, H0) pair solves time-harmonic
Maxwell in the constant background with zero remainder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .geometry import Medium, wavenumber

__all__ = (
    "EXPONENT_CAP",
    "CgoOverflowError",
    "DirectionFrame",
    "make_frame",
    "make_zeta",
    "CgoAmplitudes",
    "make_amplitudes",
    "sommerfeld_symbol",
    "CgoField",
    "PlaneWave",
    "validate_potentials",
)

# Largest allowed real exponent in field evaluation; beyond this the caller
# is expected to recenter the pseudo-time t (the sweep recenters at the
# domain support h_Omega(rho), which keeps the exponent non-positive).
EXPONENT_CAP = 300.0


class CgoOverflowError(ValueError):
    """Raised when an evaluation would exceed the exponent cap; rescale t."""


@dataclass(frozen=True)
class DirectionFrame:
    """Orthonormal probing pair plus the derived amplitude seeds.

    a = rho x rho_perp is the real unit vector completing the triad;
    b = (rho_perp + i*rho)/sqrt(2) normalizes the probe so that
    zeta_hat . b = 1 and zeta_hat . a = 0 where
    zeta_hat = (-i*rho + rho_perp)/sqrt(2).
    """

    rho: np.ndarray
    rho_perp: np.ndarray

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float).reshape(3)
        perp = np.asarray(self.rho_perp, dtype=float).reshape(3)
        for v, name in ((rho, "rho"), (perp, "rho_perp")):
            if abs(float(v @ v) - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a unit vector")
        if abs(float(rho @ perp)) > 1e-12:
            raise ValueError("rho and rho_perp must be orthogonal")
        rho.flags.writeable = False
        perp.flags.writeable = False
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "rho_perp", perp)

    @property
    def a(self) -> np.ndarray:
        return np.cross(self.rho, self.rho_perp)

    @property
    def b(self) -> np.ndarray:
        return (self.rho_perp + 1j * self.rho) / math.sqrt(2.0)

    @property
    def zeta_hat(self) -> np.ndarray:
        return (-1j * self.rho + self.rho_perp) / math.sqrt(2.0)


def make_frame(rho) -> DirectionFrame:
    """Build the deterministic frame for a unit direction rho.

    rho_perp starts from the coordinate axis least aligned with rho
    (lowest index wins ties), is orthogonalized against rho and
    normalized, so reruns produce bit-identical frames.
    """
    rho = np.asarray(rho, dtype=float).reshape(3)
    nrm = float(np.linalg.norm(rho))
    if not nrm > 0.0:
        raise ValueError("rho must be nonzero")
    rho = rho / nrm
    axis = int(np.argmin(np.abs(rho)))
    e = np.zeros(3)
    e[axis] = 1.0
    v = e - float(e @ rho) * rho
    v /= float(np.linalg.norm(v))
    return DirectionFrame(rho=rho, rho_perp=v)


def make_zeta(frame: DirectionFrame, tau: float, k: float) -> np.ndarray:
    """zeta = -i*tau*rho + sqrt(tau^2 + k^2) * rho_perp (zeta . zeta = k^2)."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    return -1j * tau * frame.rho + math.sqrt(tau * tau + k * k) * frame.rho_perp


def zeta_norm(tau: float, k: float) -> float:
    """Hermitian norm |zeta| = sqrt(2*tau^2 + k^2)."""
    return math.sqrt(2.0 * tau * tau + k * k)


def sommerfeld_symbol(zeta: np.ndarray) -> np.ndarray:
    """8x8 first-order symbol P(zeta) acting on (phi, e, h, psi) blocks.

    Block layout: [[0, zeta., 0, 0], [zeta, 0, zeta x, 0],
    [0, -zeta x, 0, zeta], [0, 0, zeta., 0]]; P(zeta)^2 = (zeta.zeta) I.
    """
    z = np.asarray(zeta, dtype=complex).reshape(3)
    cross = np.array(
        [
            [0.0, -z[2], z[1]],
            [z[2], 0.0, -z[0]],
            [-z[1], z[0], 0.0],
        ],
        dtype=complex,
    )
    P = np.zeros((8, 8), dtype=complex)
    P[0, 1:4] = z
    P[1:4, 0] = z
    P[1:4, 4:7] = cross
    P[4:7, 1:4] = -cross
    P[4:7, 7] = z
    P[7, 4:7] = z
    return P


@dataclass(frozen=True)
class CgoAmplitudes:
    """Constant amplitude data for one (frame, tau, k) probe."""

    zeta: np.ndarray
    y0: np.ndarray
    x0: np.ndarray
    eta: np.ndarray
    theta: np.ndarray


def make_amplitudes(frame: DirectionFrame, tau: float, k: float) -> CgoAmplitudes:
    """Amplitude vectors y0 = (zeta.a, k a, k b, zeta.b)/|zeta| and
    x0 = (P(-zeta) + k) y0 = (0, eta, theta, 0)."""
    zeta = make_zeta(frame, tau, k)
    nz = zeta_norm(tau, k)
    a = frame.a.astype(complex)
    b = frame.b
    za = complex(zeta @ a)
    zb = complex(zeta @ b)
    y0 = np.concatenate(([za], k * a, k * b, [zb])) / nz
    eta = (-za * zeta - k * np.cross(zeta, b) + k * k * a) / nz
    theta = (k * np.cross(zeta, a) - zb * zeta + k * k * b) / nz
    x0 = np.concatenate(([0.0], eta, theta, [0.0])).astype(complex)
    return CgoAmplitudes(zeta=zeta, y0=y0, x0=x0, eta=eta, theta=theta)


@dataclass(frozen=True)
class CgoField:
    """Exponentially weighted probing pair (E0, H0) for one (rho, tau, t).

    E0 = eps0^{-1/2} exp(tau (x.rho - t) + i sqrt(tau^2+k^2) x.rho_perp) eta
    H0 = mu0^{-1/2}  (same exponential) theta
    with curl E0 = i omega mu0 H0 and curl H0 = -i omega eps0 E0 exactly.
    """

    medium: Medium
    frame: DirectionFrame
    tau: float
    t: float = 0.0
    exponent_cap: float = EXPONENT_CAP

    @property
    def k(self) -> float:
        return wavenumber(self.medium)

    @property
    def amplitudes(self) -> CgoAmplitudes:
        return make_amplitudes(self.frame, self.tau, self.k)

    def with_t(self, t: float) -> "CgoField":
        """Same probe recentered at pseudo-time t (fields scale by exp(-tau dt))."""
        return CgoField(self.medium, self.frame, self.tau, t, self.exponent_cap)

    def _phase(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        xr = pts @ self.frame.rho
        xp = pts @ self.frame.rho_perp
        rexp = self.tau * (xr - self.t)
        mx = float(np.max(rexp)) if rexp.size else 0.0
        if mx > self.exponent_cap:
            raise CgoOverflowError(
                f"exponent {mx:.3g} exceeds cap {self.exponent_cap:.3g}; "
                "rescale t (recenter at the domain support along rho)"
            )
        kk = math.sqrt(self.tau**2 + self.k**2)
        return np.exp(rexp + 1j * kk * xp)

    def eval_E(self, points: np.ndarray) -> np.ndarray:
        """E0 at points (..., 3)."""
        amp = self.amplitudes
        ph = self._phase(points)
        return ph[..., None] * (amp.eta / math.sqrt(self.medium.eps0))

    def eval_H(self, points: np.ndarray) -> np.ndarray:
        """H0 at points (..., 3)."""
        amp = self.amplitudes
        ph = self._phase(points)
        return ph[..., None] * (amp.theta / math.sqrt(self.medium.mu0))

    def eval_curl_E(self, points: np.ndarray) -> np.ndarray:
        """curl E0 = i omega mu0 H0, evaluated analytically."""
        return 1j * self.medium.omega * self.medium.mu0 * self.eval_H(points)


@dataclass(frozen=True)
class PlaneWave:
    """Propagating plane wave E = p exp(i k d.x), H = (d x p) sqrt(eps0/mu0) exp(...).

    d is a real unit propagation direction and p a real unit polarization
    orthogonal to d; this is the standard exact solution used to
    manufacture boundary data for convergence studies.
    """

    medium: Medium
    d: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=float).reshape(3)
        p = np.asarray(self.p, dtype=float).reshape(3)
        d = d / float(np.linalg.norm(d))
        p = p - float(p @ d) * d
        p = p / float(np.linalg.norm(p))
        d.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p", p)

    def eval_E(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        k = wavenumber(self.medium)
        ph = np.exp(1j * k * (pts @ self.d))
        return ph[..., None] * self.p.astype(complex)

    def eval_H(self, points: np.ndarray) -> np.ndarray:
        # curl E = i k (d x p) e^{i k d.x} = i omega mu0 H
        pts = np.asarray(points, dtype=float)
        k = wavenumber(self.medium)
        ph = np.exp(1j * k * (pts @ self.d))
        amp = np.cross(self.d, self.p) * (k / (self.medium.omega * self.medium.mu0))
        return ph[..., None] * amp.astype(complex)


def _fd_divergence(eval_vec, points: np.ndarray, step: float) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    div = np.zeros(pts.shape[:-1], dtype=complex)
    for d in range(3):
        dp = np.zeros(3)
        dp[d] = step
        div += (eval_vec(pts + dp)[..., d] - eval_vec(pts - dp)[..., d]) / (2 * step)
    return div


def validate_potentials(field, medium: Medium, points: np.ndarray,
                        step: float = 1e-5) -> Tuple[float, float]:
    """Sup norms of the scalar potentials Phi = (i/omega) div(eps0 E) and
    Psi = (i/omega) div(mu0 H), evaluated by central differences.

    Both vanish identically for admissible probes; for discrete solutions
    they decay with the mesh.  `field` needs eval_E / eval_H callables.
    """
    div_e = _fd_divergence(field.eval_E, points, step) * medium.eps0
    div_h = _fd_divergence(field.eval_H, points, step) * medium.mu0
    phi = np.abs(div_e) / medium.omega
    psi = np.abs(div_h) / medium.omega
    return float(phi.max()), float(psi.max())
