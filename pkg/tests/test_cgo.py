from __future__ import annotations

import math

import numpy as np
import pytest

from emenclose.cgo import (
    CgoField,
    CgoOverflowError,
    DirectionFrame,
    PlaneWave,
    make_amplitudes,
    make_frame,
    make_zeta,
    sommerfeld_symbol,
    validate_potentials,
    zeta_norm,
)
from emenclose.geometry import Medium, wavenumber

SQRT2 = math.sqrt(2.0)
SQRT5 = math.sqrt(5.0)

# Frozen single-probe example at rho = e3, tau = 2, k = 1, derived by hand:
# frame picks rho_perp = e1, so a = e2, b = (e1 + i e3)/sqrt(2),
# zeta = (sqrt(5), 0, -2i), |zeta| = 3, and the amplitudes reduce to
#   eta   = (0, 1/3 + i (2 + sqrt 5)/(3 sqrt 2), 0)
#   theta = (-(4 + 2 sqrt 5)/(3 sqrt 2) + 2i/3, 0,
#            sqrt(5)/3 + i (2 sqrt 5 + 5)/(3 sqrt 2))
ETA_Y = 1.0 / 3.0 + 1j * 0.9984508135774028
THETA_X = -1.996901627154806 + 2j / 3.0
THETA_Z = 0.7453559924999299 + 1j * 2.2326038551369903


def test_frozen_probe_example():
    frame = make_frame((0.0, 0.0, 1.0))
    assert np.allclose(frame.rho_perp, [1.0, 0.0, 0.0])
    assert np.allclose(frame.a, [0.0, 1.0, 0.0])
    zeta = make_zeta(frame, 2.0, 1.0)
    assert np.allclose(zeta, [SQRT5, 0.0, -2.0j], atol=1e-15)
    assert zeta_norm(2.0, 1.0) == pytest.approx(3.0)
    amp = make_amplitudes(frame, 2.0, 1.0)
    assert np.allclose(amp.eta, [0.0, ETA_Y, 0.0], atol=1e-14)
    assert np.allclose(amp.theta, [THETA_X, 0.0, THETA_Z], atol=1e-14)
    y0_expect = np.concatenate((
        [0.0], [0.0, 1.0 / 3.0, 0.0],
        [1.0 / (3.0 * SQRT2), 0.0, 1j / (3.0 * SQRT2)],
        [(SQRT5 + 2.0) / (3.0 * SQRT2)]))
    assert np.allclose(amp.y0, y0_expect, atol=1e-14)
    assert np.allclose(amp.x0, np.concatenate(([0.0], amp.eta, amp.theta, [0.0])))


def test_literal_zeta_hat_for_b_breaks_normalization():
    # b must be the conjugate of zeta_hat: pairing with zeta_hat itself
    # is isotropic (zeta_hat . zeta_hat = 0) and would kill the probe.
    frame = make_frame((0.0, 0.0, 1.0))
    assert complex(frame.zeta_hat @ frame.b) == pytest.approx(1.0, abs=1e-14)
    assert complex(frame.zeta_hat @ frame.zeta_hat) == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(frame.b, np.conj(frame.zeta_hat))


def test_make_frame_deterministic_tie_break():
    # all components equal: the lowest axis index wins
    frame = make_frame(np.ones(3))
    e0 = np.zeros(3)
    e0[0] = 1.0
    v = e0 - float(e0 @ frame.rho) * frame.rho
    assert np.allclose(frame.rho_perp, v / np.linalg.norm(v))
    again = make_frame(np.ones(3))
    assert np.array_equal(frame.rho_perp, again.rho_perp)


def test_direction_frame_validation():
    with pytest.raises(ValueError, match="unit"):
        DirectionFrame(rho=np.array([2.0, 0.0, 0.0]),
                       rho_perp=np.array([0.0, 1.0, 0.0]))
    with pytest.raises(ValueError, match="orthogonal"):
        DirectionFrame(rho=np.array([1.0, 0.0, 0.0]),
                       rho_perp=np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        make_frame((0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        make_zeta(make_frame((0.0, 0.0, 1.0)), 0.0, 1.0)


def test_random_frame_identities():
    rng = np.random.default_rng(1234)
    k = 1.3
    eye8 = np.eye(8)
    for _ in range(100):
        rho = rng.normal(size=3)
        tau = float(10.0 ** rng.uniform(-0.3, 3.0))
        frame = make_frame(rho)
        assert abs(frame.rho @ frame.rho - 1.0) < 1e-12
        assert abs(frame.rho_perp @ frame.rho_perp - 1.0) < 1e-12
        assert abs(frame.rho @ frame.rho_perp) < 1e-12
        assert abs(frame.a @ frame.a - 1.0) < 1e-12
        zeta = make_zeta(frame, tau, k)
        zn = zeta_norm(tau, k)
        amp = make_amplitudes(frame, tau, k)
        assert abs(zeta @ zeta - k * k) <= 1e-12 * zn**2
        # |zeta| matches the Hermitian norm
        assert abs(np.vdot(zeta, zeta).real - zn * zn) <= 1e-12 * zn**2
        # eta and theta are a curl pair orthogonal to zeta
        assert np.linalg.norm(np.cross(zeta, amp.eta) - k * amp.theta) \
            <= 1e-12 * k * np.linalg.norm(amp.theta)
        assert abs(zeta @ amp.eta) <= 1e-12 * zn * np.linalg.norm(amp.eta)
        P = sommerfeld_symbol(zeta)
        assert np.linalg.norm(P @ P - (zeta @ zeta) * eye8) <= 1e-12 * zn**2
        resid = (P - k * eye8) @ amp.y0
        scale = zn * np.linalg.norm(amp.y0)
        assert abs(resid[0]) <= 1e-12 * scale
        assert abs(resid[7]) <= 1e-12 * scale


def test_sommerfeld_symbol_structure():
    z = np.array([1.0 + 2.0j, -0.5, 3.0j])
    P = sommerfeld_symbol(z)
    assert P.shape == (8, 8)
    # dot blocks
    assert np.allclose(P[0, 1:4], z) and np.allclose(P[1:4, 0], z)
    assert np.allclose(P[7, 4:7], z) and np.allclose(P[4:7, 7], z)
    # cross blocks are antisymmetric negatives of each other
    assert np.allclose(P[1:4, 4:7], -P[4:7, 1:4])
    assert np.allclose(P[1:4, 4:7], -P[1:4, 4:7].T)
    v = np.array([0.2, -1.0, 0.7])
    assert np.allclose(P[1:4, 4:7] @ v, np.cross(z, v))


def test_eta_approaches_rotational_limit_first_order():
    medium = Medium()
    k = wavenumber(medium)
    frame = make_frame((0.0, 0.0, 1.0))
    limit = 1j * k * frame.a
    devs = [np.linalg.norm(make_amplitudes(frame, tau, k).eta - limit)
            for tau in (100.0, 200.0, 400.0)]
    for a, b in zip(devs, devs[1:]):
        assert 1.9 <= a / b <= 2.1


def _fd_curl(eval_vec, pts: np.ndarray, step: float = 1e-5) -> np.ndarray:
    curl = np.zeros(pts.shape, dtype=complex)
    for d in range(3):
        dp = np.zeros(3)
        dp[d] = step
        grad_d = (eval_vec(pts + dp) - eval_vec(pts - dp)) / (2.0 * step)
        e = np.zeros(3)
        e[d] = 1.0
        curl += np.cross(np.broadcast_to(e, grad_d.shape), grad_d)
    return curl


@pytest.mark.parametrize("rho", [(0.0, 0.0, 1.0), (1.0, 2.0, -0.5)])
def test_cgo_field_solves_curl_system(rho):
    medium = Medium(eps0=1.5, mu0=0.8, omega=1.2)
    field = CgoField(medium, make_frame(rho), tau=2.0, t=0.5)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.4, 0.4, size=(20, 3))
    curl_e = _fd_curl(field.eval_E, pts)
    expect = 1j * medium.omega * medium.mu0 * field.eval_H(pts)
    scale = np.abs(expect).max()
    assert np.abs(curl_e - expect).max() <= 1e-8 * scale
    curl_h = _fd_curl(field.eval_H, pts)
    expect_h = -1j * medium.omega * medium.eps0 * field.eval_E(pts)
    assert np.abs(curl_h - expect_h).max() <= 1e-8 * np.abs(expect_h).max()
    assert np.allclose(field.eval_curl_E(pts), expect)


def test_cgo_field_is_divergence_free():
    medium = Medium()
    field = CgoField(medium, make_frame((0.0, 1.0, 0.0)), tau=3.0, t=0.8)
    rng = np.random.default_rng(11)
    pts = rng.uniform(-0.3, 0.3, size=(10, 3))
    phi, psi = validate_potentials(field, medium, pts)
    scale = float(np.abs(field.eval_E(pts)).max())
    assert phi <= 1e-8 * scale
    assert psi <= 1e-8 * scale


def test_cgo_field_grows_along_rho():
    field = CgoField(Medium(), make_frame((0.0, 0.0, 1.0)), tau=4.0, t=1.0)
    lo = np.abs(field.eval_E(np.array([0.0, 0.0, -0.5])))
    hi = np.abs(field.eval_E(np.array([0.0, 0.0, 0.5])))
    assert hi.max() > lo.max() * math.exp(4.0 * 0.9)


def test_cgo_field_threshold_shift_is_exact_rescale():
    field = CgoField(Medium(), make_frame((1.0, 1.0, 0.0)), tau=2.5, t=0.2)
    shifted = field.with_t(0.7)
    pts = np.array([[0.1, -0.2, 0.3], [0.0, 0.0, 0.0]])
    factor = math.exp(-2.5 * (0.7 - 0.2))
    assert np.allclose(shifted.eval_E(pts), field.eval_E(pts) * factor,
                       rtol=1e-13)
    assert np.allclose(shifted.eval_H(pts), field.eval_H(pts) * factor,
                       rtol=1e-13)


def test_cgo_field_overflow_guard():
    field = CgoField(Medium(), make_frame((0.0, 0.0, 1.0)), tau=500.0, t=0.0)
    with pytest.raises(CgoOverflowError, match="rescale t"):
        field.eval_E(np.array([0.0, 0.0, 1.0]))
    # recentering at the domain support makes the same point safe
    recentered = field.with_t(1.0)
    assert np.isfinite(recentered.eval_E(np.array([0.0, 0.0, 1.0]))).all()


def test_plane_wave_normalizes_and_solves_curl_system():
    medium = Medium(eps0=2.0, mu0=0.5, omega=1.5)
    pw = PlaneWave(medium, (0.0, 0.0, 2.0), (3.0, 0.0, 1.0))
    assert np.linalg.norm(pw.d) == pytest.approx(1.0)
    assert np.linalg.norm(pw.p) == pytest.approx(1.0)
    assert abs(pw.d @ pw.p) < 1e-14
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.5, 0.5, size=(15, 3))
    curl_e = _fd_curl(pw.eval_E, pts)
    expect = 1j * medium.omega * medium.mu0 * pw.eval_H(pts)
    assert np.abs(curl_e - expect).max() <= 1e-8 * np.abs(expect).max()
    phi, psi = validate_potentials(pw, medium, pts)
    assert max(phi, psi) <= 1e-8
