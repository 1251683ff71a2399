"""Sparse symmetric solves: preconditioned CG/COCG with diagnostics.

The assembled operator is symmetric (complex-symmetric in general; purely
real for the lossless constant background), indefinite only beyond the
first cavity resonance, which the medium guard excludes.  Systems below
`direct_threshold` unknowns go to sparse LU; larger ones use a
conjugate-gradient iteration whose Lanczos coefficients also provide a
condition estimate of the preconditioned operator.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = (
    "SolveDiagnostics",
    "SolverError",
    "make_preconditioner",
    "solve_symmetric",
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Krylov stagnation/divergence; possibly operating near a resonance."""


@dataclass
class SolveDiagnostics:
    iterations: int
    relres: float
    cond_est: float
    ritz_min: float = float("nan")

    def log_line(self) -> str:
        return (
            f"solve: iters={self.iterations} relres={self.relres:.3e} "
            f"cond_est={self.cond_est:.3e}"
        )


def _lanczos_spectrum(alphas, betas) -> Tuple[float, float]:
    """Extreme eigenvalues of the CG Lanczos tridiagonal matrix."""
    m = len(alphas)
    if m == 0:
        return float("nan"), float("nan")
    diag = np.empty(m)
    off = np.empty(max(m - 1, 0))
    for j in range(m):
        diag[j] = 1.0 / alphas[j]
        if j > 0:
            diag[j] += betas[j - 1] / alphas[j - 1]
        if j < m - 1:
            off[j] = math.sqrt(max(betas[j], 0.0)) / alphas[j]
    if m == 1:
        return float(diag[0]), float(diag[0])
    from scipy.linalg import eigvalsh_tridiagonal

    ev = eigvalsh_tridiagonal(diag, off)
    return float(ev[0]), float(ev[-1])


def _pcg_real(A, b: np.ndarray, M: Callable[[np.ndarray], np.ndarray],
              tol: float, maxiter: int):
    """Preconditioned CG for a real symmetric system; returns Lanczos data."""
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, 0, 0.0, [], []
    z = M(r)
    p = z.copy()
    rz = float(r @ z)
    alphas, betas = [], []
    for it in range(1, maxiter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SolverError(
                "CG encountered a non-positive curvature direction; the "
                "operator is not positive definite (possible near-resonance)"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        alphas.append(alpha)
        if rnorm <= tol * bnorm:
            return x, it, rnorm / bnorm, alphas, betas
        z = M(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    raise SolverError(
        f"CG failed to converge in {maxiter} iterations "
        f"(relres={rnorm / bnorm:.3e}); possible near-resonance"
    )


def _cocg_complex(A, b: np.ndarray, M: Callable[[np.ndarray], np.ndarray],
                  tol: float, maxiter: int):
    """Conjugate-orthogonal CG for complex symmetric systems.

    Identical to CG but with the unconjugated bilinear form; valid for
    A = A^T (not Hermitian).
    """
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, 0, 0.0, [], []
    z = M(r)
    p = z.copy()
    rz = complex(r @ z)
    alphas, betas = [], []
    for it in range(1, maxiter + 1):
        Ap = A @ p
        pAp = complex(p @ Ap)
        if pAp == 0.0:
            raise SolverError("COCG breakdown: p^T A p = 0")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        alphas.append(abs(alpha))
        if rnorm <= tol * bnorm:
            return x, it, rnorm / bnorm, alphas, betas
        z = M(r)
        rz_new = complex(r @ z)
        if rz == 0.0:
            raise SolverError("COCG breakdown: r^T z = 0")
        beta = rz_new / rz
        betas.append(abs(beta))
        rz = rz_new
        p = z + beta * p
    raise SolverError(
        f"COCG failed to converge in {maxiter} iterations "
        f"(relres={rnorm / bnorm:.3e}); possible near-resonance"
    )


def make_preconditioner(A: sp.csr_matrix, kind: str = "amg",
                        near_nullspace: Optional[np.ndarray] = None):
    """Return a callable applying the preconditioner to a real vector.

    kind = "jacobi": inverse-diagonal scaling (the baseline mode).
    kind = "amg": smoothed-aggregation multigrid V-cycle (deterministic
    setup), with the translational near-nullspace. Falls back to jacobi
    for very small systems where a hierarchy is pointless.
    """
    n = A.shape[0]
    if kind == "jacobi" or (kind == "amg" and n < 512):
        d = A.diagonal().copy()
        d[d == 0.0] = 1.0
        inv = 1.0 / d
        return lambda r: inv * r
    if kind == "amg":
        import pyamg

        B = near_nullspace
        if B is None:
            B = np.ones((n, 1))
        ml = pyamg.smoothed_aggregation_solver(
            A.tocsr().astype(float), B=B, max_coarse=400
        )
        M = ml.aspreconditioner(cycle="V")
        return lambda r: M @ r
    raise ValueError(f"unknown preconditioner kind {kind!r}")


def solve_symmetric(A: sp.spmatrix, b: np.ndarray, *,
                    tol: float = 1e-10,
                    direct_threshold: int = 20000,
                    iter_cap_factor: float = 20.0,
                    preconditioner: str = "amg",
                    near_nullspace: Optional[np.ndarray] = None,
                    reusable=None) -> Tuple[np.ndarray, SolveDiagnostics]:
    """Solve the symmetric system A x = b (b may be complex for real A).

    `reusable` may carry a previously prepared factorization/preconditioner
    from `prepare_solver`, amortizing setup across many right-hand sides.
    """
    solver = reusable if reusable is not None else prepare_solver(
        A, tol=tol, direct_threshold=direct_threshold,
        iter_cap_factor=iter_cap_factor, preconditioner=preconditioner,
        near_nullspace=near_nullspace)
    x, diag = solver(b)
    log.info(diag.log_line())
    return x, diag


def prepare_solver(A: sp.spmatrix, *, tol: float = 1e-10,
                   direct_threshold: int = 20000,
                   iter_cap_factor: float = 20.0,
                   preconditioner: str = "amg",
                   near_nullspace: Optional[np.ndarray] = None):
    """Build a reusable solve callable b -> (x, SolveDiagnostics)."""
    n = A.shape[0]
    if n == 0:
        def empty_solve(b):
            return np.zeros(0, dtype=complex), SolveDiagnostics(0, 0.0, 1.0, 1.0)
        return empty_solve

    A = A.tocsr()
    is_complex = np.iscomplexobj(A.data) and np.abs(A.data.imag).max() > 0.0
    if is_complex:
        A = A.astype(complex)
    else:
        A = A.astype(float) if np.iscomplexobj(A.data) else A

    if n < direct_threshold:
        lu = spla.splu(A.tocsc())

        def direct_solve(b):
            b = np.asarray(b)
            if np.iscomplexobj(b) and not is_complex:
                x = lu.solve(b.real.astype(float)) + 1j * lu.solve(b.imag.astype(float))
            else:
                x = lu.solve(b.astype(A.dtype, copy=False))
            bnorm = float(np.linalg.norm(b))
            relres = 0.0 if bnorm == 0.0 else float(np.linalg.norm(A @ x - b)) / bnorm
            return x, SolveDiagnostics(iterations=1, relres=relres, cond_est=0.0)

        return direct_solve

    maxiter = int(iter_cap_factor * math.sqrt(n)) + 10
    if is_complex:
        Mc = make_preconditioner(
            sp.csr_matrix((np.abs(A.data), A.indices, A.indptr), shape=A.shape),
            "jacobi")

        def cocg_solve(b):
            x, it, relres, alphas, betas = _cocg_complex(
                A, b.astype(complex), Mc, tol, maxiter)
            lmin, lmax = _lanczos_spectrum(alphas, betas)
            cond = abs(lmax / lmin) if lmin not in (0.0, float("nan")) else float("nan")
            return x, SolveDiagnostics(it, relres, cond, lmin)

        return cocg_solve

    M = make_preconditioner(A, preconditioner, near_nullspace)

    def cg_solve(b):
        b = np.asarray(b)
        parts = []
        its = 0
        relres = 0.0
        lanczos = None
        comps = (b.real, b.imag) if np.iscomplexobj(b) else (b,)
        for comp in comps:
            comp = np.ascontiguousarray(comp, dtype=float)
            x, it, rr, alphas, betas = _pcg_real(A, comp, M, tol, maxiter)
            parts.append(x)
            its = max(its, it)
            relres = max(relres, rr)
            if lanczos is None and alphas:
                lanczos = (alphas, betas)
        x = parts[0] + 1j * parts[1] if len(parts) == 2 else parts[0].astype(complex)
        if lanczos is not None:
            lmin, lmax = _lanczos_spectrum(*lanczos)
            cond = lmax / lmin if lmin > 0 else float("inf")
        else:
            lmin, cond = float("nan"), 0.0
        return x, SolveDiagnostics(its, relres, cond, lmin)

    return cg_solve
