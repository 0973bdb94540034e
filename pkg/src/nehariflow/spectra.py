"""Linear spectral threshold omega_0 = -inf spec(-Lap + V).

Admissible frequencies must exceed omega_0.  The smallest eigenvalue of
the discretized Schrodinger operator is computed by shifted inverse power
iteration: the shift starts strictly below the spectrum (from a rigorous
bound where available, otherwise from variational probes) and is refreshed
towards the current Rayleigh quotient once the iteration localizes, which
keeps the contraction factor small without a general eigensolver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import IterativeFailureError
from .problem import Field, ProblemSpec

__all__ = ["LinearGroundState", "compute_omega0"]


@dataclass(frozen=True)
class LinearGroundState:
    """Smallest eigenpair of -Lap + V on the grid.

    omega0    = -lambda_min (admissibility threshold)
    phi_lin   eigenvector, L2-normalized, sign-fixed nonnegative
    """

    omega0: float
    phi_lin: Field
    iterations: int
    residual: float


def _h_apply_factory(ops):
    """(H v, B v) with H = -Lap + V weak or nodal, B the mass pairing."""
    if getattr(ops, "weak_form", False):
        k, vmat, m = ops.K, ops.V, ops.M

        def h_apply(v):
            return k.dot(v) + vmat.dot(v)

        def b_apply(v):
            return m.dot(v)
    else:
        pot = ops.potential_nodal

        def h_apply(v):
            return ops.laplacian(v) + pot * v

        def b_apply(v):
            return v
    return h_apply, b_apply


def _probe_shift(spec, ops, h_apply, b_apply):
    """A shift at or below the bottom of the spectrum.

    Bounded potentials give the rigorous form bound inf V; the Dirac case
    carries its own 1D Sobolev bound.  Otherwise take twice the best
    Rayleigh quotient over a family of Gaussian probes (a safe margin for
    single-well ground states) and let shift refreshes do the rest.
    """
    slb = spec.potential.spectral_lower_bound()
    if slb is not None:
        return slb - 1.0
    coords = ops.grid.coords
    if len(coords) == 1:
        rsq = np.asarray(coords[0], dtype=float) ** 2
    else:
        mesh = np.meshgrid(*coords, indexing="ij")
        rsq = sum(m ** 2 for m in mesh).reshape(-1)
    best = 0.0
    for w in 2.0 ** np.arange(-3, 6):
        v = np.exp(-rsq / (2.0 * w ** 2))
        denom = float(v @ b_apply(v))
        if denom > 0:
            best = min(best, float(v @ h_apply(v)) / denom)
    return min(-1.0, 2.0 * best - 1.0)


def _make_shifted_solver(ops, h_apply, b_apply, shift):
    """Solver for (H - shift B) x = rhs."""
    if getattr(ops, "weak_form", False):
        lu = splu(sp.csc_matrix(ops.K + ops.V - shift * ops.M))
        return lambda rhs: lu.solve(rhs)
    pot = ops.potential_nodal
    if hasattr(ops, "_A"):          # sparse 1D stencil: direct factorization
        mat = ops._A + sp.diags(pot - shift)
        lu = splu(sp.csc_matrix(mat))
        return lambda rhs: lu.solve(rhs)

    # transform families: CG with the exactly invertible constant part
    c_pre = max(float(pot.min()) - shift, 1e-2)
    precond = ops._make_implicit(c_pre)
    n = ops.grid.ndof

    def solve(rhs):
        x = np.zeros_like(rhs)
        r = rhs.copy()
        z = precond(r)
        p = z.copy()
        rz = float(np.dot(r, z))
        bnorm = math.sqrt(float(np.dot(rhs, rhs)))
        for _ in range(10 * n):
            if math.sqrt(float(np.dot(r, r))) <= 1e-12 * bnorm:
                return x
            ap = h_apply(p) - shift * p
            a = rz / float(np.dot(p, ap))
            x += a * p
            r -= a * ap
            z = precond(r)
            rz_new = float(np.dot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise IterativeFailureError("inner CG for the spectral solve did "
                                    "not converge")
    return solve


def compute_omega0(spec: ProblemSpec, ops, tol: float = 1e-10,
                   max_iters: int = 10000) -> LinearGroundState:
    """Smallest eigenvalue and ground eigenvector of -Lap + V on ``ops``.

    Convergence is declared when successive Rayleigh quotients move by
    less than ``tol * max(1, |lambda|)``.
    """
    h_apply, b_apply = _h_apply_factory(ops)
    shift = _probe_shift(spec, ops, h_apply, b_apply)
    solve = _make_shifted_solver(ops, h_apply, b_apply, shift)

    coords = ops.grid.coords
    if len(coords) == 1:
        start = np.exp(-(np.asarray(coords[0]) ** 2) / 2.0)
    else:
        mesh = np.meshgrid(*coords, indexing="ij")
        start = np.exp(-sum(m ** 2 for m in mesh) / 2.0).reshape(-1)
    x = start / math.sqrt(float(start @ b_apply(start)))
    lam = float(x @ h_apply(x))
    iterations = 0
    since_refresh = 0
    for k in range(1, max_iters + 1):
        y = solve(b_apply(x))
        nrm = math.sqrt(float(y @ b_apply(y)))
        if not np.isfinite(nrm) or nrm == 0.0:
            raise IterativeFailureError("inverse iteration broke down",
                                        best_value=-lam, best_vector=x)
        x = y / nrm
        lam_new = float(x @ h_apply(x))
        dlam = abs(lam_new - lam)
        lam = lam_new
        iterations = k
        since_refresh += 1
        if dlam <= tol * max(1.0, abs(lam)):
            break
        if since_refresh >= 25 and dlam > 100 * tol * max(1.0, abs(lam)):
            # iteration localized but contraction is slow: move the shift
            # just below the current Rayleigh quotient
            shift = lam - 0.1 * max(1.0, abs(lam))
            solve = _make_shifted_solver(ops, h_apply, b_apply, shift)
            since_refresh = 0
    else:
        raise IterativeFailureError(
            f"inverse iteration did not converge in {max_iters} steps",
            best_value=-lam, best_vector=x)

    if float(np.sum(x)) < 0:
        x = -x
    mx = float(np.max(np.abs(x)))
    if float(x.min()) < -1e-6 * mx:
        raise IterativeFailureError(
            "converged eigenvector changes sign; not a ground state",
            best_value=-lam, best_vector=x)
    x = np.maximum(x, 0.0)
    x /= math.sqrt(float(x @ b_apply(x)))
    r = h_apply(x) - lam * b_apply(x)
    if getattr(ops, "weak_form", False):
        z = ops._mass_solve(r)
        residual = math.sqrt(max(float(z @ r), 0.0))
    else:
        residual = ops.norm_l2(r)
    return LinearGroundState(omega0=-lam, phi_lin=Field(x, ops.grid,
                                                        nonneg_hint=True),
                             iterations=iterations, residual=residual)
