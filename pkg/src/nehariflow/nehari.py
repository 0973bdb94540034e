"""Projection onto the Nehari manifold and canonical seeds.

The manifold is the set of nonzero fields with vanishing Nehari functional
I_omega.  Any field with positive quadratic part has a unique multiple on
the manifold, with scale

    lambda = (I*_omega(phi) / ||phi||_p^p)^(1/(2 alpha)),  p = 2 alpha + 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConfigurationError, ContractViolationError,
                     SpectralConditionError)
from .problem import Ball, Field, ProblemSpec

__all__ = ["NehariProjection", "lambda_omega", "project_to_nehari",
           "gaussian_seed"]

#: relative tolerance for membership |I_omega| <= NEHARI_TOL * max(1, I*)
NEHARI_TOL = 1e-10


@dataclass(frozen=True)
class NehariProjection:
    """Result of projecting a field onto the Nehari manifold."""

    scale: float          # multiplier lambda applied to the input
    field: Field          # projected field
    nehari_sign: int      # sign of I_omega at the input (+1, 0, -1)
    lp_pow: float = 0.0   # ||field||_p^p after scaling (reused by flows)


def _quadratic_parts(values: np.ndarray, spec: ProblemSpec, ops):
    istar = (ops.dirichlet_form(values) + ops.potential_form(values)
             + spec.omega * ops.inner(values, values))
    lp = ops.lp_norm_pow(values, spec.p)
    return istar, lp


def lambda_omega(phi: Field, spec: ProblemSpec, ops) -> float:
    """Projection scale of ``phi``; errors on inadmissible inputs.

    The scale is < 1 exactly when I_omega(phi) < 0 and > 1 when it is
    positive; on a ray it transforms as lambda(c phi) = lambda(phi)/c.
    """
    if not (phi.grid is ops.grid or phi.grid == ops.grid):
        raise ContractViolationError("field grid does not match operator grid")
    phi.check_finite()
    v = phi.values
    istar, lp = _quadratic_parts(v, spec, ops)
    if lp <= 0.0:
        raise ContractViolationError("cannot project the zero field")
    if istar <= 0.0:
        raise SpectralConditionError(
            f"quadratic part I* = {istar:.3e} is not positive; omega is "
            "at or below the admissible threshold for this field")
    return float((istar / lp) ** (1.0 / (2.0 * spec.alpha)))


def project_to_nehari(phi: Field, spec: ProblemSpec, ops) -> NehariProjection:
    """Scale ``phi`` onto the Nehari manifold."""
    scale = lambda_omega(phi, spec, ops)
    istar, lp = _quadratic_parts(phi.values, spec, ops)
    nehari_in = istar - lp
    sign = 0 if nehari_in == 0.0 else (1 if nehari_in > 0 else -1)
    out = Field(scale * phi.values, phi.grid, nonneg_hint=phi.nonneg_hint)
    istar_p, lp_p = _quadratic_parts(out.values, spec, ops)
    if abs(istar_p - lp_p) > NEHARI_TOL * max(1.0, abs(istar_p)):
        raise ContractViolationError(
            "projection failed to land on the Nehari manifold")
    return NehariProjection(scale=scale, field=out, nehari_sign=sign,
                            lp_pow=lp_p)


def _seed_values(spec: ProblemSpec, ops, shift, kind: str) -> np.ndarray:
    coords = ops.grid.coords
    if isinstance(spec.domain, Ball):
        (r,) = coords
        s = 0.0 if shift is None else float(np.atleast_1d(shift)[0])
        vals = np.exp(-((r - s) ** 2) / 2.0)
        if kind == "sech_gaussian":
            vals = vals / np.cosh(r - s)
        return vals
    if shift is None:
        shift = (0.0,) * spec.dim
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift.size != spec.dim:
        raise ConfigurationError("seed shift needs one component per axis")
    mesh = np.meshgrid(*coords, indexing="ij") if spec.dim > 1 else [coords[0]]
    rsq = sum((m - s) ** 2 for m, s in zip(mesh, shift))
    vals = np.exp(-rsq / 2.0)
    if kind == "sech_gaussian":
        if spec.dim != 1:
            raise ConfigurationError("the sech-modulated seed is 1D only")
        vals = vals / np.cosh(mesh[0] - shift[0])
    return np.asarray(vals, dtype=float).reshape(-1)


def gaussian_seed(spec: ProblemSpec, ops, shift=None,
                  kind: str = "gaussian") -> Field:
    """Gaussian bump (optionally shifted or sech-modulated), truncated to
    the grid and projected onto the Nehari manifold."""
    if kind not in ("gaussian", "sech_gaussian"):
        raise ConfigurationError(f"unknown seed kind {kind!r}")
    raw = Field(_seed_values(spec, ops, shift, kind), ops.grid,
                nonneg_hint=True)
    return project_to_nehari(raw, spec, ops).field
