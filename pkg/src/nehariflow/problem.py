"""Problem definition and the action/energy functional calculus.

The continuous model is the focusing stationary NLS

    -Lap(phi) + V phi + omega phi - |phi|^(2 alpha) phi = 0

on a truncated domain with homogeneous Dirichlet data.  All functionals
are evaluated through a discretization's quadrature, so the algebraic
identities between them hold exactly at the discrete level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigurationError, ContractViolationError
from .potentials import Potential

__all__ = [
    "Box", "Ball", "ProblemSpec", "Field", "FunctionalReport",
    "functionals", "snls_residual",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned tensor domain; one (lo, hi) pair per axis."""

    bounds: tuple

    def __post_init__(self):
        for pair in self.bounds:
            lo, hi = pair
            if not lo < hi:
                raise ConfigurationError(f"degenerate box axis {pair}")

    @property
    def dim(self):
        return len(self.bounds)


@dataclass(frozen=True)
class Ball:
    """Ball of given radius about the origin (radial reduction target)."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("ball radius must be positive")


@dataclass(frozen=True)
class ProblemSpec:
    """Parameters of one ground-state problem.

    alpha      nonlinearity exponent, 0 < alpha (< 2/(d-2) for d = 3)
    omega      frequency; admissibility omega > omega_0 is enforced when a
               flow starts, not at construction
    dim        ambient dimension d in {1, 2, 3}
    potential  attractive potential (V <= 0)
    domain     Box (full geometry) or Ball (radial reduction)
    theta      nonnegative shift for the modified implicit splitting
    """

    alpha: float
    omega: float
    dim: int
    potential: Potential
    domain: Box | Ball
    theta: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError("dim must be 1, 2 or 3")
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        if self.dim >= 3 and not self.alpha < 2.0 / (self.dim - 2):
            raise ConfigurationError(
                f"alpha={self.alpha} is not H^1-subcritical in d={self.dim}")
        if self.theta < 0:
            raise ConfigurationError("theta must be nonnegative")
        if self.dim not in self.potential.allowed_dims:
            raise ConfigurationError(
                f"{type(self.potential).__name__} is not defined in "
                f"d={self.dim}")
        if isinstance(self.domain, Box):
            if self.domain.dim != self.dim:
                raise ConfigurationError("box dimension does not match dim")
            if self.dim == 3:
                raise ConfigurationError("full 3D tensor grids are not "
                                         "supported; use radial geometry")
        else:
            if not self.potential.radial:
                raise ConfigurationError("radial geometry requires a "
                                         "radially symmetric potential")
        from .potentials import InversePower
        if isinstance(self.potential, InversePower):
            if not self.potential.sigma < min(2, self.dim):
                raise ConfigurationError(
                    f"inverse-power sigma={self.potential.sigma} must be "
                    f"< min(2, d) = {min(2, self.dim)}")

    @property
    def geometry(self) -> str:
        return "radial" if isinstance(self.domain, Ball) else "full"

    @property
    def p(self) -> float:
        """Nonlinear Lebesgue exponent 2 alpha + 2."""
        return 2.0 * self.alpha + 2.0


@dataclass(frozen=True)
class Field:
    """Real coefficient vector over a grid's free nodes.

    Dirichlet boundary values are structurally zero (boundary nodes carry
    no coefficients).  ``nonneg_hint`` records whether the provenance of
    the field guarantees nonnegativity (seed choice plus a discrete
    maximum principle); it is advisory, not enforced.
    """

    values: np.ndarray
    grid: object
    nonneg_hint: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ContractViolationError("field values must be a flat vector")
        ndof = getattr(self.grid, "ndof", None)
        if ndof is not None and v.size != ndof:
            raise ContractViolationError(
                f"field has {v.size} values but grid has {ndof} free nodes")

    def check_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise ContractViolationError("field contains non-finite values")

    def with_values(self, values, nonneg_hint=None):
        return Field(values, self.grid,
                     self.nonneg_hint if nonneg_hint is None else nonneg_hint)


@dataclass(frozen=True)
class FunctionalReport:
    """All scalar functionals of a field at one frequency.

    mass             ||phi||_L2^2
    energy           E = kinetic + potential - ||phi||_p^p / (alpha + 1)
    action           S = E + omega * mass
    nehari           I = quadratic - lp_norm_pow
    quadratic        I* = kinetic + potential + omega * mass
    potential_energy integral of V |phi|^2
    lp_norm_pow      ||phi||_{2a+2}^{2a+2}
    mu_g             (kinetic + potential - lp_norm_pow) / mass, the
                     Lagrange multiplier of the mass-constrained problem;
                     NaN with mu_g_defined=False for a zero-mass field
    """

    mass: float
    energy: float
    action: float
    nehari: float
    quadratic: float
    potential_energy: float
    lp_norm_pow: float
    mu_g: float
    mu_g_defined: bool = True

    def as_dict(self):
        return {
            "mass": self.mass, "energy": self.energy, "action": self.action,
            "nehari": self.nehari, "quadratic": self.quadratic,
            "potential_energy": self.potential_energy,
            "lp_norm_pow": self.lp_norm_pow, "mu_g": self.mu_g,
        }


def _check_pair(phi: Field, ops) -> np.ndarray:
    if not (phi.grid is ops.grid or phi.grid == ops.grid):
        raise ContractViolationError("field grid does not match operator grid")
    phi.check_finite()
    return phi.values


def functionals(phi: Field, spec: ProblemSpec, ops) -> FunctionalReport:
    """Evaluate every scalar functional of ``phi`` through ``ops``.

    The same quadrature is used for each term, so the identities
    S = I/(alpha+1) + alpha I*/(alpha+1) and I = I* - ||phi||_p^p hold to
    rounding.
    """
    v = _check_pair(phi, ops)
    mass = ops.inner(v, v)
    kinetic = ops.dirichlet_form(v)
    pot = ops.potential_form(v)
    lp = ops.lp_norm_pow(v, spec.p)
    quadratic = kinetic + pot + spec.omega * mass
    nehari = quadratic - lp
    action = quadratic - lp / (spec.alpha + 1.0)
    energy = action - spec.omega * mass
    if mass > 0.0:
        mu_g = (kinetic + pot - lp) / mass
        defined = True
    else:
        mu_g = math.nan
        defined = False
    return FunctionalReport(mass=mass, energy=energy, action=action,
                            nehari=nehari, quadratic=quadratic,
                            potential_energy=pot, lp_norm_pow=lp,
                            mu_g=mu_g, mu_g_defined=defined)


def snls_residual(phi: Field, spec: ProblemSpec, ops) -> float:
    """Norm of the stationary equation residual at ``phi``.

    Pointwise discretizations measure the L2 norm of the nodal residual;
    weak-form (finite element) discretizations measure the L2 Riesz
    representative of the weak residual.  A zero field returns 0 with a
    warning, since the equation is trivially satisfied but uninformative.
    """
    v = _check_pair(phi, ops)
    if not np.any(v):
        warnings.warn("snls_residual of the zero field is trivially zero",
                      stacklevel=2)
        return 0.0
    return ops.residual_norm(v, spec.alpha, spec.omega)
