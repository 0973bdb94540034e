"""Closed-form reference states and asymptotic rescalings.

The free 1D soliton and the single attractive Dirac delta both admit
explicit least action ground states built from powers of sech; they serve
as exact oracles for solver accuracy and convergence studies.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, SpectralConditionError
from .problem import Ball, Field, ProblemSpec

__all__ = [
    "free_soliton", "free_soliton_deriv", "delta_ground_state",
    "delta_ground_state_deriv", "relative_error", "rescale_hat",
    "rescale_check",
]


def _sech(t):
    with np.errstate(over="ignore"):
        return 1.0 / np.cosh(t)


def free_soliton(alpha: float, omega: float, x) -> np.ndarray:
    """Ground state of the free 1D problem (V = 0, omega > 0):

    phi(x) = [(alpha+1) omega]^(1/(2 alpha)) sech(alpha sqrt(omega) x)^(1/alpha)
    """
    if omega <= 0:
        raise SpectralConditionError("the free soliton needs omega > 0")
    x = np.asarray(x, dtype=float)
    amp = ((alpha + 1.0) * omega) ** (1.0 / (2.0 * alpha))
    return amp * _sech(alpha * math.sqrt(omega) * x) ** (1.0 / alpha)


def free_soliton_deriv(alpha: float, omega: float, x) -> np.ndarray:
    """d/dx of the free soliton: -sqrt(omega) tanh(alpha sqrt(omega) x) phi."""
    x = np.asarray(x, dtype=float)
    root = math.sqrt(omega)
    return -root * np.tanh(alpha * root * x) * free_soliton(alpha, omega, x)


def delta_ground_state(alpha: float, omega: float, strength: float,
                       x) -> np.ndarray:
    """Ground state for V = -strength * delta(x), omega > strength^2 / 4:

    phi(x) = [(alpha+1) omega]^(1/(2 alpha))
             sech(alpha sqrt(omega) |x| + atanh(strength/(2 sqrt(omega))))^(1/alpha)

    strength = 0 reduces to the free soliton.
    """
    if strength < 0:
        raise ConfigurationError("delta strength must be nonnegative")
    if omega <= strength ** 2 / 4.0:
        raise SpectralConditionError(
            f"omega must exceed strength^2/4 = {strength ** 2 / 4.0}")
    x = np.asarray(x, dtype=float)
    root = math.sqrt(omega)
    offset = math.atanh(strength / (2.0 * root))
    amp = ((alpha + 1.0) * omega) ** (1.0 / (2.0 * alpha))
    return amp * _sech(alpha * root * np.abs(x) + offset) ** (1.0 / alpha)


def delta_ground_state_deriv(alpha: float, omega: float, strength: float,
                             x) -> np.ndarray:
    """d/dx of the delta ground state away from x = 0.

    The derivative jumps by -strength * phi(0) across the origin; at x = 0
    this returns the right-sided limit's odd extension (sign(0) = 0 gives 0,
    which is the symmetric mean of the two one-sided values).
    """
    x = np.asarray(x, dtype=float)
    root = math.sqrt(omega)
    offset = math.atanh(strength / (2.0 * root))
    phi = delta_ground_state(alpha, omega, strength, x)
    return -root * np.tanh(alpha * root * np.abs(x) + offset) \
        * np.sign(x) * phi


def relative_error(values, exact_values) -> float:
    """max |phi - phi_exact| / max |phi_exact| over the given samples."""
    values = np.asarray(values, dtype=float)
    exact_values = np.asarray(exact_values, dtype=float)
    denom = float(np.max(np.abs(exact_values)))
    if denom == 0.0:
        raise ConfigurationError("reference state is identically zero")
    return float(np.max(np.abs(values - exact_values))) / denom


def rescale_hat(phi: Field, ops) -> Field:
    """L2 normalization phi / ||phi||_L2 (limit object as omega decreases
    to the admissibility threshold)."""
    nrm = ops.norm_l2(phi.values)
    if nrm == 0.0:
        raise ConfigurationError("cannot normalize the zero field")
    return phi.with_values(phi.values / nrm)


def rescale_check(phi: Field, spec: ProblemSpec, ops,
                  target_coords=None) -> np.ndarray:
    """Frequency rescaling omega^(-1/(2 alpha)) phi(x / sqrt(omega)).

    Resamples by cubic interpolation onto ``target_coords`` (default: the
    field's own nodes) and extends by zero outside the source domain.  For
    the free soliton this reproduces the omega = 1 profile exactly, which
    is the large-omega limit shape in general.  1D and radial geometries
    only.
    """
    if spec.dim != 1 and not isinstance(spec.domain, Ball):
        raise ConfigurationError("frequency rescaling is a 1D/radial tool")
    (src,) = ops.grid.coords
    if target_coords is None:
        target_coords = src
    target_coords = np.asarray(target_coords, dtype=float)
    omega = spec.omega
    if omega <= 0:
        raise SpectralConditionError("rescaling requires omega > 0")
    spline = CubicSpline(src, phi.values, extrapolate=False)
    pulled = spline(target_coords / math.sqrt(omega))
    pulled = np.nan_to_num(pulled, nan=0.0)
    return omega ** (-1.0 / (2.0 * spec.alpha)) * pulled
