"""Attractive external potentials for the stationary NLS problem.

Every potential is nonpositive.  Pointwise evaluation works on coordinate
arrays (one per axis); radially reducible potentials also expose a profile
in the radial variable.  Discretizations query the capability flags to
decide whether a potential can be sampled on nodes (``pointwise_ok``) or is
regular enough for flows that apply the full linear operator pointwise
(``smooth_ok``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ConfigurationError


class Potential:
    """Base class; concrete potentials are small frozen dataclasses."""

    #: dimensions in which the potential is defined
    allowed_dims: Tuple[int, ...] = (1, 2, 3)
    #: bounded on grid nodes, so FD/SP sampling is legitimate
    pointwise_ok: bool = True
    #: regular enough that H_omega phi is a valid grid function (H^2 states)
    smooth_ok: bool = True
    #: invariant under rotations (evenness in 1D), so radial reduction applies
    radial: bool = True

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radial_profile(self, r: np.ndarray) -> np.ndarray:
        """Values as a function of r = |x| (only for radial potentials)."""
        if not self.radial:
            raise ConfigurationError(
                f"{type(self).__name__} is not radially symmetric")
        return self.__call__(np.asarray(r, dtype=float))

    def spectral_lower_bound(self) -> float | None:
        """A number known to sit at or below inf V (None if unavailable)."""
        return None

    def singular_points(self) -> Tuple[float, ...]:
        """Coordinates (|x| for radial use) where V is unbounded.

        Weak-form assembly refines its quadrature toward these points;
        everything else may assume V is finite away from them.
        """
        return ()

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class ZeroPotential(Potential):
    """V identically zero (free problem)."""

    def __call__(self, *coords):
        return np.zeros_like(np.broadcast_arrays(*coords)[0], dtype=float)

    def spectral_lower_bound(self):
        return 0.0


@dataclass(frozen=True)
class DeltaSum(Potential):
    """Finite sum of attractive Dirac deltas, 1D only.

    V = -sum_k Z_k delta(x - c_k) with Z_k > 0.  Has no pointwise values;
    discretizations must treat it through nodal or weak-form conventions.
    """

    centers: Tuple[float, ...]
    strengths: Tuple[float, ...]

    allowed_dims = (1,)
    pointwise_ok = False
    smooth_ok = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if len(self.centers) != len(self.strengths) or not self.centers:
            raise ConfigurationError("DeltaSum needs matching nonempty "
                                     "centers and strengths")
        if any(z <= 0 for z in self.strengths):
            raise ConfigurationError("delta strengths must be positive")
        if len(set(self.centers)) != len(self.centers):
            raise ConfigurationError("delta centers must be distinct")

    @property
    def radial(self):  # type: ignore[override]
        # even configurations (centers symmetric with matching strengths)
        pairs = sorted(zip(self.centers, self.strengths))
        mirrored = sorted((-c, z) for c, z in pairs)
        return all(abs(a[0] - b[0]) < 1e-12 and a[1] == b[1]
                   for a, b in zip(pairs, mirrored))

    def __call__(self, *coords):
        raise ConfigurationError("a Dirac delta has no pointwise values; "
                                 "use a nodal or weak-form discretization")

    def spectral_lower_bound(self):
        # 1D bound: the form integral |phi'|^2 - Z_tot*max|phi|^2 with
        # phi(c)^2 <= 2*||phi|| ||phi'|| gives inf spectrum >= -Z_tot^2.
        return -float(sum(self.strengths)) ** 2


@dataclass(frozen=True)
class FiniteWell(Potential):
    """Square well: V = -depth inside the region, 0 outside.

    ``region`` is either a radius (ball / symmetric interval) or an
    explicit 1D interval (lo, hi).
    """

    depth: float
    region: float | Tuple[float, float]

    smooth_ok = False  # discontinuous

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.depth <= 0:
            raise ConfigurationError("well depth must be positive")
        if isinstance(self.region, tuple):
            lo, hi = self.region
            if not lo < hi:
                raise ConfigurationError("well interval must have lo < hi")
        elif not self.region > 0:
            raise ConfigurationError("well radius must be positive")

    @property
    def radial(self):  # type: ignore[override]
        if isinstance(self.region, tuple):
            lo, hi = self.region
            return abs(lo + hi) < 1e-12
        return True

    def __call__(self, *coords):
        if isinstance(self.region, tuple):
            (x,) = coords
            lo, hi = self.region
            inside = (np.asarray(x) >= lo) & (np.asarray(x) <= hi)
        else:
            rsq = sum(np.asarray(c, dtype=float) ** 2 for c in coords)
            inside = rsq <= self.region ** 2
        return np.where(inside, -self.depth, 0.0)

    def spectral_lower_bound(self):
        return -self.depth


@dataclass(frozen=True)
class InversePower(Potential):
    """V = -gamma / |x|^sigma with gamma > 0 and 0 < sigma < min(2, d).

    Unbounded at the origin: refuse pointwise discretizations; quadrature
    points of a weak form never sit at the singularity.
    """

    gamma: float
    sigma: float

    pointwise_ok = False
    smooth_ok = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.gamma <= 0:
            raise ConfigurationError("inverse-power gamma must be positive")
        if not 0 < self.sigma < 2:
            raise ConfigurationError("inverse-power sigma must lie in (0, 2)")

    def __call__(self, *coords):
        rsq = sum(np.asarray(c, dtype=float) ** 2 for c in coords)
        with np.errstate(divide="ignore"):
            return -self.gamma * rsq ** (-self.sigma / 2.0)

    def singular_points(self):
        return (0.0,)


@dataclass(frozen=True)
class GaussianWell(Potential):
    """V = -depth * exp(-|x|^2)."""

    depth: float

    def __post_init__(self):
        if self.depth <= 0:
            raise ConfigurationError("Gaussian well depth must be positive")

    def __call__(self, *coords):
        rsq = sum(np.asarray(c, dtype=float) ** 2 for c in coords)
        return -self.depth * np.exp(-rsq)

    def spectral_lower_bound(self):
        return -self.depth


@dataclass(frozen=True)
class DoubleWellGaussian(Potential):
    """Two unit-depth Gaussian wells at +-separation on the line."""

    separation: float

    allowed_dims = (1,)

    def __post_init__(self):
        if self.separation <= 0:
            raise ConfigurationError("well separation must be positive")

    def __call__(self, *coords):
        (x,) = coords
        x = np.asarray(x, dtype=float)
        c = self.separation
        return -(np.exp(-((x - c) ** 2)) + np.exp(-((x + c) ** 2)))

    def spectral_lower_bound(self):
        return -2.0


@dataclass(frozen=True)
class TrappedCosineGaussian(Potential):
    """2D product trap: V = -2 exp(-|x|^2) (1 - cos(pi x)) (1 - cos(pi y))."""

    allowed_dims = (2,)
    radial = False

    def __call__(self, *coords):
        x, y = coords
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (-2.0 * np.exp(-(x ** 2 + y ** 2))
                * (1.0 - np.cos(np.pi * x)) * (1.0 - np.cos(np.pi * y)))

    def spectral_lower_bound(self):
        return -8.0


@dataclass(frozen=True)
class Tabulated(Potential):
    """User-supplied nonpositive samples V(x_k) on a 1D coordinate table.

    Evaluation interpolates linearly and extends by zero outside the table.
    With ``radial=True`` the table is read as a profile in r = |x|.
    """

    table_nodes: Tuple[float, ...]
    table_values: Tuple[float, ...]
    radial: bool = False

    smooth_ok = False  # only piecewise-linear regularity is known

    def __post_init__(self):
        self.validate()

    def validate(self):
        nodes = np.asarray(self.table_nodes, dtype=float)
        vals = np.asarray(self.table_values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or nodes.size != vals.size:
            raise ConfigurationError("tabulated potential needs matching 1D "
                                     "node and value tables")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("tabulated nodes must be increasing")
        if np.any(vals > 0):
            raise ConfigurationError("tabulated potential must be <= 0")

    @property
    def allowed_dims(self):  # type: ignore[override]
        return (1, 2, 3) if self.radial else (1,)

    def __call__(self, *coords):
        if self.radial:
            arg = np.sqrt(sum(np.asarray(c, dtype=float) ** 2
                              for c in coords))
        else:
            (arg,) = coords
            arg = np.asarray(arg, dtype=float)
        return np.interp(arg, self.table_nodes, self.table_values,
                         left=0.0, right=0.0)

    def radial_profile(self, r):
        if not self.radial:
            raise ConfigurationError("tabulated potential was not declared "
                                     "radial")
        return np.interp(np.asarray(r, dtype=float), self.table_nodes,
                         self.table_values, left=0.0, right=0.0)

    def spectral_lower_bound(self):
        return float(min(self.table_values))
