"""Dirichlet discretizations of -Lap + V on boxes and radial balls.

Three families share one informal interface:

* ``fd2``  -- second-order finite differences (3/5-point stencils),
* ``sp``   -- sine pseudospectral (DST-I diagonalization),
* ``fe``   -- linear or quadratic finite elements in 1D, full or radial.

Full-geometry nodal families integrate with trapezoidal weights (a plain
scaled sum, since Dirichlet boundary values vanish); finite elements carry
a consistent (or optionally lumped) mass matrix and Gauss quadrature.
Radial problems reduce to a weighted 1D form with weight r^(d-1) and the
surface measure of the unit sphere; only finite elements support them.

Every family provides a prefactored solver for the constant-coefficient
implicit operator (1/tau + shift - Lap_h), reused across flow steps.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.fft import dstn
from scipy.sparse.linalg import splu

from .errors import ConfigurationError, ContractViolationError
from .potentials import DeltaSum, InversePower, Potential
from .problem import Ball, Box, ProblemSpec

__all__ = ["Grid", "assemble", "radial_reduce", "write_field_csv",
           "read_field_csv"]

#: surface measure of the unit sphere in R^d (d=1 counts the two points)
SURFACE_MEASURE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


@dataclass(frozen=True, eq=False)
class Grid:
    """Static description of the free degrees of freedom."""

    kind: str                 # "fd2" | "sp" | "fe1" | "fe2"
    geometry: str             # "full" | "radial"
    dim: int
    shape: tuple              # free-dof shape, e.g. (M,) or (Mx, My)
    h: tuple                  # mesh width per axis (radial: one entry)
    ndof: int
    coords: tuple             # per-axis free-node coordinates (1D arrays)
    bounds: tuple             # ((lo, hi), ...) for boxes, (radius,) radial
    surface_factor: float = 1.0
    lumped: bool = False

    def _key(self):
        return (self.kind, self.geometry, self.dim, self.shape, self.h,
                self.bounds, self.lumped)

    def __eq__(self, other):
        return isinstance(other, Grid) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


def _axis_nodes(lo, hi, h):
    """Uniform nodes including boundary; h must divide the length."""
    n = (hi - lo) / h
    n_int = int(round(n))
    if n_int < 2 or abs(n - n_int) > 1e-8 * max(1.0, abs(n)):
        raise ConfigurationError(
            f"mesh width {h} does not divide the interval ({lo}, {hi})")
    return lo + h * np.arange(n_int + 1), n_int


# --------------------------------------------------------------------------
# nodal families (finite differences, sine pseudospectral)
# --------------------------------------------------------------------------

class _NodalOps:
    """Shared machinery for grid-point discretizations on boxes.

    Subclasses fill in the Laplacian eigenvalues in the sine basis and
    decide how implicit solves are carried out.
    """

    weak_form = False
    has_max_principle = False
    supports_heat_step = False

    def __init__(self, spec: ProblemSpec, axes_nodes, h):
        self.spec_potential = spec.potential
        self.dim = spec.dim
        interior = [nodes[1:-1] for nodes in axes_nodes]
        shape = tuple(len(c) for c in interior)
        self.shape = shape
        self.weight = float(np.prod(h))
        self._full_nodes = axes_nodes
        bounds = tuple((float(n[0]), float(n[-1])) for n in axes_nodes)
        self.grid = Grid(kind=self.kind, geometry="full", dim=spec.dim,
                         shape=shape, h=tuple(float(x) for x in h),
                         ndof=int(np.prod(shape)),
                         coords=tuple(interior), bounds=bounds)
        self.potential_nodal = self._sample_potential(spec, interior)
        self._solver_cache = {}
        self._lock = threading.Lock()

    def _sample_potential(self, spec, interior):
        pot = spec.potential
        if isinstance(pot, DeltaSum):
            if self.kind != "fd2" or spec.dim != 1:
                raise ConfigurationError(
                    "Dirac deltas need finite elements or the nodal finite-"
                    "difference convention in 1D")
            vals = np.zeros(self.shape[0])
            x = interior[0]
            h = self.grid.h[0]
            for c, z in zip(pot.centers, pot.strengths):
                j = int(round((c - x[0]) / h))
                if not (0 <= j < x.size) or abs(x[j] - c) > 1e-9 * max(1, abs(c)):
                    raise ConfigurationError(
                        f"delta center {c} does not sit on a grid node")
                vals[j] -= z / h
            return vals
        if not pot.pointwise_ok:
            raise ConfigurationError(
                f"{type(pot).__name__} cannot be sampled on grid nodes; "
                "use a finite element discretization")
        mesh = np.meshgrid(*interior, indexing="ij") if len(interior) > 1 \
            else [interior[0]]
        return np.asarray(pot(*mesh), dtype=float).reshape(-1)

    # -- quadrature ---------------------------------------------------------

    def inner(self, u, v):
        return self.weight * float(np.dot(u, v))

    def norm_l2(self, v):
        return math.sqrt(max(self.inner(v, v), 0.0))

    def lp_norm_pow(self, v, p):
        return self.weight * float(np.sum(np.abs(v) ** p))

    def dirichlet_form(self, v):
        return self.weight * float(np.dot(v, self.laplacian(v)))

    def potential_form(self, v):
        return self.weight * float(np.dot(v * v, self.potential_nodal))

    # -- right-hand-side building blocks -------------------------------------

    def mass_rhs(self, v):
        return v

    def potential_rhs(self, v):
        return self.potential_nodal * v

    def nonlinear_rhs(self, v, alpha):
        return np.abs(v) ** (2.0 * alpha) * v

    def nonlinear_pairing(self, z, v, alpha):
        """Quadrature of z |v|^(2 alpha) v."""
        return self.weight * float(np.dot(z, np.abs(v) ** (2.0 * alpha) * v))

    # -- operators ------------------------------------------------------------

    def laplacian(self, v):
        """Apply -Lap_h."""
        raise NotImplementedError

    def h_omega_apply(self, v, omega):
        return self.laplacian(v) + self.potential_nodal * v + omega * v

    def residual_norm(self, v, alpha, omega):
        r = self.h_omega_apply(v, omega) - self.nonlinear_rhs(v, alpha)
        return self.norm_l2(r)

    def implicit_solver(self, tau, shift):
        """Prefactored solve of ((1/tau + shift) I - Lap_h) x = rhs."""
        key = (float(tau), float(shift))
        if key not in self._solver_cache:
            self._solver_cache[key] = self._make_implicit(1.0 / tau + shift)
        return self._solver_cache[key]

    def _make_implicit(self, c):
        raise NotImplementedError

    def be_system(self, v, alpha, tau, omega):
        """Matrix-free pieces of the lagged backward-Euler step.

        Returns (matvec, precond, rhs) for the symmetric system
        (-Lap_h + 1/tau + omega + V - |v|^(2 alpha)) x = v / tau.
        """
        c = 1.0 / tau + omega
        pointmul = self.potential_nodal - np.abs(v) ** (2.0 * alpha)

        def matvec(w):
            return self.laplacian(w) + c * w + pointmul * w

        precond = self._be_precond(c, pointmul)
        return matvec, precond, v / tau

    def _be_precond(self, c, pointmul):
        raise NotImplementedError

    # -- export ---------------------------------------------------------------

    def nodes_with_boundary(self):
        return tuple(self._full_nodes)

    def pad_with_boundary(self, v):
        full_shape = tuple(n.size for n in self._full_nodes)
        out = np.zeros(full_shape)
        inner = tuple(slice(1, -1) for _ in full_shape)
        out[inner] = v.reshape(self.shape)
        return out

    def restrict_from_boundary(self, v_full):
        full_shape = tuple(n.size for n in self._full_nodes)
        v = np.asarray(v_full, dtype=float).reshape(full_shape)
        inner = tuple(slice(1, -1) for _ in full_shape)
        return v[inner].reshape(-1).copy()


class _TransformOps(_NodalOps):
    """Nodal family whose stencil is diagonalized by DST-I."""

    def __init__(self, spec, axes_nodes, h):
        super().__init__(spec, axes_nodes, h)
        axes_eigs = []
        for nodes, hx in zip(axes_nodes, h):
            m = nodes.size - 2
            k = np.arange(1, m + 1)
            axes_eigs.append(self._axis_eigenvalues(k, hx, nodes[-1] - nodes[0]))
        if len(axes_eigs) == 1:
            self._eigs = axes_eigs[0]
        else:
            self._eigs = axes_eigs[0][:, None] + axes_eigs[1][None, :]

    def _axis_eigenvalues(self, k, h, length):
        raise NotImplementedError

    def _to_modes(self, v):
        return dstn(v.reshape(self.shape), type=1, norm="ortho")

    def _from_modes(self, c):
        return dstn(c, type=1, norm="ortho").reshape(-1)

    def laplacian(self, v):
        return self._from_modes(self._eigs * self._to_modes(v))

    def _make_implicit(self, c):
        denom = c + self._eigs

        def solve(rhs):
            return self._from_modes(self._to_modes(rhs) / denom)

        return solve

    def _be_precond(self, c, pointmul):
        # diagonal in the sine basis: exact inverse of the constant part
        denom = c + self._eigs

        def precond(r):
            return self._from_modes(self._to_modes(r) / denom)

        return precond


class SineSpectralOps(_TransformOps):
    """Sine pseudospectral discretization (spectral symbol (k pi / L)^2)."""

    kind = "sp"
    supports_heat_step = True

    def _axis_eigenvalues(self, k, h, length):
        return (k * math.pi / length) ** 2

    def heat_step(self, v, t):
        """Exact Dirichlet heat semigroup e^{t Lap_h} in the sine basis."""
        return self._from_modes(np.exp(-t * self._eigs) * self._to_modes(v))


class FiniteDifference2DOps(_TransformOps):
    """5-point stencil on a tensor box, diagonalized by DST-I."""

    kind = "fd2"
    has_max_principle = True

    def _axis_eigenvalues(self, k, h, length):
        m_plus_1 = int(round(length / h))
        return (4.0 / h ** 2) * np.sin(k * math.pi / (2 * m_plus_1)) ** 2


class FiniteDifference1DOps(_NodalOps):
    """3-point stencil; tridiagonal prefactored implicit solves."""

    kind = "fd2"
    has_max_principle = True

    def __init__(self, spec, axes_nodes, h):
        super().__init__(spec, axes_nodes, h)
        m = self.shape[0]
        hx = self.grid.h[0]
        main = np.full(m, 2.0 / hx ** 2)
        off = np.full(m - 1, -1.0 / hx ** 2)
        self._A = sp.diags([off, main, off], [-1, 0, 1], format="csr")
        self._lap_diag = 2.0 / hx ** 2

    def laplacian(self, v):
        return self._A.dot(v)

    def _make_implicit(self, c):
        lu = splu(sp.csc_matrix(self._A + c * sp.eye(self.shape[0])))
        lock = self._lock

        def solve(rhs):
            with lock:
                return lu.solve(rhs)

        return solve

    def _be_precond(self, c, pointmul):
        d = self._lap_diag + c + pointmul
        d = np.where(np.abs(d) < 1e-30, 1.0, d)

        def precond(r):
            return r / d

        return precond


# --------------------------------------------------------------------------
# finite elements (1D, full or radial)
# --------------------------------------------------------------------------

_SHAPE_FUNS = {
    1: (lambda xi: np.stack([1.0 - xi, xi], axis=-1),
        lambda xi: np.stack([-np.ones_like(xi), np.ones_like(xi)], axis=-1)),
    2: (lambda xi: np.stack([2 * xi ** 2 - 3 * xi + 1,
                             4 * xi * (1 - xi),
                             2 * xi ** 2 - xi], axis=-1),
        lambda xi: np.stack([4 * xi - 3, 4 - 8 * xi, 4 * xi - 1], axis=-1)),
}


def _gauss01(nq):
    t, w = np.polynomial.legendre.leggauss(nq)
    return (t + 1.0) / 2.0, w / 2.0


class FiniteElementOps:
    """P1/P2 Lagrange elements on a uniform 1D mesh.

    Handles full intervals (Dirichlet both ends) and radial reductions
    (weight r^(d-1), Dirichlet at the outer radius, natural at r = 0).
    The same Gauss rule feeds the stiffness/mass/potential matrices and
    the nonlinear load, so discrete functional identities are exact.
    """

    weak_form = True
    supports_heat_step = False

    def __init__(self, spec: ProblemSpec, h: float, order: int,
                 lumped: bool = False):
        if order not in (1, 2):
            raise ConfigurationError("finite element order must be 1 or 2")
        if lumped and order != 1:
            raise ConfigurationError("mass lumping is limited to linear "
                                     "elements")
        radial = isinstance(spec.domain, Ball)
        if radial:
            lo, hi = 0.0, spec.domain.radius
            factor = SURFACE_MEASURE[spec.dim]
            if isinstance(spec.potential, DeltaSum):
                raise ConfigurationError("Dirac deltas are limited to the "
                                         "full 1D geometry")
        else:
            if spec.dim != 1:
                raise ConfigurationError("finite elements are 1D only; use "
                                         "radial geometry in higher dimension")
            (lo, hi), = spec.domain.bounds
            factor = 1.0
        vertices, nelem = _axis_nodes(lo, hi, h)
        self.nelem = nelem
        self.order = order
        self.dim = spec.dim
        self.radial = radial
        self.h = float(h)
        if order == 1:
            nodes = vertices
            conn = np.stack([np.arange(nelem), np.arange(1, nelem + 1)], axis=1)
        else:
            nodes = lo + (h / 2.0) * np.arange(2 * nelem + 1)
            conn = np.stack([2 * np.arange(nelem),
                             2 * np.arange(nelem) + 1,
                             2 * np.arange(nelem) + 2], axis=1)
        self.nodes = nodes
        self.conn = conn
        nn = nodes.size
        free = np.ones(nn, dtype=bool)
        free[-1] = False
        if not radial:
            free[0] = False
        self.free = np.flatnonzero(free)
        self._full_to_free = np.full(nn, -1)
        self._full_to_free[self.free] = np.arange(self.free.size)

        self._weight_factor = factor
        nq = 4 if radial else 3
        xi, wq = _gauss01(nq)
        shp, dshp = _SHAPE_FUNS[order]
        self.N = shp(xi)            # (nq, nloc)
        self.dN = dshp(xi)          # (nq, nloc)
        xl = vertices[:-1]
        self.gauss_x = xl[:, None] + h * xi[None, :]          # (nelem, nq)
        wfull = wq[None, :] * h * factor
        if radial:
            wfull = wfull * self.gauss_x ** (spec.dim - 1)
        else:
            wfull = np.broadcast_to(wfull, self.gauss_x.shape)
        self.gauss_w = np.ascontiguousarray(wfull)            # (nelem, nq)

        xi_err, w_err = _gauss01(5)
        self.N_err = shp(xi_err)
        self.dN_err = dshp(xi_err)
        self.gauss_x_err = xl[:, None] + h * xi_err[None, :]
        werr = w_err[None, :] * h * factor
        if radial:
            werr = werr * self.gauss_x_err ** (spec.dim - 1)
        else:
            werr = np.broadcast_to(werr, self.gauss_x_err.shape)
        self.gauss_w_err = np.ascontiguousarray(werr)

        self._assemble_matrices(spec, lumped)
        kind = f"fe{order}"
        self.kind = kind
        self.has_max_principle = bool(lumped)
        self.grid = Grid(kind=kind, geometry="radial" if radial else "full",
                         dim=spec.dim, shape=(self.free.size,),
                         h=(float(h),), ndof=self.free.size,
                         coords=(nodes[self.free],),
                         bounds=((lo, hi),) if not radial else ((0.0, hi),),
                         surface_factor=factor, lumped=lumped)
        self._solver_cache = {}
        self._mass_lu = None
        self._lock = threading.Lock()

    # -- assembly -------------------------------------------------------------

    def _element_matrices(self, density):
        """Sum_g density_g outer(N_g, N_g) per element; density (nelem, nq)."""
        return np.einsum("eq,qa,qb->eab", density, self.N, self.N)

    def _patch_singular_elements(self, ve, pot, s, dim):
        """Re-integrate V phi_i phi_j near a singularity of V.

        A fixed Gauss rule only converges like a fractional power of h when
        the integrand blows up inside the element, which caps the global
        convergence order well below the element order.  Elements whose
        closure contains ``s`` get a composite rule instead, geometrically
        graded toward the singular point, so the integrable singularity is
        resolved to roundoff and the interpolation error dominates again.
        """
        lo = self.nodes[0]
        xlast = lo + self.nelem * self.h
        if not (lo <= s <= xlast):
            return
        shp = _SHAPE_FUNS[self.order][0]
        xi8, w8 = _gauss01(8)
        for e in range(max(0, int((s - lo) / self.h) - 1),
                       min(self.nelem, int((s - lo) / self.h) + 2)):
            xl = lo + e * self.h
            xr = xl + self.h
            if not (xl - 1e-12 <= s <= xr + 1e-12):
                continue
            block = np.zeros_like(ve[e])
            sc = min(max(s, xl), xr)
            cuts = np.concatenate(([0.0], 0.5 ** np.arange(80, -1, -1.0)))
            for a, b, sing_right in ((xl, sc, True), (sc, xr, False)):
                if b - a <= 0:
                    continue
                # offsets measured from the singular endpoint stay exact
                # even when they drop far below the ulp of the far end
                off = (b - a) * cuts
                pts = (b - off)[::-1] if sing_right else a + off
                for p, q in zip(pts[:-1], pts[1:]):
                    if q <= p:
                        continue
                    xg = p + (q - p) * xi8
                    vv = (pot.radial_profile(xg) if self.radial else pot(xg))
                    wg = w8 * (q - p) * self._weight_factor
                    if self.radial:
                        wg = wg * xg ** (dim - 1)
                    contrib = wg * vv
                    contrib[~np.isfinite(contrib)] = 0.0
                    nloc = shp((xg - xl) / self.h)
                    block += np.einsum("q,qa,qb->ab", contrib, nloc, nloc)
            ve[e] = block

    def _assemble_matrices(self, spec, lumped):
        nloc = self.order + 1
        nn = self.nodes.size
        ke = np.einsum("eq,qa,qb->eab", self.gauss_w, self.dN, self.dN)
        ke /= self.h ** 2
        me = self._element_matrices(self.gauss_w)
        rows = np.repeat(self.conn, nloc, axis=1).ravel()
        cols = np.tile(self.conn, (1, nloc)).ravel()

        def to_csr(blocks):
            mat = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(nn, nn))
            return mat.tocsr()

        k_full = to_csr(ke)
        m_full = to_csr(me)
        pot = spec.potential
        if isinstance(pot, DeltaSum):
            idx, val = [], []
            for c, z in zip(pot.centers, pot.strengths):
                j = (c - self.nodes[0]) / self.h
                jj = int(round(j))
                vertex_ok = (0 <= jj <= self.nelem
                             and abs(self.nodes[0] + jj * self.h - c)
                             <= 1e-9 * max(1.0, abs(c)))
                if not vertex_ok:
                    raise ConfigurationError(
                        f"delta center {c} must coincide with an element "
                        "vertex")
                idx.append(jj * self.order)
                val.append(-z)
            v_full = sp.coo_matrix((val, (idx, idx)), shape=(nn, nn)).tocsr()
            self._v_gauss = None
        else:
            if self.radial:
                vg = pot.radial_profile(self.gauss_x)
            else:
                vg = pot(self.gauss_x)
            vg = np.asarray(vg, dtype=float)
            if not np.all(np.isfinite(vg)):
                raise ConfigurationError(
                    "potential is singular at a quadrature point; align the "
                    "singularity with a mesh vertex")
            self._v_gauss = vg
            ve = self._element_matrices(self.gauss_w * vg)
            for s in pot.singular_points():
                self._patch_singular_elements(ve, pot, float(s), spec.dim)
            v_full = to_csr(ve)
        f = self.free
        self.K = k_full[f][:, f].tocsr()
        self.V = v_full[f][:, f].tocsr()
        m_free = m_full[f][:, f].tocsr()
        if lumped:
            lump = np.asarray(m_free.sum(axis=1)).ravel()
            self.M = sp.diags(lump).tocsr()
        else:
            self.M = m_free
        self.lumped = lumped

    # -- helpers --------------------------------------------------------------

    def _embed(self, v):
        full = np.zeros(self.nodes.size)
        full[self.free] = v
        return full

    def _values_at_gauss(self, v, err_rule=False):
        full = self._embed(v)
        n = self.N_err if err_rule else self.N
        return full[self.conn] @ n.T

    def _derivs_at_gauss(self, v, err_rule=False):
        full = self._embed(v)
        dn = self.dN_err if err_rule else self.dN
        return (full[self.conn] @ dn.T) / self.h

    # -- quadrature -----------------------------------------------------------

    def inner(self, u, v):
        return float(u @ self.M.dot(v))

    def norm_l2(self, v):
        return math.sqrt(max(self.inner(v, v), 0.0))

    def lp_norm_pow(self, v, p):
        vals = self._values_at_gauss(v)
        return float(np.sum(self.gauss_w * np.abs(vals) ** p))

    def dirichlet_form(self, v):
        return float(v @ self.K.dot(v))

    def potential_form(self, v):
        return float(v @ self.V.dot(v))

    # -- right-hand sides ------------------------------------------------------

    def mass_rhs(self, v):
        return self.M.dot(v)

    def potential_rhs(self, v):
        return self.V.dot(v)

    def nonlinear_rhs(self, v, alpha):
        vals = self._values_at_gauss(v)
        contrib = self.gauss_w * np.abs(vals) ** (2.0 * alpha) * vals
        b = np.zeros(self.nodes.size)
        np.add.at(b, self.conn.ravel(), (contrib @ self.N).ravel())
        return b[self.free]

    def nonlinear_pairing(self, z, v, alpha):
        """Quadrature of z_h |v_h|^(2 alpha) v_h."""
        return float(z @ self.nonlinear_rhs(v, alpha))

    # -- operators -------------------------------------------------------------

    def laplacian(self, v):
        """Weak-form image K v (no inverse mass applied)."""
        return self.K.dot(v)

    def _mass_solve(self, rhs):
        if self._mass_lu is None:
            self._mass_lu = splu(sp.csc_matrix(self.M))
        with self._lock:
            return self._mass_lu.solve(rhs)

    def h_omega_apply(self, v, omega):
        """Nodal representative M^(-1) (K + V + omega M) v."""
        return self._mass_solve(self.K.dot(v) + self.V.dot(v)
                                + omega * self.M.dot(v))

    def residual_norm(self, v, alpha, omega):
        rho = (self.K.dot(v) + self.V.dot(v) + omega * self.M.dot(v)
               - self.nonlinear_rhs(v, alpha))
        z = self._mass_solve(rho)
        return math.sqrt(max(float(z @ rho), 0.0))

    def implicit_solver(self, tau, shift):
        key = (float(tau), float(shift))
        if key not in self._solver_cache:
            c = 1.0 / tau + shift
            lu = splu(sp.csc_matrix(c * self.M + self.K))
            lock = self._lock

            def solve(rhs):
                with lock:
                    return lu.solve(rhs)

            self._solver_cache[key] = solve
        return self._solver_cache[key]

    def weighted_mass(self, v, alpha):
        """Sparse matrix of integrals |v_h|^(2 alpha) psi_i psi_j."""
        vals = self._values_at_gauss(v)
        blocks = self._element_matrices(self.gauss_w
                                        * np.abs(vals) ** (2.0 * alpha))
        nloc = self.order + 1
        nn = self.nodes.size
        rows = np.repeat(self.conn, nloc, axis=1).ravel()
        cols = np.tile(self.conn, (1, nloc)).ravel()
        w_full = sp.coo_matrix((blocks.ravel(), (rows, cols)),
                               shape=(nn, nn)).tocsr()
        f = self.free
        return w_full[f][:, f].tocsr()

    def be_system(self, v, alpha, tau, omega):
        c = 1.0 / tau + omega
        bmat = (self.K + c * self.M + self.V
                - self.weighted_mass(v, alpha)).tocsr()
        diag = bmat.diagonal()
        diag = np.where(np.abs(diag) < 1e-30, 1.0, diag)

        def matvec(w):
            return bmat.dot(w)

        def precond(r):
            return r / diag

        return matvec, precond, self.M.dot(v) / tau

    # -- evaluation and errors ---------------------------------------------------

    def evaluate_on(self, v, pts):
        """Evaluate the FE interpolant at arbitrary points (0 outside)."""
        pts = np.asarray(pts, dtype=float)
        lo = self.nodes[0]
        full = self._embed(v)
        e = np.floor((pts - lo) / self.h).astype(int)
        inside = (pts >= lo - 1e-12) & (pts <= self.nodes[-1] + 1e-12)
        e = np.clip(e, 0, self.nelem - 1)
        xi = (pts - lo) / self.h - e
        shp, _ = _SHAPE_FUNS[self.order]
        n = shp(np.clip(xi, 0.0, 1.0))
        vals = np.sum(full[self.conn[e]] * n, axis=-1)
        return np.where(inside, vals, 0.0)

    def evaluate_deriv_on(self, v, pts):
        """Derivative of the FE interpolant at arbitrary points (0 outside)."""
        pts = np.asarray(pts, dtype=float)
        lo = self.nodes[0]
        full = self._embed(v)
        e = np.floor((pts - lo) / self.h).astype(int)
        inside = (pts >= lo - 1e-12) & (pts <= self.nodes[-1] + 1e-12)
        e = np.clip(e, 0, self.nelem - 1)
        xi = (pts - lo) / self.h - e
        _, dshp = _SHAPE_FUNS[self.order]
        dn = dshp(np.clip(xi, 0.0, 1.0))
        vals = np.sum(full[self.conn[e]] * dn, axis=-1) / self.h
        return np.where(inside, vals, 0.0)

    def error_norms(self, v, f_exact, df_exact):
        """(L2, H1) distance of the interpolant to callables f, f'."""
        err = self._values_at_gauss(v, err_rule=True) \
            - f_exact(self.gauss_x_err)
        derr = self._derivs_at_gauss(v, err_rule=True) \
            - df_exact(self.gauss_x_err)
        l2sq = float(np.sum(self.gauss_w_err * err ** 2))
        h1sq = l2sq + float(np.sum(self.gauss_w_err * derr ** 2))
        return math.sqrt(l2sq), math.sqrt(h1sq)

    # -- export ---------------------------------------------------------------

    def nodes_with_boundary(self):
        return (self.nodes,)

    def pad_with_boundary(self, v):
        return self._embed(v)

    def restrict_from_boundary(self, v_full):
        v = np.asarray(v_full, dtype=float).reshape(-1)
        if v.size != self.nodes.size:
            raise ConfigurationError(
                f"field file holds {v.size} nodes, mesh has "
                f"{self.nodes.size}")
        return v[self.free].copy()


# --------------------------------------------------------------------------
# assembly entry points
# --------------------------------------------------------------------------

def _as_h_tuple(h, dim):
    if np.isscalar(h):
        return (float(h),) * dim
    h = tuple(float(x) for x in h)
    if len(h) != dim:
        raise ConfigurationError("one mesh width per axis is required")
    return h


def assemble(spec: ProblemSpec, h, kind: str, fe_order: int = 1,
             lumped: bool = False):
    """Build discrete operators for ``spec``.

    kind: "fd2", "sp" or "fe".  Radial (Ball) domains accept only "fe".
    """
    kind = kind.lower()
    if kind not in ("fd2", "sp", "fe"):
        raise ConfigurationError(f"unknown discretization kind {kind!r}")
    if isinstance(spec.domain, Ball):
        if kind != "fe":
            raise ConfigurationError("radial reduction supports finite "
                                     "elements only")
        return FiniteElementOps(spec, float(h), fe_order, lumped)
    if kind == "fe":
        if spec.dim != 1:
            raise ConfigurationError("finite elements are 1D only on boxes")
        return FiniteElementOps(spec, float(h), fe_order, lumped)
    hs = _as_h_tuple(h, spec.dim)
    pot = spec.potential
    if isinstance(pot, DeltaSum) and kind == "sp":
        raise ConfigurationError("Dirac deltas are incompatible with the "
                                 "sine pseudospectral discretization")
    if isinstance(pot, InversePower):
        raise ConfigurationError("inverse-power potentials require finite "
                                 "elements")
    axes = []
    for (lo, hi), hx in zip(spec.domain.bounds, hs):
        nodes, _ = _axis_nodes(lo, hi, hx)
        axes.append(nodes)
    if spec.dim == 1:
        cls = FiniteDifference1DOps if kind == "fd2" else SineSpectralOps
    else:
        cls = FiniteDifference2DOps if kind == "fd2" else SineSpectralOps
    return cls(spec, axes, hs)


def radial_reduce(spec: ProblemSpec, h, fe_order: int = 1,
                  lumped: bool = False):
    """Weighted 1D finite element reduction of a radial problem."""
    if not isinstance(spec.domain, Ball):
        raise ConfigurationError("radial reduction requires a Ball domain")
    return assemble(spec, h, "fe", fe_order=fe_order, lumped=lumped)


# --------------------------------------------------------------------------
# field interchange
# --------------------------------------------------------------------------

def write_field_csv(path, values, ops):
    """Field CSV: coordinate columns then the value, boundary included.

    2D fields are written row-major with a header comment naming the grid
    extents; numbers carry 17 significant digits for bit-exact reruns.
    """
    nodes = ops.nodes_with_boundary()
    full = np.asarray(ops.pad_with_boundary(np.asarray(values, dtype=float)))
    mesh = np.meshgrid(*nodes, indexing="ij")
    cols = [m.reshape(-1) for m in mesh] + [full.reshape(-1)]
    names = ["x", "y", "z"][:len(nodes)] + ["value"]
    with open(path, "w") as fh:
        if len(nodes) == 2:
            fh.write(f"# nx={nodes[0].size} ny={nodes[1].size} bounds="
                     f"{nodes[0][0]:.17g},{nodes[0][-1]:.17g},"
                     f"{nodes[1][0]:.17g},{nodes[1][-1]:.17g} row-major\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, np.column_stack(cols), fmt="%.17g", delimiter=",")


def read_field_csv(path):
    """Value column of a field CSV (header and comment lines skipped)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head = line.split(",")[0]
            try:
                float(head)
            except ValueError:
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ConfigurationError(f"no data rows in field file {path}")
    return np.asarray(rows, dtype=float)[:, -1]
