"""Normalized gradient-flow iterations for least action ground states.

Each scheme produces an intermediate field from the current iterate and
then projects it back onto the Nehari manifold:

* ``bf``     implicit-explicit splitting: Laplacian and frequency are
             implicit, potential and nonlinearity explicit.  The implicit
             operator is constant, prefactored once, and the step is
             unconditionally action-diminishing with a positive rhs.
* ``be``     lagged backward Euler: everything implicit except the frozen
             nonlinear coefficient |phi_n|^(2 alpha).  The per-step linear
             system can lose definiteness at large steps, which raises a
             step failure.
* ``pgf_bf`` the bf splitting plus an explicit Lagrange-multiplier term
             that removes the leading projection error (smooth potentials).
* ``ts``     Strang splitting of the heat semigroup with the exact
             closed-form nonlinear/potential sub-flow (sine pseudospectral
             only); accuracy is limited by the O(tau^2) splitting bias.

A stationarity test governs termination: ||phi_{n+1} - phi_n|| / tau <= eps
in the max norm (default) or L2.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import (BlowUpError, ConfigurationError, ContractViolationError,
                     SpectralConditionError, StepFailureError)
from .nehari import lambda_omega
from .problem import Field, FunctionalReport, ProblemSpec, functionals
from .potentials import DeltaSum, InversePower

__all__ = ["FlowConfig", "SolveReport", "run_flow", "cngf_multiplier",
           "cngf_multiplier_finite"]

SCHEMES = ("bf", "be", "pgf_bf", "ts")

#: iterates dipping below -POSITIVITY_TOL * max|phi| set the diagnostic flag
POSITIVITY_TOL = 1e-12


@dataclass(frozen=True)
class FlowConfig:
    """Scheme selection and stopping policy for one flow run."""

    scheme: str = "bf"
    tau: float = 1.0
    epsilon: float = 1e-9
    stop_norm: str = "max"          # "max" | "l2"
    max_iters: int = 100000
    record_history: bool = False    # track Nehari drift every step (costly)
    be_tol: float = 1e-12           # inner CG relative tolerance

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.tau <= 0 or self.epsilon <= 0:
            raise ConfigurationError("tau and epsilon must be positive")
        if self.stop_norm not in ("max", "l2"):
            raise ConfigurationError("stop_norm must be 'max' or 'l2'")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one flow run."""

    field: Field
    converged: bool
    iterations: int
    final_step_norm: float
    residual: float
    report: FunctionalReport
    action_history: np.ndarray
    lambda_history: np.ndarray
    step_norm_history: np.ndarray
    nehari_drift: float
    wall_seconds: float
    phase_seconds: dict
    positivity_violated: bool
    scheme: str
    tau: float


# --------------------------------------------------------------------------
# inner conjugate gradients for the lagged backward-Euler system
# --------------------------------------------------------------------------

def _pcg(matvec, rhs, x0, precond, tol, maxiter, iteration):
    """Preconditioned CG with explicit loss-of-definiteness detection."""
    bnorm = math.sqrt(float(np.dot(rhs, rhs)))
    if bnorm == 0.0:
        return np.zeros_like(rhs)
    x = x0.copy()
    r = rhs - matvec(x)
    z = precond(r)
    rz = float(np.dot(r, z))
    p = z.copy()
    for _ in range(maxiter):
        if math.sqrt(float(np.dot(r, r))) <= tol * bnorm:
            return x
        ap = matvec(p)
        pap = float(np.dot(p, ap))
        if pap <= 0.0:
            raise StepFailureError(
                "implicit system is singular or indefinite at this step "
                "size (negative curvature in the inner CG solve)",
                iteration=iteration)
        a = rz / pap
        x += a * p
        r -= a * ap
        z = precond(r)
        rz_new = float(np.dot(r, z))
        if rz_new < 0.0:
            raise StepFailureError(
                "inner CG breakdown (preconditioned residual lost "
                "positivity)", iteration=iteration)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise StepFailureError("inner CG iteration budget exhausted; the "
                           "implicit system is numerically singular",
                           iteration=iteration)


# --------------------------------------------------------------------------
# single steps (pre-projection)
# --------------------------------------------------------------------------

def _step_bf(v, spec, ops, tau, theta, extra=0.0):
    solver = ops.implicit_solver(tau, spec.omega + theta)
    rhs = ((1.0 / tau + theta + extra) * ops.mass_rhs(v)
           - ops.potential_rhs(v) + ops.nonlinear_rhs(v, spec.alpha))
    return solver(rhs)


def _step_be(v, spec, ops, tau, be_tol, iteration):
    matvec, precond, rhs = ops.be_system(v, spec.alpha, tau, spec.omega)
    maxiter = 10 * ops.grid.ndof
    return _pcg(matvec, rhs, v, precond, be_tol, maxiter, iteration)


def _exact_nonlinear_flow(values, vplus, tau, alpha, iteration):
    """Closed-form solution of phi_t = -(V + omega) phi + |phi|^(2a) phi.

    ``vplus`` holds V + omega on the nodes.  Where V + omega vanishes the
    reduced formula applies; elsewhere the full exponential form.  A
    nonpositive denominator means the sub-flow blew up at that node within
    the step.
    """
    abspow = np.abs(values) ** (2.0 * alpha)
    out = np.empty_like(values)
    near0 = np.abs(vplus) < 1e-14
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if np.any(near0):
            den = 1.0 - alpha * tau * abspow[near0]
            if np.any(den <= 0.0):
                bad = np.flatnonzero(near0)[int(np.argmin(den))]
                raise BlowUpError(
                    f"nonlinear sub-flow blew up at node {bad}",
                    node_index=int(bad), iteration=iteration)
            out[near0] = values[near0] * den ** (-1.0 / (2.0 * alpha))
        rest = ~near0
        if np.any(rest):
            c = vplus[rest]
            decay = np.exp(-2.0 * alpha * tau * c)
            denom = c - (1.0 - decay) * abspow[rest]
            ratio = c * decay / denom
            good = np.isfinite(ratio) & (ratio > 0.0)
            if not np.all(good):
                bad = np.flatnonzero(rest)[int(np.argmax(~good))]
                raise BlowUpError(
                    f"nonlinear sub-flow blew up at node {bad}",
                    node_index=int(bad), iteration=iteration)
            out[rest] = values[rest] * ratio ** (1.0 / (2.0 * alpha))
    return out


def _step_ts(v, spec, ops, tau, iteration):
    if not getattr(ops, "supports_heat_step", False):
        raise ConfigurationError("the splitting scheme requires the sine "
                                 "pseudospectral discretization")
    vplus = ops.potential_nodal + spec.omega
    w = ops.heat_step(v, tau / 2.0)
    w = _exact_nonlinear_flow(w, vplus, tau, spec.alpha, iteration)
    return ops.heat_step(w, tau / 2.0)


# --------------------------------------------------------------------------
# the multiplier of the continuous normalized flow
# --------------------------------------------------------------------------

def cngf_multiplier(phi: Field, spec: ProblemSpec, ops) -> float:
    """Lagrange multiplier mu_phi of the continuous normalized flow:

    mu = -[ ||H phi||^2 - (alpha+2) <H phi, |phi|^2a phi>
            + (alpha+1) ||phi||_{4a+2}^{4a+2} ] / (alpha ||phi||_{2a+2}^{2a+2})

    with H = -Lap + V + omega.  Vanishes at exact solutions.
    """
    if not spec.potential.smooth_ok:
        raise ConfigurationError(
            "the flow multiplier needs H phi to be a grid function; "
            f"{type(spec.potential).__name__} is too singular")
    v = phi.values
    alpha = spec.alpha
    z = ops.h_omega_apply(v, spec.omega)
    lp = ops.lp_norm_pow(v, 2.0 * alpha + 2.0)
    if lp <= 0.0:
        raise ContractViolationError("multiplier of the zero field is "
                                     "undefined")
    num = (ops.inner(z, z)
           - (alpha + 2.0) * ops.nonlinear_pairing(z, v, alpha)
           + (alpha + 1.0) * ops.lp_norm_pow(v, 4.0 * alpha + 2.0))
    return -num / (alpha * lp)


def cngf_multiplier_finite(phi: Field, spec: ProblemSpec, ops,
                           tau: float) -> float:
    """Finite-step multiplier ln(lambda^(2 alpha)) / (2 alpha tau) after one
    exact-flow surrogate step (Strang splitting, so sine pseudospectral
    only).  Converges linearly in tau to the continuous multiplier."""
    vt = _step_ts(phi.values, spec, ops, tau, iteration=0)
    lam = lambda_omega(Field(vt, ops.grid), spec, ops)
    return math.log(lam) / tau


# --------------------------------------------------------------------------
# the driver
# --------------------------------------------------------------------------

def _auto_theta(spec: ProblemSpec, ops) -> float:
    """Shift that keeps the implicit operator positive when omega <= 0.

    Only engages for nonpositive frequencies (possible when the linear
    threshold is negative, e.g. the free problem in a Dirichlet box);
    positive-frequency runs keep the user's theta untouched.
    """
    if spec.omega + spec.theta > 0.0:
        return spec.theta
    from .spectra import compute_omega0   # local import to avoid a cycle
    omega0 = compute_omega0(spec, ops, tol=1e-8).omega0
    if spec.omega <= omega0:
        raise SpectralConditionError(
            f"omega = {spec.omega} is not above the linear threshold "
            f"{omega0:.6g}")
    theta = max(0.0, -omega0) + 1.0
    return max(theta, spec.theta)


def run_flow(seed: Field, spec: ProblemSpec, ops,
             cfg: FlowConfig) -> SolveReport:
    """Iterate the configured scheme from ``seed`` until stationary.

    The seed must already lie on the Nehari manifold.  Step failures and
    sub-flow blow-ups propagate with the iteration index attached;
    exhausting ``max_iters`` is reported through ``converged=False``.
    """
    t0 = time.monotonic()
    if not (seed.grid is ops.grid or seed.grid == ops.grid):
        raise ContractViolationError("seed grid does not match operator grid")
    seed.check_finite()
    rep0 = functionals(seed, spec, ops)
    if abs(rep0.nehari) > 1e-8 * max(1.0, abs(rep0.quadratic)):
        raise ContractViolationError("seed does not lie on the Nehari "
                                     "manifold; project it first")
    if rep0.quadratic <= 0.0:
        raise SpectralConditionError("seed has nonpositive quadratic part")
    if cfg.scheme == "pgf_bf":
        if isinstance(spec.potential, (DeltaSum, InversePower)) \
                or not spec.potential.smooth_ok:
            raise ConfigurationError(
                "the projected splitting needs a potential regular enough "
                "for pointwise H phi")
    theta = _auto_theta(spec, ops)

    t_setup0 = time.monotonic()
    if cfg.scheme in ("bf", "pgf_bf"):
        ops.implicit_solver(cfg.tau, spec.omega + theta)   # prefactor now
    setup_s = time.monotonic() - t_setup0

    v = seed.values.copy()
    nonneg = seed.nonneg_hint and getattr(ops, "has_max_principle", False)
    actions = [rep0.action]
    lambdas = [1.0]
    step_norms = []
    drift = abs(rep0.nehari) / max(1.0, abs(rep0.quadratic))
    positivity_violated = False
    converged = False
    iterations = 0
    step_norm = math.inf
    iter_s = 0.0

    for n in range(1, cfg.max_iters + 1):
        t_it = time.monotonic()
        if cfg.scheme == "bf":
            vt = _step_bf(v, spec, ops, cfg.tau, theta)
        elif cfg.scheme == "pgf_bf":
            mu = cngf_multiplier(Field(v, ops.grid), spec, ops)
            vt = _step_bf(v, spec, ops, cfg.tau, theta, extra=mu)
        elif cfg.scheme == "be":
            vt = _step_be(v, spec, ops, cfg.tau, cfg.be_tol, n)
        else:
            vt = _step_ts(v, spec, ops, cfg.tau, n)
        if not np.all(np.isfinite(vt)):
            raise StepFailureError("step produced non-finite values",
                                   iteration=n)
        try:
            lam = lambda_omega(Field(vt, ops.grid), spec, ops)
        except SpectralConditionError as exc:
            raise StepFailureError(
                f"iterate left the admissible cone: {exc}", iteration=n) \
                from exc
        vnew = lam * vt
        diff = vnew - v
        if cfg.stop_norm == "max":
            step_norm = float(np.max(np.abs(diff))) / cfg.tau
        else:
            step_norm = ops.norm_l2(diff) / cfg.tau
        v = vnew
        iter_s += time.monotonic() - t_it

        mn = float(v.min())
        if mn < -POSITIVITY_TOL * max(float(v.max()), 0.0):
            positivity_violated = True
        # on the manifold S = alpha/(alpha+1) ||phi||_p^p, so one quadrature
        # call tracks the action exactly
        lp = ops.lp_norm_pow(v, spec.p)
        actions.append(spec.alpha / (spec.alpha + 1.0) * lp)
        lambdas.append(lam)
        step_norms.append(step_norm)
        if cfg.record_history:
            rep = functionals(Field(v, ops.grid), spec, ops)
            drift = max(drift, abs(rep.nehari) / max(1.0, abs(rep.quadratic)))
        iterations = n
        if step_norm <= cfg.epsilon:
            converged = True
            break

    out = Field(v, ops.grid, nonneg_hint=nonneg and not positivity_violated)
    rep = functionals(out, spec, ops)
    drift = max(drift, abs(rep.nehari) / max(1.0, abs(rep.quadratic)))
    res = ops.residual_norm(v, spec.alpha, spec.omega)
    wall = time.monotonic() - t0
    return SolveReport(
        field=out, converged=converged, iterations=iterations,
        final_step_norm=step_norm, residual=res, report=rep,
        action_history=np.asarray(actions, dtype=float),
        lambda_history=np.asarray(lambdas, dtype=float),
        step_norm_history=np.asarray(step_norms, dtype=float),
        nehari_drift=drift, wall_seconds=wall,
        phase_seconds={"setup": setup_s, "iterations": iter_s},
        positivity_violated=positivity_violated,
        scheme=cfg.scheme, tau=cfg.tau)
