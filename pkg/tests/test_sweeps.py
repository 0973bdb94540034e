"""Frequency sweeps, scheme benchmarks, mesh studies and the round trip
between the fixed-mass and fixed-frequency problems."""
import numpy as np
import pytest

from nehariflow.errors import ConfigurationError, ContractViolationError
from nehariflow.flows import FlowConfig
from nehariflow.potentials import ZeroPotential
from nehariflow.problem import Box, ProblemSpec
from nehariflow.sweeps import (CompareResult, SweepResult, SweepRow,
                               case_problem, compare_schemes,
                               convergence_study, least_energy_crosscheck,
                               stability_diagnostic, sweep_omega)

from conftest import delta_spec, free_spec


def row(omega, action, mass, seed="centered", converged=True):
    return SweepRow(omega=omega, action=action, mass=mass,
                    energy=action - omega * mass, mu_g=-omega,
                    iterations=10, residual=1e-10, converged=converged,
                    seed_label=seed)


def test_sweep_matches_closed_forms():
    """Free line, alpha = 1: M_g = 4 sqrt(w), S_g = (8/3) w^(3/2),
    E_g = -(4/3) w^(3/2)."""
    spec = free_spec()
    cfg = FlowConfig(scheme="bf", tau=1.0, epsilon=1e-10)
    result = sweep_omega(spec, [0.5, 1.0, 2.0], cfg, kind="sp", h=2.0 ** -4)
    assert result.omega0 == pytest.approx(-(np.pi / 64.0) ** 2, abs=1e-6)
    for r in result.rows:
        assert r.converged
        assert r.mass == pytest.approx(4.0 * np.sqrt(r.omega), rel=1e-7)
        assert r.action == pytest.approx((8.0 / 3.0) * r.omega ** 1.5,
                                         rel=1e-7)
        assert r.energy == pytest.approx(-(4.0 / 3.0) * r.omega ** 1.5,
                                         rel=1e-7)


def test_sweep_warm_and_cold_agree():
    spec = delta_spec()
    cfg = FlowConfig(scheme="bf", tau=1.0, epsilon=1e-9)
    omegas = [0.5, 1.0, 2.0]
    kw = dict(kind="fe", h=2.0 ** -4, fe_order=2)
    warm = sweep_omega(spec, omegas, cfg, warm_start=True, **kw)
    cold = sweep_omega(spec, omegas, cfg, warm_start=False, workers=2, **kw)
    for a, b in zip(warm.rows, cold.rows):
        assert a.action == pytest.approx(b.action, rel=1e-7)
        assert a.mass == pytest.approx(b.mass, rel=1e-6)


def test_sweep_input_validation():
    spec = free_spec()
    cfg = FlowConfig()
    with pytest.raises(ConfigurationError):
        sweep_omega(spec, [1.0, 0.5], cfg, kind="sp", h=0.25)
    with pytest.raises(ConfigurationError):
        sweep_omega(spec, [1.0], cfg, kind="sp")  # no mesh width
    # frequencies at or below the linear threshold are rejected up front
    with pytest.raises(ConfigurationError):
        sweep_omega(delta_spec(), [0.1, 1.0], cfg, kind="fe", h=0.25)


def test_sweep_result_guards():
    ok = SweepResult(rows=(row(1.0, 1.0, 2.0), row(2.0, 3.0, 2.5)),
                     omega0=0.25, metadata={})
    assert ok.rows[0].action == 1.0
    with pytest.raises(ContractViolationError):
        SweepResult(rows=(row(1.0, 3.0, 2.0), row(2.0, 1.0, 2.5)),
                    omega0=0.25, metadata={})
    bad_energy = SweepRow(omega=1.0, action=1.0, mass=2.0, energy=5.0,
                          mu_g=-1.0, iterations=1, residual=0.0,
                          converged=True)
    with pytest.raises(ContractViolationError):
        SweepResult(rows=(bad_energy,), omega0=0.25, metadata={})


def test_stability_diagnostic_sign_structure():
    # rising then falling mass: one positive-to-negative flip
    omegas = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    masses = [1.0, 2.0, 2.8, 3.0, 2.6, 1.8]
    rows = tuple(row(w, 10.0 + w, m) for w, m in zip(omegas, masses))
    diag = stability_diagnostic(SweepResult(rows=rows, omega0=0.5,
                                            metadata={}))
    assert diag.sign_changes == 1
    assert 3.0 < diag.omega_c < 5.0
    # monotone mass: no flips, no critical frequency
    rows = tuple(row(w, 10.0 + w, w) for w in omegas)
    diag = stability_diagnostic(SweepResult(rows=rows, omega0=0.5,
                                            metadata={}))
    assert diag.sign_changes == 0 and diag.omega_c is None
    with pytest.raises(ContractViolationError):
        stability_diagnostic(SweepResult(rows=rows[:2], omega0=0.5,
                                         metadata={}))


def test_convergence_study_on_the_delta_problem():
    spec = delta_spec()
    study = convergence_study(spec, "fe", [0.25, 0.125, 0.0625],
                              reference="oracle",
                              cfg=FlowConfig(tau=4.0, epsilon=1e-9),
                              fe_order=1)
    assert np.all(np.diff(study.l2) < 0.0)
    assert np.all(np.diff(study.h1) < 0.0)
    assert study.fit_l2 > 1.5 and study.fit_h1 > 0.7
    with pytest.raises(ConfigurationError):
        convergence_study(spec, "fe", [0.25], reference="oracle")
    with pytest.raises(ConfigurationError):
        convergence_study(spec, "fe", [0.25, 0.125], reference="tables")


def test_compare_schemes_smoke():
    res = compare_schemes("I", [0.1], epsilon=1e-8, schemes=("bf", "ts"))
    assert isinstance(res, CompareResult)
    assert len(res.rows) == 2
    for scheme, tau, wall, iters, rel, status in res.rows:
        assert status == "ok"
        assert rel < 1e-2 and iters > 0 and wall > 0.0
    assert ("bf", 0.1) in res.runs
    # the exact nonlinear substep amplifies pointwise at large tau, so the
    # splitting scheme is expected to report a blow-up there
    big = compare_schemes("I", [4.0], epsilon=1e-8, schemes=("ts",))
    assert big.rows[0][5] == "blow_up"
    with pytest.raises(ConfigurationError):
        case_problem("IV")


def test_crosscheck_round_trip_on_the_free_line():
    """m -> mu -> omega -> M_g(omega) returns to m."""
    spec = free_spec(half=16.0)
    cfg = FlowConfig(tau=0.2, epsilon=1e-9)
    res = least_energy_crosscheck(spec, [2.0, 4.0], cfg, kind="sp",
                                  h=2.0 ** -3)
    for m, mu, omega, mg, rel, it_e, it_a in res.rows:
        assert omega == pytest.approx(-mu)
        # closed form: M_g(omega) = 4 sqrt(omega), so omega = (m/4)^2
        assert omega == pytest.approx((m / 4.0) ** 2, rel=1e-4)
        assert rel < 1e-4
        assert it_e > 0 and it_a > 0


def test_crosscheck_rejects_supercritical_mass_problems():
    spec = ProblemSpec(alpha=2.0, omega=1.0, dim=1,
                       potential=ZeroPotential(),
                       domain=Box(((-16.0, 16.0),)))
    with pytest.raises(ConfigurationError):
        least_energy_crosscheck(spec, [1.0], FlowConfig(), kind="sp",
                                h=0.25)
