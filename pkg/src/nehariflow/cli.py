"""Command-line entry point.

Subcommands bind TOML run configs to the drivers:

    solve         one ground-state flow; field/history/report outputs
    sweep         frequency sweep (optionally + stability diagnostic)
    compare       scheme benchmark on the free-soliton cases
    converge      spatial refinement study
    omega0        linear threshold and ground eigenvector
    oracle-check  solved field vs a closed-form reference
    crosscheck    least-energy / least-action round trip

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from .config import CONFIG_SCHEMA, RunConfig, load_config
from .discretize import write_field_csv
from .errors import (BlowUpError, ConfigurationError, ContractViolationError,
                     IterativeFailureError, SpectralConditionError,
                     StepFailureError)
from .flows import run_flow
from .oracles import (delta_ground_state, free_soliton, relative_error,
                      rescale_check, rescale_hat)
from .potentials import DeltaSum
from .problem import Field
from .spectra import compute_omega0
from .sweeps import (compare_schemes, convergence_study,
                     least_energy_crosscheck, stability_diagnostic,
                     sweep_omega)

_CONFIG_ERRORS = (ConfigurationError, ContractViolationError)
_NUMERICAL_ERRORS = (StepFailureError, BlowUpError, SpectralConditionError,
                     IterativeFailureError)


def _outdir(rc: RunConfig) -> str:
    d = rc.output.get("directory", ".")
    os.makedirs(d, exist_ok=True)
    return d


def _write_history_csv(path, report):
    """History CSV: n, S_omega, lambda, step_norm (step undefined at n=0)."""
    acts = report.action_history
    lams = report.lambda_history
    steps = np.concatenate([[math.nan], report.step_norm_history])
    with open(path, "w") as fh:
        fh.write("n,S_omega,lambda,step_norm\n")
        for n in range(acts.size):
            fh.write("%d,%.17g,%.17g,%.17g\n"
                     % (n, acts[n], lams[n], steps[n]))


def _report_json(out, lin_omega0=None):
    doc = dict(out.report.as_dict())
    doc.update(converged=out.converged, iterations=out.iterations,
               final_step_norm=out.final_step_norm, residual=out.residual,
               scheme=out.scheme, tau=out.tau,
               nehari_drift=out.nehari_drift,
               positivity_violated=out.positivity_violated,
               wall_seconds=out.wall_seconds,
               phase_seconds=out.phase_seconds)
    if lin_omega0 is not None:
        doc["omega0"] = lin_omega0
    return doc


def _cmd_solve(rc: RunConfig) -> int:
    t0 = time.monotonic()
    ops = rc.build_ops()
    t_asm = time.monotonic() - t0
    lin = compute_omega0(rc.problem, ops)
    if rc.problem.omega <= lin.omega0:
        raise ConfigurationError(
            f"config key problem.omega: omega = {rc.problem.omega:g} does "
            f"not satisfy the spectral condition omega > omega0 = "
            f"{lin.omega0:.6g}; no least action ground state exists at this "
            "frequency")
    seed = rc.build_seed(ops)
    out = run_flow(seed, rc.problem, ops, rc.flow)
    d = _outdir(rc)
    if rc.output.get("write_field", True):
        write_field_csv(os.path.join(d, "field.csv"), out.field.values, ops)
    if rc.output.get("write_history", True):
        _write_history_csv(os.path.join(d, "history.csv"), out)
    if rc.output.get("write_report", True):
        with open(os.path.join(d, "report.json"), "w") as fh:
            json.dump(_report_json(out, lin.omega0), fh, indent=2,
                      sort_keys=True)
            fh.write("\n")
    for tag in rc.output.get("rescaled", []):
        if tag == "hat":
            vals = rescale_hat(out.field, ops).values
        else:
            vals = rescale_check(out.field, rc.problem, ops)
        write_field_csv(os.path.join(d, f"field_{tag}.csv"), vals, ops)
    print("phases: assembly %.4f s | factorization %.4f s | "
          "iterations %.4f s"
          % (t_asm, out.phase_seconds["setup"],
             out.phase_seconds["iterations"]))
    print("%s tau=%g: %s in %d iterations, S_omega=%.10g, residual=%.3e"
          % (out.scheme, out.tau,
             "converged" if out.converged else "NOT converged",
             out.iterations, out.report.action, out.residual))
    if not out.converged:
        print(f"flow stalled at step norm {out.final_step_norm:.3e} after "
              f"iteration {out.iterations} (max_iters reached)",
              file=sys.stderr)
        return 3
    return 0


def _cmd_sweep(rc: RunConfig, workers_flag=None) -> int:
    sec = rc.section("sweep")
    if "omegas" in sec:
        omegas = [float(w) for w in sec["omegas"]]
    elif {"omega_min", "omega_max", "count"} <= sec.keys():
        omegas = list(np.linspace(float(sec["omega_min"]),
                                  float(sec["omega_max"]),
                                  int(sec["count"])))
    else:
        raise ConfigurationError(
            "config key sweep.omegas (or omega_min/omega_max/count) is "
            "required")
    workers = workers_flag if workers_flag is not None \
        else int(sec.get("workers", os.cpu_count() or 1))
    ops = rc.build_ops()
    result = sweep_omega(rc.problem, omegas, rc.flow,
                         warm_start=bool(sec.get("warm_start", True)),
                         workers=workers, ops=ops)
    d = _outdir(rc)
    result.to_csv(os.path.join(d, "sweep.csv"))
    ok = sum(1 for r in result.rows if r.converged)
    print("sweep: %d/%d rows converged, omega0=%.10g"
          % (ok, len(result.rows), result.omega0))
    if sec.get("stability", False):
        diag = stability_diagnostic(result)
        diag.to_csv(os.path.join(d, "stability.csv"))
        if diag.omega_c is None:
            print("stability: no sign change of dM/domega "
                  "(%d slope points)" % diag.slopes.size)
        else:
            print("stability: dM/domega changes sign %d time(s), first "
                  "near omega_c=%.6g" % (diag.sign_changes, diag.omega_c))
    return 0


def _cmd_compare(rc: RunConfig) -> int:
    sec = rc.section("compare")
    taus = sec.get("taus")
    schemes = tuple(sec.get("schemes", ("bf", "be", "pgf_bf", "ts")))
    result = compare_schemes(sec["case"], taus,
                             epsilon=rc.flow.epsilon, schemes=schemes)
    d = _outdir(rc)
    result.to_csv(os.path.join(d, "compare.csv"))
    for (scheme, tau), run in sorted(result.runs.items()):
        _write_history_csv(
            os.path.join(d, "history_%s_tau%g.csv" % (scheme, tau)), run)
    n_fail = sum(1 for r in result.rows if r[5] != "ok")
    print("compare case %s: %d rows, %d failures"
          % (result.case, len(result.rows), n_fail))
    return 0


def _cmd_converge(rc: RunConfig) -> int:
    sec = rc.section("converge")
    study = convergence_study(rc.problem, rc.disc["kind"], sec["h_list"],
                              sec.get("reference", "oracle"), cfg=rc.flow,
                              fe_order=int(rc.disc.get("fe_order", 1)))
    d = _outdir(rc)
    study.to_csv(os.path.join(d, "converge.csv"))
    print("converge: fitted orders L2=%.3f H1=%.3f over %d levels"
          % (study.fit_l2, study.fit_h1, study.hs.size))
    return 0


def _cmd_omega0(rc: RunConfig) -> int:
    sec = rc.section("omega0")
    t0 = time.monotonic()
    ops = rc.build_ops()
    t_asm = time.monotonic() - t0
    t1 = time.monotonic()
    lin = compute_omega0(rc.problem, ops, tol=float(sec.get("tol", 1e-10)),
                         max_iters=int(sec.get("max_iters", 10000)))
    t_solve = time.monotonic() - t1
    if rc.output.get("write_field", False):
        d = _outdir(rc)
        write_field_csv(os.path.join(d, "phi_lin.csv"),
                        lin.phi_lin.values, ops)
    print("phases: assembly %.4f s | eigensolve %.4f s" % (t_asm, t_solve))
    print("omega0=%.17g iterations=%d residual=%.3e"
          % (lin.omega0, lin.iterations, lin.residual))
    return 0


def _cmd_oracle_check(rc: RunConfig) -> int:
    name = rc.section("oracle_check")["name"]
    spec = rc.problem
    ops = rc.build_ops()
    seed = rc.build_seed(ops)
    out = run_flow(seed, spec, ops, rc.flow)
    x = ops.grid.coords[0]
    if name == "free_soliton":
        exact = free_soliton(spec.alpha, spec.omega, x)
    else:
        pot = spec.potential
        if not (isinstance(pot, DeltaSum) and len(pot.centers) == 1
                and pot.centers[0] == 0.0):
            raise ConfigurationError(
                "config key oracle_check.name: the 'delta' oracle needs a "
                "single delta potential centered at 0")
        exact = delta_ground_state(spec.alpha, spec.omega,
                                   pot.strengths[0], x)
    err = relative_error(out.field.values, exact)
    print("oracle %s: relative error %.6e, residual %.6e, %d iterations"
          % (name, err, out.residual, out.iterations))
    return 0 if out.converged else 3


def _cmd_crosscheck(rc: RunConfig) -> int:
    sec = rc.section("crosscheck")
    ops = rc.build_ops()
    result = least_energy_crosscheck(rc.problem, sec["masses"], rc.flow,
                                     ops=ops)
    d = _outdir(rc)
    result.to_csv(os.path.join(d, "crosscheck.csv"))
    errs = [r[4] for r in result.rows if math.isfinite(r[4])]
    worst = max(errs) if errs else math.nan
    print("crosscheck: %d masses, worst round-trip error %.3e"
          % (len(result.rows), worst))
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "converge": _cmd_converge,
    "omega0": _cmd_omega0,
    "oracle-check": _cmd_oracle_check,
    "crosscheck": _cmd_crosscheck,
}


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="nehariflow",
        description="Least action ground states of stationary NLS by "
                    "normalized gradient flows.")
    ap.add_argument("--emit-config-schema", action="store_true",
                    help="print the config JSON schema and exit")
    sub = ap.add_subparsers(dest="command")
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} driver")
        p.add_argument("config", help="TOML run configuration")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=None,
                           help="worker threads for cold-start rows "
                                "(default: sweep.workers or CPU count)")
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    if args.emit_config_schema:
        print(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True))
        return 0
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        rc = load_config(args.config)
        if args.command == "sweep":
            return _cmd_sweep(rc, workers_flag=args.workers)
        return _COMMANDS[args.command](rc)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
