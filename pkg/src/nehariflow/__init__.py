"""Least action ground states of stationary nonlinear Schrodinger
equations by normalized gradient flows on the Nehari manifold."""

from .discretize import (Grid, assemble, radial_reduce, read_field_csv,
                         write_field_csv)
from .errors import (BlowUpError, ConfigurationError, ContractViolationError,
                     IterativeFailureError, NehariflowError,
                     SpectralConditionError, StepFailureError)
from .flows import (FlowConfig, SolveReport, cngf_multiplier,
                    cngf_multiplier_finite, run_flow)
from .nehari import (NehariProjection, gaussian_seed, lambda_omega,
                     project_to_nehari)
from .oracles import (delta_ground_state, delta_ground_state_deriv,
                      free_soliton, free_soliton_deriv, relative_error,
                      rescale_check, rescale_hat)
from .potentials import (DeltaSum, DoubleWellGaussian, FiniteWell,
                         GaussianWell, InversePower, Potential, Tabulated,
                         TrappedCosineGaussian, ZeroPotential)
from .problem import (Ball, Box, Field, FunctionalReport, ProblemSpec,
                      functionals, snls_residual)
from .spectra import LinearGroundState, compute_omega0
from .sweeps import (CompareResult, ConvergenceStudy, CrosscheckResult,
                     StabilityDiagnostic, SweepResult, SweepRow,
                     compare_schemes, convergence_study,
                     least_energy_crosscheck, stability_diagnostic,
                     sweep_omega)

__version__ = "0.1.0"

__all__ = [
    "Ball", "BlowUpError", "Box", "CompareResult", "ConfigurationError",
    "ContractViolationError", "ConvergenceStudy", "CrosscheckResult",
    "DeltaSum", "DoubleWellGaussian", "Field", "FiniteWell", "FlowConfig",
    "FunctionalReport", "GaussianWell", "Grid", "InversePower",
    "IterativeFailureError", "LinearGroundState", "NehariProjection",
    "NehariflowError", "Potential", "ProblemSpec", "SolveReport",
    "SpectralConditionError", "StabilityDiagnostic", "StepFailureError",
    "SweepResult", "SweepRow", "Tabulated", "TrappedCosineGaussian",
    "ZeroPotential", "assemble", "cngf_multiplier",
    "cngf_multiplier_finite", "compare_schemes", "compute_omega0",
    "convergence_study", "delta_ground_state", "delta_ground_state_deriv",
    "free_soliton", "free_soliton_deriv", "functionals", "gaussian_seed",
    "lambda_omega", "least_energy_crosscheck", "project_to_nehari",
    "radial_reduce", "read_field_csv", "relative_error", "rescale_check",
    "rescale_hat", "run_flow", "snls_residual", "stability_diagnostic",
    "sweep_omega", "write_field_csv",
]
