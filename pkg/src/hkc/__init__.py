"""Energy-consistent spectral-Galerkin truncations of rotating convection.

The package builds the nested family of consistent truncated models,
compiles them into evaluable ODE systems, integrates them adaptively and
analyzes heat transport and origin stability.
"""
from .core import Kind, ModeIndex, Params, WaveVector, km_norm, normalizer_eta
from .basis import (FieldSnapshot, GridSpec, eval_theta_basis,
                    eval_velocity_basis, quadrature_inner_product,
                    reconstruct_fields)
from .interaction import (Triad, coeff_theta, coeff_velocity, is_compatible,
                          linear_couplings, sign_coeff, zeta)
from .hierarchy import (CriteriaReport, ModelSpec, build_hkc,
                        check_buoyancy_criterion, check_energy_criterion,
                        check_vorticity_criteria, criteria_report, make_spec,
                        model_dimension, spec_from_json, spec_to_json,
                        wave_order)
from .dynamics import (CompiledModel, InconsistentModelError,
                       NoConvergenceError, compile_model, find_equilibrium,
                       jacobian, rhs)
from .integrator import (BlowUpError, IntegratorConfig, StepSizeError,
                         Trajectory, integrate, step_embedded)
from .diagnostics import (BalanceResiduals, ScalarSeries, balance_residuals,
                          converged, energy_functionals, lyapunov_ball,
                          nusselt_from_flux, nusselt_series)
from .stability import (OriginBlock, StabilityReport, char_coeffs,
                        critical_rayleigh, crossing_type, eigenvalues,
                        hausdorff_upper_bound, level_curve_m3, origin_block,
                        pitchfork_criticality, rotation_threshold,
                        stability_report, unstable_dimension)
from .sweep import (SweepConfig, SweepRecord, bin_nusselt,
                    random_initial_condition, run_point, run_sweep)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
