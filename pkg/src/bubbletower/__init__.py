"""Bubble-tower constructions for -Delta u = u^{p*+eps} - V(|y|) u^q.

Closed-form profiles and constants, the reduced finite-dimensional model,
a discretized Lyapunov-Schmidt reduction producing genuine multi-spike
solutions, and an independent shooting verifier.
"""

__version__ = "0.1.0"

from .errors import (AssemblyError, BubbleTowerError, ConditioningError,
                     ConvergenceError, HypothesisViolationError,
                     QuadratureConvergenceError, RegimeMismatchError,
                     TruncationError, WindowViolationError)
from .profiles import (ModelParams, PotentialSpec, Regime, bubble_w,
                       critical_exponents, ef_forward, ef_inverse, ef_r_of_x,
                       ef_x_of_r, model_constants, profile_U, profile_d2U,
                       profile_dU)
from .quadrature import (EnergyConstants, energy_constants, integrate_line,
                         profile_log_moment_closed_form,
                         profile_moment_closed_form)
from .reduced_model import (EnergyBreakdown, TowerConfig, critical_scales,
                            energy_expansion, predicted_solution,
                            predicted_tower, reduced_functional,
                            reduced_functional_grad,
                            reduced_functional_hess_diag, spike_locations,
                            tower_amplitudes)
from .field import (Grid, GridFunction, SpikeFrame, ansatz_residual,
                    default_sigma, default_window, energy, full_operator,
                    grid_for_spikes, kernel_directions, linearized_apply,
                    linearized_matrix, nonlinear_remainder, star_norm,
                    tower_ansatz)
from .reduction import (ProjectedSolver, RadialSolution, ReductionConfig,
                        ReductionState, assemble_solution, check_window,
                        reduced_energy, solve_correction,
                        solve_projected_linear, solve_reduced)
from .verifier import (Classification, CompareMetrics, ShotProfile, compare,
                       find_tower, shoot)
