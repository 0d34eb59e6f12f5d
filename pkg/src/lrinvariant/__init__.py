"""Exact solutions of the time-dependent inverted oscillator via its quadratic invariant."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .params import (PRESETS, CaldirolaKanaiParams, OscillatorModel, TimeFunction,  # noqa: F401
                     eval_gamma, eval_modified_frequency_sq, make_caldirola_kanai)
from .ode import IntegrationProblem, Trajectory, integrate  # noqa: F401
from .ermakov import ErmakovSolution, ermakov_residual, closed_form_rho_ck, solve_rho  # noqa: F401
from .weber import EigenfunctionTable, build_eigenfunction_table, eval_varphi  # noqa: F401
from .operators import (GridSpec, WavefunctionFrame, apply_hamiltonian, apply_invariant,  # noqa: F401
                        apply_transformed_invariant, gauge_transform)
from .wavefunction import (PacketSpec, ck_solution_frame, eigenfunction_frame,  # noqa: F401
                           exact_solution_frame, packet_weights, phase_alpha, synthesize_packet)
from .propagator import PropagationRun, cn_step, propagate  # noqa: F401
from .verify import (ClassicalTrajectory, ResidualReport, classical_solve,  # noqa: F401
                     ehrenfest_check, gauge_identity_check, invariant_drift, run_suite,
                     tdse_residual)
