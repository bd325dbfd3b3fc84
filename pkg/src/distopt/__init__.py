"""Distributed continuous-time optimization via Lie-bracket approximation.

Converts a separable convex problem with shared linear constraints and a
directed communication graph into a distributed saddle-point flow: the
non-local couplings are rewritten as iterated Lie brackets of admissible
vector fields and approximated with high-frequency oscillatory inputs.
"""

from .digraph import DiGraph, NotConnectedError, Path, shortest_path, split_at
from .liebracket import (CapacityError, ExtendedSystem, FormalBracket,
                         PHallBasis, UnsupportedCouplingError,
                         admissible_fields, build_phall, eval_bracket,
                         equivalence_class, is_phall_element, project_phall,
                         rec_bracket, rec_bracket_phall, rewrite_dynamics)
from .problem import (AssumptionError, AugmentedProblem, InfeasibleError,
                      Problem, QuadraticObjective, SaddlePoint, augment,
                      check_assumptions, lagrangian, solve_kkt_oracle)
from .sim import (BlowUpError, ResolutionError, Trajectory, central_rhs,
                  check_distributed, default_timestep, distributed_rhs,
                  integrate, integrate_distributed, sup_error)
from .spdyn import (AdmissibleSplit, admissible_split, index_set, make_state,
                    saddle_rhs, split_state)
from .specio import bundled_spec, load_spec
from .synthesis import (FrequencyAssignment, FrequencySearchError,
                        InputSynthesis, build_classes,
                        check_independent, check_minimally_canceling,
                        choose_frequencies, eta_coefficients,
                        explicit_low_degree, g_hat, synthesize, xi_matrix)

__version__ = "1.0.0"

__all__ = [
    "DiGraph", "NotConnectedError", "Path", "shortest_path", "split_at",
    "CapacityError", "ExtendedSystem", "FormalBracket", "PHallBasis",
    "UnsupportedCouplingError", "admissible_fields", "build_phall",
    "eval_bracket", "equivalence_class", "is_phall_element", "project_phall",
    "rec_bracket", "rec_bracket_phall", "rewrite_dynamics",
    "AssumptionError", "AugmentedProblem", "InfeasibleError", "Problem",
    "QuadraticObjective", "SaddlePoint", "augment", "check_assumptions",
    "lagrangian", "solve_kkt_oracle",
    "BlowUpError", "ResolutionError", "Trajectory", "central_rhs",
    "check_distributed", "default_timestep", "distributed_rhs", "integrate",
    "integrate_distributed", "sup_error",
    "AdmissibleSplit", "admissible_split", "index_set", "make_state",
    "saddle_rhs", "split_state",
    "bundled_spec", "load_spec",
    "FrequencyAssignment", "FrequencySearchError", "InputSynthesis",
    "build_classes", "check_independent", "check_minimally_canceling",
    "choose_frequencies", "eta_coefficients", "explicit_low_degree", "g_hat",
    "synthesize", "xi_matrix",
]
