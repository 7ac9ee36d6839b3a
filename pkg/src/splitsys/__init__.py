"""Hybrid forward-backward / halfspace projection splitting for systems of
monotone inclusions ``0 in A_i(x) + B_i(x)``, ``i = 1..m``."""

from .errors import (ConfigurationError, DomainError, InvariantViolation,
                     LinesearchFailure, OracleFailure, SplitsysError)
from .geometry import Ball, Box, Halfspace, Hyperplane, WholeSpace, project, project_halfspace
from .harness import (Metrics, ProblemInstance, acceptance_suite, evaluate_run,
                      generate_ill_conditioned, generate_planted_system, load_instance,
                      oracle_solve, save_instance)
from .operators import (AffineOperator, CallableOperator, L1Subdifferential, NormalCone,
                        ZeroOperator, forward_backward_map)
from .solver import (AlgoParams, SolveResult, SolveTrace, component_step, linesearch,
                     residual, solve, solve_baseline_fb)

__version__ = "0.1.0"
