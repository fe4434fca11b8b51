"""Structure-preserving solvers for the BBM equation and its hyperbolic approximation."""

from .errors import (ConfigurationError, DivergenceError, IterationError, ParameterError,
                     SingularityError, SingularOperatorError, SolverError, UsageError)
from .imex import (ImexTableau, RunRecord, check_order_conditions, classify, evolve,
                   imex_step, load_tableau, relax)
from .linsolve import StageSolver, solve_bbm_elliptic, solve_stage
from .models import (BBMHModel, BBMModel, SplittingParams, State, bbm_rhs, bbmh_rhs_explicit,
                     bbmh_rhs_implicit, invariants, max_wave_speeds, validate_splitting,
                     well_prepared_init)
from .sbp import FourierOperator, GridSpec, OperatorSet, apply, build_upwind_operators
from .waves import SolitonParams, bbm_soliton, build_peakon, petviashvili_solve

__version__ = "0.1.0"
