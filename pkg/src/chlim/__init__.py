"""1D Cahn-Hilliard solver lab: nine time integrators and an experiment harness."""

from .banded import BandedLU, BandedOperator, SolverFailure, banded_lu_solve
from .core import (
    GridSpec,
    ModelParams,
    assemble_A,
    assemble_stabilized_operator,
    discrete_energy,
    double_well,
    epsilon_of_grid,
    rhs_eval,
    total_mass,
)
from .lab import (
    EpsRule,
    ExperimentSpec,
    RunSummary,
    StabilityScanResult,
    convergence_study,
    efficiency_study,
    gradient_stability_scan,
    integrate,
    reference_solution,
    relative_error,
    spectral_bound,
)
from .lim import ChebyshevPlan, chebyshev_order, li_step, lim_step, plan_chebyshev
from .report import ConfigurationError, InstabilityError, NewtonFailure, StepReport
from .schemes import NewtonConfig, SchemeId, StepContext, implicit_step, scheme_step

__version__ = "0.1.0"
