"""Fractional and tempered fractional Laplacians on bounded domains.

The package discretizes the nonlocal operators with complement-valued
(generalized Dirichlet and Neumann) boundary conditions, solves the steady
and time-dependent problems, simulates the underlying jump processes, and
cross-checks every route against Fourier-symbol and Monte Carlo oracles.
"""

__version__ = "0.1.0"

from .special import (
    SymbolQuery,
    frac_lap_coeff,
    fractional_symbol,
    gamma,
    gauss_2f1,
    tempered_coeff,
    tempered_symbol,
)
from .operators import (
    DiscreteOperator,
    ExteriorData,
    Grid1D,
    Grid2D,
    OperatorSpec,
    assemble,
    assemble_hv,
    check_growth,
    exterior_source,
    riesz_apply,
)
from .solvers import (
    DirichletProblem,
    NeumannProblem,
    SolveReport,
    dirichlet_uniqueness_check,
    escape_probability,
    flux_field,
    solve_steady_dirichlet,
    solve_transient,
    step_implicit,
)
from .stochastic import (
    CrossoverReport,
    JumpLaw,
    berry_esseen_bound,
    crossover_experiment,
    mc_escape_partition,
    mc_escape_probability,
    moment,
    power_jump_law,
    sample_jump,
    sample_jumps,
    simulate_flight,
    tempered_jump_law,
)
from .spectral import (
    PeriodicField,
    energy_equivalence_check,
    montroll_weiss,
    reference_apply,
    symbol_apply,
    verify_tempered_identity,
)

__all__ = [name for name in dir() if not name.startswith("_")]
