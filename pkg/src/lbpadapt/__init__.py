"""Adaptive dynamics of logistic branching populations.

Exact fixation probabilities for the two-type logistic branching chain,
invasibility coefficients and fitness gradients near neutrality, the
individual-based Gillespie simulator, the trait substitution sequence and
the canonical diffusion of the dominant trait.
"""

__version__ = "0.1.0"

from .diffusion import (
    ClassicalLimit,
    DiffusionConfig,
    DiffusionPath,
    cead_rhs,
    classical_fitness,
    classical_limit,
    drift_diffusion_coeffs,
    large_k_drift,
    run_diffusion,
    run_ensemble,
)
from .errors import (
    ConfigError,
    ExpressionError,
    LbpError,
    ModelError,
    SolverError,
    TableRangeError,
)
from .fixation import (
    FixationTable,
    StationaryLaw,
    chi,
    chi_for_rates,
    chi_neutral,
    invasion_fitness,
    size_biased_pmf,
    solve_fixation,
    stationary_mean,
    stationary_pmf,
)
from .ibm import (
    PopulationState,
    SimConfig,
    empirical_size_histogram,
    run_ibm,
    single_type_state,
    two_type_mc_fixation,
    two_type_state,
)
from .invasibility import (
    AhatTable,
    InvasibilityCoefficients,
    InvasibilityCurve,
    SelectionGradient,
    a_coeff,
    a_coeffs,
    build_ahat_table,
    curve_sweep,
    default_ahat_table,
    fitness_gradient,
    gradient_v,
    invasibility_g,
)
from .model import (
    ModelSpec,
    MutationKernel,
    SelectionCoefficients,
    TwoTypeRates,
    constant_model,
    eval_rates,
    grad_b,
    grad_c1,
    grad_c2,
    parse_model,
    reconstruct_rates,
    selection_coefficients,
)
from .tss import TSSPath, beta, run_tss
