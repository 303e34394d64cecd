"""Scaled Poisson approximation to weighted sums of independent Poisson variables.

The approximation replaces S = sum_r b_r A(nu_r) by (1/k) A(k mu) with
k = mu/sigma^2, matching the first two moments.  This package provides the
exact law of S as an oracle, the moment-matched tail approximations, the
locally dependent Bernoulli construction W, the Stein operator on the lattice
m*Z+ together with its solved tail-indicator equation, the size-bias coupling
with its exact H-decomposition of the tail gap, and the experiment harness
evaluating the moderate-deviation error bracket.
"""

from .bernoulli_lattice import (
    BernoulliScheme,
    build_scheme,
    default_trials,
    scheme_moments,
    tail_ratio,
    w_distribution,
)
from .coupling import (
    DeltaDistribution,
    HDecomposition,
    conditional_delta_bound,
    delta_distribution,
    g_expectation_ratio,
    h_decomposition,
    size_bias_check_exact,
    size_bias_sample,
)
from .errors import NumericalRangeError, ValidationError
from .experiments import (
    BoundParams,
    ExperimentRow,
    bound_params,
    compare_normal,
    empirical_constant,
    eta,
    fit_error_growth,
    moderate_deviation_bound,
    plateau_lengths,
    relative_error_sweep,
    scaling_sweep,
)
from .poisson_core import (
    normal_tail,
    poisson_cdf,
    poisson_log_pmf,
    poisson_pmf,
    poisson_tail,
    regularized_gamma_q,
)
from .stein_lattice import (
    PropertyReport,
    SteinContext,
    SteinSolutionTable,
    g_l,
    g_m_via_recurrence,
    operator_zero_mean,
    solve_stein,
    stein_apply,
    verify_f_properties,
)
from .weighted_sum import (
    LatticeDistribution,
    SumMoments,
    WeightedPoissonSum,
    exact_distribution,
    exact_tail,
    moments,
    normal_approx_tail,
    normalize_weights,
    scaled_poisson_tail,
)

__version__ = "0.1.0"
