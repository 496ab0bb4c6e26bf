"""Numerical evaluation and sharpness certification of distribution-function
Opial and Wirtinger inequalities, with brute-force oracles."""

__version__ = "0.1.0"

from .distributions import (
    Distribution,
    DistributionError,
    NodeFunction,
    Piece,
    QuantizedModel,
    conditional_truncate,
    make_discrete,
    make_uniform_interval,
    quantize,
)
from .functionals import (
    FUNCTIONAL_IDS,
    IneqReport,
    TroyComparison,
    ZeroMeanError,
    corollary_split,
    discrete_identities,
    half_tie_transform,
    nested_integral,
    opial_terms,
    rtwo_terms,
    theorem2_terms,
    theorem3_terms,
    troy_comparison,
    weighted_opial_terms,
    wirtinger_terms,
)
from .oracle import (
    BudgetExceededError,
    PartitionMasses,
    Two3Decomposition,
    check_two3_decomposition,
    enumerate_functional,
    partition_masses,
)
from .sharpness import (
    ConvergenceStudy,
    ExtremalResult,
    Violation,
    WirtingerConstant,
    convergence_study,
    maximize_ratio_opial,
    rayleigh_best_constant,
    search_counterexample,
    wirtinger_best_constant,
)

__all__ = [
    "Distribution",
    "DistributionError",
    "NodeFunction",
    "Piece",
    "QuantizedModel",
    "conditional_truncate",
    "make_discrete",
    "make_uniform_interval",
    "quantize",
    "FUNCTIONAL_IDS",
    "IneqReport",
    "TroyComparison",
    "ZeroMeanError",
    "corollary_split",
    "discrete_identities",
    "half_tie_transform",
    "nested_integral",
    "opial_terms",
    "rtwo_terms",
    "theorem2_terms",
    "theorem3_terms",
    "troy_comparison",
    "weighted_opial_terms",
    "wirtinger_terms",
    "BudgetExceededError",
    "PartitionMasses",
    "Two3Decomposition",
    "check_two3_decomposition",
    "enumerate_functional",
    "partition_masses",
    "ConvergenceStudy",
    "ExtremalResult",
    "Violation",
    "WirtingerConstant",
    "convergence_study",
    "maximize_ratio_opial",
    "rayleigh_best_constant",
    "search_counterexample",
    "wirtinger_best_constant",
]
