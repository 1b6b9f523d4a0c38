"""Finite metric measure spaces under the product operation ``boxplus``.

The package covers exact construction and comparison of spaces, the
semicharacter functionals, Prohorov and Gromov-Prohorov distances, unique
prime factorization, and random spaces (Levy, stable, thinned and discrete
stable laws) with Laplace-transform based tests.
"""

from .core import (
    BoxSum,
    FiniteMMSpace,
    boxplus,
    boxplus_all,
    boxplus_pow,
    canonical_form,
    canonical_key,
    diam,
    is_isomorphic,
    new_space,
    sample_distance_matrix,
    scale,
    space_from_dict,
    space_to_dict,
    trivial,
    two_point,
)
from .errors import (
    AmbiguousFactorization,
    BadScale,
    BadWeights,
    BudgetExceeded,
    DimensionMismatch,
    DuplicatePoints,
    MMSpaceError,
    NotAMetric,
    NotDivisible,
    NotIrreducible,
    ParseError,
    SizeOverflow,
    TooLarge,
)
from .factorization import (
    Factorization,
    divides,
    factorize,
    find_factor_split,
    is_irreducible,
    join,
    meet,
    nth_root,
    psi,
    quotient,
    sigma,
)
from .functionals import (
    CHI_1,
    LaplaceEstimate,
    SemicharacterSpec,
    bigD,
    bigDA,
    check_kappa_chain,
    chi,
    chi1,
    chi_exponent_bounds,
    chi_monte_carlo,
    delta,
)
from .prohorov import (
    Certificate,
    dgpr_lower,
    dgpr_to_trivial,
    dgpr_to_trivial_exact,
    dgpr_upper,
    prohorov,
    prohorov_oracle,
    verify_certificate,
)
from .stochastic import (
    DiscreteDistributionOnM,
    FiniteLevyMeasure,
    StableSpec,
    discrete_stable_laplace,
    discrete_stable_space,
    empirical_laplace,
    equality_test,
    levy_laplace_exact,
    lln_empirical,
    lepage_residual,
    lln_limit_exact,
    sample_discrete_stable_count,
    sample_lepage,
    sample_levy,
    stability_check,
    stable_laplace_quadrature,
    thin,
    thinning_laplace_exact,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousFactorization",
    "BadScale",
    "BadWeights",
    "bigD",
    "bigDA",
    "boxplus",
    "boxplus_all",
    "boxplus_pow",
    "BoxSum",
    "BudgetExceeded",
    "canonical_form",
    "canonical_key",
    "Certificate",
    "check_kappa_chain",
    "chi",
    "chi1",
    "CHI_1",
    "chi_exponent_bounds",
    "chi_monte_carlo",
    "delta",
    "dgpr_lower",
    "dgpr_to_trivial",
    "dgpr_to_trivial_exact",
    "dgpr_upper",
    "diam",
    "DimensionMismatch",
    "discrete_stable_laplace",
    "discrete_stable_space",
    "DiscreteDistributionOnM",
    "divides",
    "DuplicatePoints",
    "empirical_laplace",
    "equality_test",
    "Factorization",
    "factorize",
    "find_factor_split",
    "FiniteLevyMeasure",
    "FiniteMMSpace",
    "is_irreducible",
    "is_isomorphic",
    "join",
    "LaplaceEstimate",
    "levy_laplace_exact",
    "lepage_residual",
    "lln_empirical",
    "lln_limit_exact",
    "meet",
    "MMSpaceError",
    "new_space",
    "NotAMetric",
    "NotDivisible",
    "NotIrreducible",
    "nth_root",
    "ParseError",
    "prohorov",
    "prohorov_oracle",
    "psi",
    "quotient",
    "sample_discrete_stable_count",
    "sample_distance_matrix",
    "sample_lepage",
    "sample_levy",
    "scale",
    "SemicharacterSpec",
    "sigma",
    "SizeOverflow",
    "space_from_dict",
    "space_to_dict",
    "stability_check",
    "stable_laplace_quadrature",
    "StableSpec",
    "thin",
    "thinning_laplace_exact",
    "TooLarge",
    "trivial",
    "two_point",
    "verify_certificate",
]
