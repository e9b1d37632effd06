"""Finite-dimensional laboratory for double operator integrals.

Commuting self-adjoint pairs are diagonalised jointly, symbols are
sampled on the product of their joint spectra, and the resulting Schur
multipliers drive perturbation experiments: an exact two-term
difference representation, boundedness certificates for the symbols,
dyadic smoothness norms, and factorization brackets for the multiplier
norm.
"""

from __future__ import annotations

from .besov import (
    BesovEstimate,
    FilterW,
    GridSpec,
    besov_norm_estimate,
    besov_norm_exponential,
    build_w,
    default_n_range,
    lp_coefficients,
    lp_derivative_sups,
)
from .doi import (
    doi_evaluate,
    doi_via_factorization,
    hs_inequality_slack,
    sample_on_spectra,
)
from .errors import (
    ConfigError,
    DegenerateResolutionFailure,
    DimensionMismatch,
    DoilabError,
    EvaluationFailure,
    GridMissingOrigin,
    GridTooCoarse,
    InvalidP,
    InvalidSharpness,
    MissingDerivative,
    NonCommuting,
    RankTooSmall,
    ShapeMismatch,
    SymbolEvaluationFailure,
    ZeroFrequency,
    ZeroPerturbation,
)
from .multiplier import (
    Bracket,
    HaagerupFactorization,
    bracket,
    multiplier_norm_lower,
    multiplier_norm_upper,
    sample_symbol,
)
from .perturb import (
    BoundReport,
    CounterexampleRow,
    EnsembleReport,
    EnsembleSpec,
    IdentityReport,
    SchattenReport,
    TrialRow,
    TruncationRow,
    besov_weights,
    bound_ratio,
    counterexample_scan,
    ensemble_csv_rows,
    perturbed_pair,
    relative_bound_factor,
    run_ensemble,
    schatten_norm,
    schatten_ratio,
    schatten_report,
    truncation_convergence,
    verify_identity,
)
from .spectral import (
    CommutingPair,
    JointSpectrum,
    commutator_norm,
    functional_calculus,
    haar_unitary,
    joint_diagonalize,
    random_commuting_pair,
    require_hermitian,
)
from .symbols import (
    BoundednessCertificate,
    Function2,
    GrowthScan,
    Symbol,
    certificate_growth_scan,
    divided_diff_symbol_var1,
    divided_diff_symbol_var2,
    finite_diff_check,
    function_from_config,
    lemma_triv1_certificate,
    lemma_triv_certificate,
    split_symbol_var1,
    symmetric_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BesovEstimate",
    "BoundReport",
    "BoundednessCertificate",
    "Bracket",
    "CommutingPair",
    "ConfigError",
    "CounterexampleRow",
    "DegenerateResolutionFailure",
    "DimensionMismatch",
    "DoilabError",
    "EnsembleReport",
    "EnsembleSpec",
    "EvaluationFailure",
    "FilterW",
    "Function2",
    "GridMissingOrigin",
    "GridSpec",
    "GridTooCoarse",
    "GrowthScan",
    "HaagerupFactorization",
    "IdentityReport",
    "InvalidP",
    "InvalidSharpness",
    "JointSpectrum",
    "MissingDerivative",
    "NonCommuting",
    "RankTooSmall",
    "SchattenReport",
    "ShapeMismatch",
    "Symbol",
    "SymbolEvaluationFailure",
    "TrialRow",
    "TruncationRow",
    "ZeroFrequency",
    "ZeroPerturbation",
    "besov_norm_estimate",
    "besov_norm_exponential",
    "besov_weights",
    "bound_ratio",
    "bracket",
    "build_w",
    "certificate_growth_scan",
    "commutator_norm",
    "counterexample_scan",
    "default_n_range",
    "divided_diff_symbol_var1",
    "divided_diff_symbol_var2",
    "doi_evaluate",
    "doi_via_factorization",
    "ensemble_csv_rows",
    "finite_diff_check",
    "function_from_config",
    "functional_calculus",
    "haar_unitary",
    "hs_inequality_slack",
    "joint_diagonalize",
    "lemma_triv1_certificate",
    "lemma_triv_certificate",
    "lp_coefficients",
    "lp_derivative_sups",
    "multiplier_norm_lower",
    "multiplier_norm_upper",
    "perturbed_pair",
    "random_commuting_pair",
    "relative_bound_factor",
    "require_hermitian",
    "run_ensemble",
    "sample_on_spectra",
    "sample_symbol",
    "schatten_norm",
    "schatten_ratio",
    "schatten_report",
    "split_symbol_var1",
    "symmetric_grid",
    "truncation_convergence",
    "verify_identity",
]
