"""Variational calculus for positive operator measures on indefinite spaces.

The package models translation-invariant configurations as finite
operator-valued measures in momentum space, evaluates a quartic spectral
action over position differences, and provides constrained minimization
together with first-order optimality verification, closed-form pointwise
solvers, and local correlation sampling.
"""

from .action import (
    ClosedChainSpectrum,
    PositionGrid,
    QHatEvaluator,
    action,
    action_profile,
    closed_chain,
    fourier_Q_hat,
    gradient_kernel_Q,
    kernel_P,
    lagrangian,
    profile_to_csv,
)
from .cfsbridge import (
    LocalCorrelation,
    TestFunction,
    correlations_to_csv,
    empirical_cfs,
    hilbert_inner,
    local_correlation,
    physical_wave,
    standard_basis,
)
from .cli import main
from .elverify import (
    ELReport,
    PushforwardMeasure,
    beta_sign_check,
    check_first_order,
    el_residuals,
    gap_of_operator,
    kappa_coefficients,
    lagrange_parameters,
    load_report,
    pushforward,
    report_from_dict,
    report_to_csv,
    report_to_dict,
    save_report,
    support_gap,
)
from .errors import (
    BasisReductionWarning,
    DefectivePencilError,
    InfeasibleProblemError,
    KreinactError,
    NonsmoothPointError,
    NonUniqueMultipliersError,
    NumericalError,
    RestorationError,
    ValidationError,
)
from .homomeasure import (
    ConstraintValues,
    MeasureDecomposition,
    MomentumBox,
    OperatorMeasure,
    apply_linear,
    constraint_values,
    decompose,
    dirac_sea_fixture,
    feynman_slash,
    gamma_matrices,
    load_measure,
    load_operator,
    massless_fixture,
    measure_from_dict,
    measure_to_dict,
    random_measure,
    save_measure,
    save_operator,
    scale,
    transform,
    translate,
    variation_measure,
)
from .krein import (
    SignatureSpace,
    SpectralSplit,
    classified_spectrum,
    epsilon_diagonalize,
    is_positive,
    is_symmetric,
    krein_adjoint,
    positive_spectrum,
    product_annihilates,
    psd_factorize,
    spectral_split,
    symmetric_part,
)
from .minimize import (
    MinimizeConfig,
    MinimizeResult,
    config_from_dict,
    config_to_dict,
    minimize_action,
    restore_constraints,
)
from .pointwise import (
    AlphaValue,
    MultiplierFamily,
    PointwiseProblem,
    PointwiseSolution,
    a_of_alpha,
    admissible_alpha_interval,
    beta_of_alpha,
    brute_force,
    lagrange_from_point,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "KreinactError",
    "ValidationError",
    "NumericalError",
    "DefectivePencilError",
    "NonsmoothPointError",
    "InfeasibleProblemError",
    "NonUniqueMultipliersError",
    "RestorationError",
    "BasisReductionWarning",
    # krein
    "SignatureSpace",
    "SpectralSplit",
    "krein_adjoint",
    "is_symmetric",
    "is_positive",
    "symmetric_part",
    "positive_spectrum",
    "spectral_split",
    "psd_factorize",
    "epsilon_diagonalize",
    "product_annihilates",
    "classified_spectrum",
    # homomeasure
    "MomentumBox",
    "OperatorMeasure",
    "MeasureDecomposition",
    "ConstraintValues",
    "constraint_values",
    "variation_measure",
    "decompose",
    "translate",
    "apply_linear",
    "scale",
    "transform",
    "gamma_matrices",
    "feynman_slash",
    "dirac_sea_fixture",
    "massless_fixture",
    "random_measure",
    "measure_to_dict",
    "measure_from_dict",
    "save_measure",
    "load_measure",
    "save_operator",
    "load_operator",
    # action
    "PositionGrid",
    "ClosedChainSpectrum",
    "kernel_P",
    "closed_chain",
    "lagrangian",
    "action",
    "action_profile",
    "profile_to_csv",
    "gradient_kernel_Q",
    "QHatEvaluator",
    "fourier_Q_hat",
    # pointwise
    "PointwiseProblem",
    "PointwiseSolution",
    "MultiplierFamily",
    "AlphaValue",
    "beta_of_alpha",
    "a_of_alpha",
    "solve",
    "brute_force",
    "lagrange_from_point",
    "admissible_alpha_interval",
    # elverify
    "PushforwardMeasure",
    "ELReport",
    "pushforward",
    "kappa_coefficients",
    "lagrange_parameters",
    "gap_of_operator",
    "support_gap",
    "el_residuals",
    "beta_sign_check",
    "check_first_order",
    "report_to_dict",
    "report_from_dict",
    "save_report",
    "load_report",
    "report_to_csv",
    # minimize
    "MinimizeConfig",
    "MinimizeResult",
    "config_to_dict",
    "config_from_dict",
    "restore_constraints",
    "minimize_action",
    # cfsbridge
    "TestFunction",
    "LocalCorrelation",
    "standard_basis",
    "hilbert_inner",
    "physical_wave",
    "local_correlation",
    "empirical_cfs",
    "correlations_to_csv",
    # cli
    "main",
]
