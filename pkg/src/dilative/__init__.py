"""Numerics for dilatively stable and semistable infinitely divisible processes.

Analytic and empirical finite-dimensional log-characteristic functions,
decomposability-group residual tests, generalized fractional Lévy models,
path samplers and aggregation limit schemes.
"""
from .charfn import (
    EmpiricalModel,
    FinDimQuery,
    GFLPModel,
    LevyModel,
    ZBetaModel,
    empirical_log_cf,
    psi,
    zbeta_psi,
)
from .errors import DilativeError
from .kernels import Fractional, Homogeneous, Indicator, StepDiscretized, check_homogeneity, eval_fc
from .levy import (
    DiscreteLevyMeasure,
    DiscreteMeasureExponent,
    GaussianRef,
    SemistableLogPeriodic,
    levy_findim_psi,
    semistable_exponent,
)
from .quadrature import QuadratureSpec, integrate
from .scaling import (
    DilativeParams,
    closure_product_check,
    dilative_residual,
    group_membership,
    incommensurable,
    semistable_alpha,
)

__all__ = [
    "DilativeError", "DilativeParams", "DiscreteLevyMeasure", "DiscreteMeasureExponent", "EmpiricalModel",
    "FinDimQuery", "Fractional", "GFLPModel", "GaussianRef", "Homogeneous", "Indicator", "LevyModel",
    "QuadratureSpec", "SemistableLogPeriodic", "StepDiscretized", "ZBetaModel", "check_homogeneity",
    "closure_product_check", "dilative_residual", "empirical_log_cf", "eval_fc", "group_membership",
    "incommensurable", "integrate", "levy_findim_psi", "psi", "semistable_alpha", "semistable_exponent",
    "zbeta_psi",
]
