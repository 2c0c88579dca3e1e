"""Gaussian scale mixture processes for spatial extremes.

A scale mixture field multiplies a stationary standard Gaussian process by an
independent positive random scale. Depending on the tail of the scale law the
resulting field is asymptotically independent, asymptotically dependent, or
sits exactly at the boundary, which makes the family useful when data leave
the extremal dependence class uncertain. This package provides model
evaluation (joint, marginal, copula functions), censored pseudo-likelihood
fitting, tail-dependence diagnostics, and unconditional plus conditional
simulation, with a command line interface.
"""

from ._version import __version__
from .correlation import CorrelationModel, SiteSet, build_correlation, mahalanobis_distance
from .data import (
    Dataset,
    PseudoUniformData,
    block_resample,
    rank_transform,
    read_observations,
    read_sites,
    write_observations,
    write_sites,
)
from .gaussian import (
    ConditionalGaussian,
    MvnCdfEstimate,
    conditional_gaussian,
    mvn_cdf,
    mvn_pdf,
)
from .likelihood import (
    CensorConfig,
    CensoredLikelihood,
    LikelihoodConfig,
    LikelihoodError,
    censored_loglik,
)
from .mixture import MixtureModel
from .params import (
    ModelFamily,
    Parameter,
    ParamVector,
    build_model,
    default_params,
    family,
    family_names,
)
from .radial import (
    BoxCoxScale,
    Dirac,
    ExtWeibull,
    GpdScale,
    ParetoSlash,
    RadialLaw,
    Rayleigh,
    ScaledRadial,
    StudentRadial,
    model3_support_constant,
    tail_classify,
)
from .taildep import (
    TailAsymptote,
    TailCurve,
    chi_u,
    chibar_u,
    chi_limit_regvar,
    chibar_limit_weibull,
    cond_exceed_prob,
    empirical_chi_u,
    empirical_chibar_u,
    parametric_tail_curve,
    tail_asymptote,
    weibull_tail_asymptote,
)

__all__ = [
    "CorrelationModel",
    "SiteSet",
    "build_correlation",
    "mahalanobis_distance",
    "Dataset",
    "PseudoUniformData",
    "block_resample",
    "rank_transform",
    "read_observations",
    "read_sites",
    "write_observations",
    "write_sites",
    "ConditionalGaussian",
    "MvnCdfEstimate",
    "conditional_gaussian",
    "mvn_cdf",
    "mvn_pdf",
    "CensorConfig",
    "CensoredLikelihood",
    "LikelihoodConfig",
    "LikelihoodError",
    "censored_loglik",
    "MixtureModel",
    "ModelFamily",
    "Parameter",
    "ParamVector",
    "build_model",
    "default_params",
    "family",
    "family_names",
    "RadialLaw",
    "Dirac",
    "StudentRadial",
    "Rayleigh",
    "ParetoSlash",
    "GpdScale",
    "ExtWeibull",
    "BoxCoxScale",
    "ScaledRadial",
    "model3_support_constant",
    "tail_classify",
    "TailAsymptote",
    "TailCurve",
    "chi_u",
    "chibar_u",
    "chi_limit_regvar",
    "chibar_limit_weibull",
    "cond_exceed_prob",
    "empirical_chi_u",
    "empirical_chibar_u",
    "parametric_tail_curve",
    "tail_asymptote",
    "weibull_tail_asymptote",
    "__version__",
]
