"""Divergence-ball uncertainty analysis for heavy-tailed reference models.

Builds F-divergence balls around a nominal distribution, diagnoses which
tail behaviors they contain, and computes finite worst-case expected
values, including a tail-adaptive divergence family for models whose tails
are heavier than exponential but lighter than any power law.
"""

from .distributions import (DistributionModel, Exponential, GeneralizedLognormal,
                            HalfGaussian, Pareto, PhiFamily, TruncatedAbove,
                            Weibull, generalized_lognormal_phi_family,
                            weibull_phi_family)
from .divergence import (AlphaDivergence, DivergenceGenerator, FPhiDivergence,
                         KLDivergence, divergence, fphi_coefficients)
from .quadrature import (IntegralResult, IntegralStatus, QuadratureConfig,
                         integrate_interval, integrate_semi_infinite)

__version__ = "0.1.0"

__all__ = [
    "DistributionModel", "Exponential", "HalfGaussian", "Weibull",
    "GeneralizedLognormal", "Pareto", "TruncatedAbove", "PhiFamily",
    "weibull_phi_family", "generalized_lognormal_phi_family",
    "DivergenceGenerator", "KLDivergence", "AlphaDivergence", "FPhiDivergence",
    "divergence", "fphi_coefficients",
    "QuadratureConfig", "IntegralResult", "IntegralStatus",
    "integrate_interval", "integrate_semi_infinite",
]
