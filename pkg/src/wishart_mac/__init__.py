"""Exact eigenvalue and mutual-information laws for the two-user MIMO
multiple-access channel, where user A sees user B as interference.

The central object is the quotient ensemble
``W = (I + b H_B H_B^+)^-1 (a H_A H_A^+)``; see :mod:`wishart_mac.ensemble`.
"""

from .curves import DensityCurve, Quantity
from .ensemble import ChannelConfig, EnsembleContext, correlation_r, h_entry, jpdf, marginal_bin_average, marginal_density
from .extremes import chi_lower, chi_upper, gap_lower, gap_upper, pdf_max, pdf_min
from .montecarlo import McEnsemble, empirical_cdf, empirical_mi, extreme_stats, sample_eigenvalues
from .mutualinfo import (
    MiMethod,
    MomentSummary,
    gaussian_outage,
    mi_mean,
    mi_moments,
    mi_pdf,
    mi_pdf_direct,
    mi_pdf_laplace,
    mi_variance,
    outage,
    outage_direct,
    outage_laplace,
    outage_rate,
)
from .numerics import AccuracyError, QuadratureSpec, ScaledValue
from .specfun import tricomi_u

__version__ = "0.1.0"
