"""Rough-data cubic NLS: Talbot revivals, coefficient dynamics and filament geometry."""

__version__ = "0.1.0"

from .gauss_sums import GaussSumParams, gauss_phase, gauss_sum, gauss_sum_row
from .linear_talbot import PeriodicSpectrum, RationalTime, linear_evolve_direct, talbot_closed_form
from .coeff_dynamics import CoefficientState, IntegrationError, LineData, integrate, rhs

__all__ = [
    "CoefficientState",
    "GaussSumParams",
    "IntegrationError",
    "LineData",
    "PeriodicSpectrum",
    "RationalTime",
    "gauss_phase",
    "gauss_sum",
    "gauss_sum_row",
    "integrate",
    "linear_evolve_direct",
    "rhs",
    "talbot_closed_form",
]
