"""Concentration functions of weighted sums and the progressions that explain them."""
from .concentration import ConcentrationResult, concentration, exact_sum_distribution, regularity_factor, strict_floor
from .errors import ArakError, CapExceeded, InvalidInput, NonLatticeError, QuadratureError
from .measures import (
    CoefficientVector,
    CompoundPoissonSpec,
    DiscreteDistribution,
    SpectralMeasure,
    spectral_measures,
    symmetrize,
    tail_mass,
)

__version__ = "0.1.0"

__all__ = [
    "ArakError",
    "CapExceeded",
    "CoefficientVector",
    "CompoundPoissonSpec",
    "ConcentrationResult",
    "DiscreteDistribution",
    "InvalidInput",
    "NonLatticeError",
    "QuadratureError",
    "SpectralMeasure",
    "concentration",
    "exact_sum_distribution",
    "regularity_factor",
    "spectral_measures",
    "strict_floor",
    "symmetrize",
    "tail_mass",
]
