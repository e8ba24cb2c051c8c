"""Numerical laboratory for the Zakharov-Kuznetsov equation on the cylinder R x T."""

from .spectrum import (
    FrequencyGrid,
    SpectralField,
    SpaceTimeField,
    dispersion,
    propagate_linear,
    derivative_x1,
    multiply_fields,
)

__all__ = [
    "FrequencyGrid",
    "SpectralField",
    "SpaceTimeField",
    "dispersion",
    "propagate_linear",
    "derivative_x1",
    "multiply_fields",
]
__version__ = "0.1.0"
