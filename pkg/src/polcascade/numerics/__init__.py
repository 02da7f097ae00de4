"""Numerical kernels: Faddeeva/Voigt, quadrature, DFT, least squares, RNG."""

from .faddeeva import faddeeva, voigt_overlap
from .fourier import dft, dft_frequencies
from .lsq import FitResult, central_jacobian, fit_least_squares
from .quadrature import quadrature
from .rng import RandomStream

__all__ = [
    "faddeeva", "voigt_overlap", "dft", "dft_frequencies", "FitResult",
    "central_jacobian", "fit_least_squares", "quadrature", "RandomStream",
]
