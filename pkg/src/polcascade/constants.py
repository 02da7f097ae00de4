"""Unit system: energies in ueV (meV where noted), times in ps."""

import math

#: reduced Planck constant, ueV * ps
HBAR = 658.2119569
#: h * c, meV * um (cavity resonance energies)
HC_MEV_UM = 1239.8419843320026
#: FWHM / standard deviation of a Gaussian
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def fwhm_to_sigma(fwhm):
    return fwhm / FWHM_PER_SIGMA


def sigma_to_fwhm(sigma):
    return sigma * FWHM_PER_SIGMA


def rate_per_ps(energy_ueV):
    """Convert an energy width (ueV) to a rate (1/ps)."""
    return energy_ueV / HBAR


def energy_from_lifetime(tau_ps):
    """Energy width (ueV) of a process with lifetime ``tau_ps``."""
    return HBAR / tau_ps
