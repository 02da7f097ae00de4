"""Gaussian spectral filter and per-level transmission probabilities."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import FWHM_PER_SIGMA
from .errors import InvalidArgumentError
from .ladder import _omega
from .numerics import voigt_overlap


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian filter centred at omega_F (ueV, same origin as the ladder), FWHM fwhm_F."""

    omega_F: float = 0.0
    fwhm_F: float = 23.0
    peak_transmission: float = 1.0

    def __post_init__(self):
        if not self.fwhm_F > 0:
            raise InvalidArgumentError("FilterSpec: fwhm_F must be positive")
        if not 0 < self.peak_transmission <= 1:
            raise InvalidArgumentError("FilterSpec: peak_transmission must lie in (0, 1]")

    def transmission(self, omega):
        """Intensity transmission of the filter at ``omega`` (peak-normalised)."""
        s = self.fwhm_F / FWHM_PER_SIGMA
        return self.peak_transmission * np.exp(-0.5 * ((np.asarray(omega) - self.omega_F) / s) ** 2)


def _prob(omega_n, gamma, filt, shift):
    # the line sits at omega_n + shift; equivalently the filter sits at omega_F - shift
    delta = omega_n - (filt.omega_F - shift)
    s = filt.fwhm_F / FWHM_PER_SIGMA
    v = voigt_overlap(delta, gamma, filt.fwhm_F)
    return filt.peak_transmission * s * math.sqrt(2 * math.pi) * v


def transmission_prob(ladder, filt, n, reservoir_shift=0.0):
    """Probability that an n -> n-1 photon passes the filter.

    The Lorentzian line (FWHM gamma, centre omega_n + reservoir_shift) is
    averaged over the filter curve. At gamma -> 0 and zero detuning this
    equals ``peak_transmission``.
    """
    if int(n) != n or not 1 <= n <= ladder.n_max:
        raise InvalidArgumentError(f"transmission_prob: n={n} outside [1, {ladder.n_max}]")
    return float(_prob(float(_omega(ladder, n)), ladder.gamma, filt, reservoir_shift))


@lru_cache(maxsize=256)
def _table(ladder, filt, n_max, nr_max, g_r):
    n = np.arange(1, n_max + 1)
    shifts = g_r * np.arange(nr_max + 1)
    P = np.zeros((n_max + 1, nr_max + 1))
    om = _omega(ladder, n)
    for r, s in enumerate(shifts):
        P[1:, r] = _prob(om, ladder.gamma, filt, s)
    P.setflags(write=False)
    return P


def transmission_table(ladder, filt, n_max=None, nr_max=0, g_r=0.0):
    """P[n, n_r] for n = 0..n_max, n_r = 0..nr_max, with line shift g_r * n_r.

    Row n = 0 is zero (no photon to emit). The array is read-only and
    memoised on the (frozen) inputs so repeated calls are free.
    """
    n_max = ladder.n_max if n_max is None else int(n_max)
    nr_max = int(nr_max)
    if n_max < 1 or nr_max < 0:
        raise InvalidArgumentError("transmission_table: need n_max >= 1 and nr_max >= 0")
    return _table(ladder, filt, n_max, nr_max, float(g_r))
