"""Coincidence-histogram pipeline: zero-delay calibration, Fourier noise
filtering, fixed-centre Gaussian fit and detector deconvolution.

Delays are in ps, so DFT frequencies come out in THz; window parameters
are given in GHz. Gaussian widths are labelled: ``sigma`` is a standard
deviation, ``fwhm`` a full width at half maximum.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .constants import FWHM_PER_SIGMA
from .errors import (DegenerateInputError, InvalidArgumentError, NonConvergenceError,
                     SymmetryError)
from .numerics import dft, dft_frequencies, fit_least_squares, quadrature

# fraction of the calibrated peak spectrum the noise window lets through
KEPT_FRACTION = 0.995
DEFAULT_EDGE_GHZ = 1.25


@dataclass
class CoincidenceData:
    tau: np.ndarray
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, float)
        self.counts = np.asarray(self.counts, float)
        if self.tau.shape != self.counts.shape or self.tau.ndim != 1:
            raise InvalidArgumentError("CoincidenceData: tau and counts must be 1-d and equal length")
        if len(self.tau) < 3:
            raise InvalidArgumentError("CoincidenceData: need at least 3 bins")

    @property
    def spacing(self):
        d = np.diff(self.tau)
        if np.any(d <= 0) or np.ptp(d) > 1e-6 * abs(d[0]):
            raise InvalidArgumentError("CoincidenceData: tau grid must be uniform and increasing")
        return float(d.mean())

    @classmethod
    def load(cls, path, **metadata):
        """Read two columns (tau_ps, counts), comma or tab separated, optional header."""
        with open(path, newline="") as fh:
            text = fh.read()
        body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        delim = "\t" if body and "\t" in body[0] else ","
        rows = []
        for row in csv.reader(text.splitlines(), delimiter=delim):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise InvalidArgumentError(f"CoincidenceData.load: bad row {row!r}")
        if not rows:
            raise InvalidArgumentError("CoincidenceData.load: no data rows")
        a = np.array(rows)
        return cls(a[:, 0], a[:, 1], dict(metadata, source=str(path)))

    def save(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau_ps", "counts"])
            for t, c in zip(self.tau, self.counts):
                w.writerow([repr(float(t)), repr(float(c))])


def _gauss_peak(x, p):
    y0, n0, t0, s = p
    return y0 + n0 * np.exp(-0.5 * ((x - t0) / s) ** 2)


def _gauss_peak_jac(x, p):
    y0, n0, t0, s = p
    u = (x - t0) / s
    e = np.exp(-0.5 * u * u)
    return np.column_stack([np.ones_like(x), e, n0 * e * u / s, n0 * e * u * u / s])


def _poisson_sigma(counts):
    return np.sqrt(np.maximum(counts, 1.0))


@dataclass
class Calibration:
    t0: float
    sigma: float
    t0_err: float
    sigma_err: float
    fit: object = field(repr=False, default=None)

    @property
    def fwhm(self):
        return self.sigma * FWHM_PER_SIGMA


def calibrate_zero_delay(summed):
    """Gaussian-plus-background fit of a (summed) histogram: zero delay t0 and width sigma (std dev)."""
    x, y = summed.tau, summed.counts
    med = float(np.median(y))
    if not (med > 0 and y.max() / med > 1.2) and not (med == 0 and y.max() > 0):
        raise DegenerateInputError("calibrate_zero_delay: no visible coincidence peak")
    k = int(np.argmax(y))
    above = np.nonzero(y - med >= 0.5 * (y[k] - med))[0]
    width = max((x[above[-1]] - x[above[0]]) / FWHM_PER_SIGMA, summed.spacing)
    init = [med, y[k] - med, x[k], width]
    res = fit_least_squares(_gauss_peak, x, y, init, sigma=_poisson_sigma(y), jac=_gauss_peak_jac)
    if not res.converged:
        raise NonConvergenceError("calibrate_zero_delay: fit did not converge", partial=res)
    y0, n0, t0, s = res.params
    return Calibration(float(t0), abs(float(s)), float(res.std_errors[2]), float(res.std_errors[3]), res)


@dataclass(frozen=True)
class WindowSpec:
    """Flat-top pass band |nu| < cutoff with erf edges of width edge_width (both GHz)."""

    cutoff: float
    edge_width: float = DEFAULT_EDGE_GHZ

    def __post_init__(self):
        if not (self.cutoff > 0 and self.edge_width > 0):
            raise InvalidArgumentError("WindowSpec: cutoff and edge_width must be positive")

    def __call__(self, nu_ghz):
        nu = np.asarray(nu_ghz, float)
        e = self.edge_width
        return 0.25 * (1 + erf((nu + self.cutoff) / e)) * (1 - erf((nu - self.cutoff) / e))

    @classmethod
    def for_peak(cls, sigma_ps, edge_width=DEFAULT_EDGE_GHZ, kept=KEPT_FRACTION):
        """Window passing a fraction ``kept`` of the spectrum of a Gaussian peak of std dev ``sigma_ps``.

        The peak's amplitude spectrum is Gaussian with std dev 1/(2 pi sigma);
        the cutoff is solved so that the window-weighted spectrum keeps
        ``kept`` of its weight, which is then also the fraction of the peak
        height that survives filtering.
        """
        if not 0 < kept < 1:
            raise InvalidArgumentError("WindowSpec.for_peak: kept must lie in (0, 1)")
        s_nu = 1e3 / (2 * math.pi * sigma_ps)

        def passed(cut):
            w = cls(cut, edge_width)
            f = lambda nu: w(nu) * np.exp(-0.5 * (nu / s_nu) ** 2)
            return 2 * quadrature(f, 0.0, cut + 8 * edge_width + 10 * s_nu, tol=1e-12, points=(cut,)) / (
                s_nu * math.sqrt(2 * math.pi))

        cut = brentq(lambda c: passed(c) - kept, 1e-6 * s_nu, 20 * s_nu + 10 * edge_width, xtol=1e-12)
        return cls(cut, edge_width)


def fourier_noise_filter(data, window, tol=1e-8):
    """N_filtered = IDFT[w(nu) DFT[N_raw]]; the window is even so the result is real."""
    nu_ghz = dft_frequencies(len(data.tau), data.spacing) * 1e3
    out = dft(window(nu_ghz) * dft(data.counts), "inverse")
    resid = float(np.linalg.norm(out.imag))
    if resid > tol * max(float(np.linalg.norm(out.real)), 1e-300):
        raise SymmetryError(f"fourier_noise_filter: imaginary residue {resid:.3g}", partial=out)
    return CoincidenceData(data.tau.copy(), out.real, dict(data.metadata, window=[window.cutoff, window.edge_width]))


@dataclass
class G2Report:
    g2_zero: float
    err: float
    N0: float
    Y0: float
    sigma: float
    t0: float
    fit: object = field(repr=False, default=None)

    def as_dict(self):
        return {"g2_zero": self.g2_zero, "err": self.err, "N0": self.N0, "Y0": self.Y0,
                "sigma_ps": self.sigma, "t0_ps": self.t0}


def extract_g2_zero(filtered, t0, sigma_init=None, noise_counts=None, fix_width=False):
    """Fixed-centre Gaussian fit; g2(0) = 1 + N0 / Y0 with first-order error propagation.

    Fit weights are Poisson errors of ``noise_counts`` (default: the
    filtered counts themselves). ``fix_width`` holds sigma at
    ``sigma_init``, which keeps the fit well posed when there is no peak
    (g2 close to 1). Returns G2Report.
    """
    x, y = filtered.tau, filtered.counts
    w = _poisson_sigma(y if noise_counts is None else np.asarray(noise_counts, float))
    s0 = sigma_init
    if s0 is None:
        med = float(np.median(y))
        k = int(np.argmin(np.abs(x - t0)))
        above = np.nonzero(y - med >= 0.5 * (y[k] - med))[0]
        s0 = max((x[above[-1]] - x[above[0]]) / FWHM_PER_SIGMA, filtered.spacing) if above.size else 50.0
    bg = np.abs(x - t0) > 3 * s0
    if bg.sum() * filtered.spacing < 5 * s0:
        raise InvalidArgumentError("extract_g2_zero: background region shorter than 5 sigma")
    y0_init = float(np.median(y[bg]))
    k = int(np.argmin(np.abs(x - t0)))
    init = [y0_init, y[k] - y0_init, t0, s0]
    res = fit_least_squares(_gauss_peak, x, y, init, sigma=w, jac=_gauss_peak_jac,
                            fixed_mask=[False, False, True, bool(fix_width)])
    if not res.converged:
        raise NonConvergenceError("extract_g2_zero: fit did not converge", partial=res)
    Y0, N0 = float(res.params[0]), float(res.params[1])
    if not Y0 > 0:
        raise DegenerateInputError("extract_g2_zero: background level Y0 is not positive")
    grad = np.array([-N0 / Y0**2, 1.0 / Y0])
    cov = res.covariance[:2, :2]
    err = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    return G2Report(1.0 + N0 / Y0, err, N0, Y0, abs(float(res.params[3])), float(t0), res)


def deconvolve_detector(sigma, sigma_det):
    """Width with the detector jitter removed, sqrt(sigma^2 - sigma_det^2) (same convention in and out)."""
    if sigma_det < 0 or not sigma > sigma_det:
        raise InvalidArgumentError("deconvolve_detector: need sigma > sigma_det >= 0")
    return math.sqrt(sigma**2 - sigma_det**2)


def deconvolved_g2(g2_zero, sigma, sigma_det):
    """g2(0) after removing detector jitter at fixed peak area: g2 - 1 scales by sigma / sigma_dec."""
    return 1.0 + (g2_zero - 1.0) * sigma / deconvolve_detector(sigma, sigma_det)


def detector_response_from_pulse(fwhm_g2, fwhm_pulse):
    """Detector FWHM from the measured pulse-correlation FWHM and the pulse FWHM."""
    if fwhm_pulse < 0 or not fwhm_g2 > fwhm_pulse:
        raise InvalidArgumentError("detector_response_from_pulse: need fwhm_g2 > fwhm_pulse >= 0")
    return math.sqrt(fwhm_g2**2 - fwhm_pulse**2)


def analyze(raw, calibration=None, window=None, fix_width=False):
    """Calibrate (unless given), filter and fit one histogram. Returns (G2Report, filtered, window)."""
    cal = calibrate_zero_delay(raw) if calibration is None else calibration
    window = WindowSpec.for_peak(cal.sigma) if window is None else window
    filt = fourier_noise_filter(raw, window)
    rep = extract_g2_zero(filt, cal.t0, sigma_init=cal.sigma, noise_counts=raw.counts,
                          fix_width=fix_width)
    return rep, filt, window


@dataclass
class ConvergenceCurve:
    acquisition_time: np.ndarray
    g2: np.ndarray
    err: np.ndarray
    Y0: np.ndarray
    converged: bool
    background_ok: bool

    def as_dict(self):
        return {"acquisition_time": self.acquisition_time.tolist(), "g2": self.g2.tolist(),
                "err": self.err.tolist(), "Y0": self.Y0.tolist(),
                "converged": self.converged, "background_ok": self.background_ok}


def convergence_track(snapshots, times=None, y0_threshold=20.0):
    """g2(0) of cumulative snapshots versus acquisition time.

    Zero delay and window come from the last (largest) snapshot.
    ``converged``: the spread of g2 over the last quarter of snapshots is
    below the combined error of its two extreme points. ``background_ok``:
    the final background level reaches ``y0_threshold`` counts.
    """
    snaps = list(snapshots)
    if len(snaps) < 4:
        raise InvalidArgumentError("convergence_track: need at least 4 snapshots")
    times = np.arange(1, len(snaps) + 1, dtype=float) if times is None else np.asarray(times, float)
    cal = calibrate_zero_delay(snaps[-1])
    window = WindowSpec.for_peak(cal.sigma)
    reps = [analyze(s, cal, window)[0] for s in snaps]
    g2 = np.array([r.g2_zero for r in reps])
    err = np.array([r.err for r in reps])
    Y0 = np.array([r.Y0 for r in reps])
    q = g2[-max(2, len(g2) // 4):]
    qe = err[-len(q):]
    i, j = int(np.argmax(q)), int(np.argmin(q))
    converged = bool(q[i] - q[j] < math.hypot(qe[i], qe[j]))
    return ConvergenceCurve(times, g2, err, Y0, converged, bool(Y0[-1] >= y0_threshold))


def synthetic_coincidences(g2_zero, sigma=57.64, Y0=20.0, t0=0.0, tau_max=1000.0, bin_width=4.0,
                           rng=None, noise_amplitude=0.0, noise_period=10.0, drift=0.0):
    """Poisson-sampled histogram with a Gaussian bunching peak.

    Mean counts Y0 (1 + drift * tau / tau_max) (1 + (g2 - 1) exp(-(tau - t0)^2 / 2 sigma^2))
    plus an optional instrument ripple of relative amplitude
    ``noise_amplitude`` and period ``noise_period`` ps. ``rng=None`` returns
    the noiseless expectation.
    """
    tau = np.arange(-tau_max, tau_max + 0.5 * bin_width, bin_width)
    mean = Y0 * (1 + drift * tau / tau_max) * (1 + (g2_zero - 1) * np.exp(-0.5 * ((tau - t0) / sigma) ** 2))
    mean = mean * (1 + noise_amplitude * np.sin(2 * math.pi * tau / noise_period))
    counts = mean if rng is None else rng.poisson(np.maximum(mean, 0)).astype(float)
    return CoincidenceData(tau, counts, {"g2_true": g2_zero, "sigma_ps": sigma, "Y0": Y0})


def accumulate(rng, g2_zero, snapshots, Y0_final=20.0, drift_g2=0.0, **kw):
    """Cumulative snapshots of a source observed for 1..snapshots equal periods.

    With ``drift_g2`` the source's g2 changes linearly by that amount over the run.
    """
    total = None
    out = []
    for k in range(snapshots):
        g = g2_zero + drift_g2 * k / max(snapshots - 1, 1)
        part = synthetic_coincidences(g, Y0=Y0_final / snapshots, rng=rng, **kw)
        total = part.counts if total is None else total + part.counts
        out.append(CoincidenceData(part.tau, total.copy(), {"snapshot": k + 1}))
    return out


def report_json(rep, calibration, convergence=None):
    d = rep.as_dict()
    d.update({"sigma_ps": calibration.sigma, "t0_ps": calibration.t0,
              "convergence_flag": None if convergence is None else convergence.converged})
    return json.dumps(d, indent=2)
