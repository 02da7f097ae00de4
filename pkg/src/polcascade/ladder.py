"""Polariton ladder, coupled-oscillator model, Feshbach interaction and
inhomogeneous (Diniz) transmission.

Energy units: the ladder lives in ueV relative to an arbitrary origin,
everything spectroscopic (exciton, cavity, polariton energies, Feshbach
detunings) is in meV. Interaction constants returned to the ladder are ueV.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import HC_MEV_UM
from .errors import DomainError, InvalidArgumentError, NonConvergenceError
from .numerics import faddeeva, fit_least_squares


@dataclass(frozen=True)
class LadderModel:
    """omega_n = omega_LP + g (n-1) + g' (n-1)(n-2), all in ueV; gamma is the FWHM."""

    omega_LP: float = 0.0
    g: float = 0.0
    g_prime: float = 0.0
    gamma: float = 66.6
    n_max: int = 12

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgumentError("LadderModel: gamma must be positive")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise InvalidArgumentError("LadderModel: n_max must be an integer >= 2")
        for name in ("omega_LP", "g", "g_prime"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"LadderModel: {name} must be finite")


def _omega(model, n):
    n = np.asarray(n, dtype=float)
    return model.omega_LP + model.g * (n - 1) + model.g_prime * (n - 1) * (n - 2)


def transition_frequency(model, n):
    """Energy of the n -> n-1 photon, 1 <= n <= n_max."""
    if int(n) != n or not 1 <= n <= model.n_max:
        raise InvalidArgumentError(f"transition_frequency: n={n} outside [1, {model.n_max}]")
    return float(_omega(model, n))


def transition_frequencies(model, n_max=None):
    """omega_n for n = 1..n_max (defaults to the model truncation)."""
    n_max = model.n_max if n_max is None else n_max
    return _omega(model, np.arange(1, n_max + 1))


# ---------------------------------------------------------------- coupled oscillator


def hopfield(E_c, E_X, Omega):
    """Two-mode diagonalisation. Returns (E_LP, E_UP, cX2) with cX2 the exciton weight of the LP."""
    if not np.all(np.asarray(Omega) > 0):
        raise InvalidArgumentError("hopfield: Omega must be positive")
    E_c = np.asarray(E_c, dtype=float)
    d = E_c - E_X
    root = np.sqrt(Omega**2 + 0.25 * d**2)
    mid = 0.5 * (E_c + E_X)
    cX2 = 0.5 * (1.0 + d / np.sqrt(d**2 + 4 * Omega**2))
    out = (mid - root, mid + root, cX2)
    if np.ndim(E_c) == 0:
        return tuple(float(v) for v in out)
    return out


def lp_energy(Delta, E_X, Omega):
    """LP energy and exciton weight at cavity-exciton detuning Delta = E_c - E_X (meV)."""
    E_LP, _, cX2 = hopfield(np.asarray(Delta) + E_X, E_X, Omega)
    return E_LP, cX2


@dataclass(frozen=True)
class CoupledOscillator:
    """Fiber-cavity polariton: exciton E_X and cavity mode tuned by piezo voltage.

    Cavity length L = L0 - s1 V - s2 V^2 (um), mirror radius R (um),
    longitudinal index q and mirror phase phi enter only as 2 pi q + phi.
    """

    E_X: float = 1452.08
    Omega: float = 1.52
    L0: float = 20.308
    R: float = 21.0
    phi: float = 6.25
    q: float = 6.319
    s1: float = 2.09e-3
    s2: float = -1.3e-6

    def __post_init__(self):
        if not self.Omega > 0:
            raise InvalidArgumentError("CoupledOscillator: Omega must be positive")
        if not self.q > 0:
            raise InvalidArgumentError("CoupledOscillator: q must be positive")

    def length(self, V):
        V = np.asarray(V, dtype=float)
        return self.L0 - self.s1 * V - self.s2 * V**2

    def energies(self, V):
        """(E_LP, E_UP, cX2) at piezo voltage V."""
        return hopfield(cavity_energy(self, V), self.E_X, self.Omega)

    def penetration_depth(self, wavelength):
        """Phase phi expressed as a length at ``wavelength`` (same units)."""
        return self.phi * wavelength / (2 * math.pi)

    @property
    def rabi_splitting(self):
        return 2.0 * self.Omega

    _FIELDS = ("E_X", "Omega", "L0", "R", "phi", "q", "s1", "s2")

    def as_vector(self):
        return np.array([getattr(self, k) for k in self._FIELDS])

    @classmethod
    def from_vector(cls, v):
        return cls(**dict(zip(cls._FIELDS, map(float, v))))


def cavity_energy(osc, V_P):
    """Cavity resonance (meV) of a plano-concave cavity at piezo voltage V_P.

    E_c = (hc / 2L) [2 pi q + acos(sqrt(1 - L/R)) + phi].
    """
    L = osc.length(V_P)
    if np.any(L <= 0) or np.any(L >= osc.R):
        raise DomainError("cavity_energy: need 0 < L < R")
    E = HC_MEV_UM / (2 * L) * (2 * math.pi * osc.q + np.arccos(np.sqrt(1 - L / osc.R)) + osc.phi)
    return float(E) if np.ndim(E) == 0 else E


def synthetic_anticrossing(osc, V_lp, V_up, noise=0.05, rng=None):
    """(V, E, branch) samples of both polariton branches, Gaussian noise in meV.

    ``branch`` is 0 for LP, 1 for UP.
    """
    V = np.concatenate([np.asarray(V_lp, float), np.asarray(V_up, float)])
    branch = np.concatenate([np.zeros(len(V_lp), int), np.ones(len(V_up), int)])
    E_LP, E_UP, _ = osc.energies(V)
    E = np.where(branch == 0, E_LP, E_UP)
    if noise > 0:
        rng = np.random.default_rng() if rng is None else rng
        E = E + rng.normal(0.0, noise, size=E.shape)
    return V, E, branch


def _anticrossing_jac(V, p, branch):
    # columns in CoupledOscillator._FIELDS order
    E_X, Om, L0, R, phi, q, s1, s2 = p
    L = L0 - s1 * V - s2 * V**2
    if np.any(L <= 0) or np.any(L >= R):
        return np.zeros((V.size, 8))
    k = HC_MEV_UM / (2 * L)
    u = np.sqrt(1 - L / R)
    theta = 2 * math.pi * q + np.arccos(u) + phi
    E_c = k * theta
    d = E_c - E_X
    root = np.sqrt(Om**2 + 0.25 * d**2)
    sgn = np.where(branch == 0, -1.0, 1.0)
    dE_dEc = 0.5 + sgn * 0.25 * d / root
    dE_dEX = 0.5 - sgn * 0.25 * d / root
    dE_dOm = sgn * Om / root
    # d acos(u) / dL and / dR, with u = sqrt(1 - L/R)
    dacos_du = -1.0 / np.sqrt(L / R)
    dEc_dL = -E_c / L + k * dacos_du * (-0.5 / (R * u))
    dEc_dR = k * dacos_du * (0.5 * L / (R**2 * u))
    dEc_dphi = k
    dEc_dq = 2 * math.pi * k
    cols = [dE_dEX, dE_dOm, dE_dEc * dEc_dL, dE_dEc * dEc_dR, dE_dEc * dEc_dphi, dE_dEc * dEc_dq,
            dE_dEc * dEc_dL * (-V), dE_dEc * dEc_dL * (-V**2)]
    return np.column_stack(cols)


def fit_anticrossing(V, E, branch, init, sigma=0.05, fixed=("phi",)):
    """Least-squares fit of branch energies to the coupled-oscillator model.

    q and phi enter only through 2 pi q + phi, so one of them must be held
    fixed; by default phi. Returns (CoupledOscillator, FitResult).

    A joint rescaling of (q, L0, s1, s2) changes E_c only through the small
    curvature term, so over a narrow voltage range chi-square can keep
    falling as L0 -> infinity. The fit then ends on a numerically singular
    Jacobian and RankDeficiencyError is raised; hold q (or R) fixed as
    well to pin the absolute length.
    """
    V = np.asarray(V, float)
    branch = np.asarray(branch, int)
    names = CoupledOscillator._FIELDS
    mask = np.array([k in fixed for k in names])
    if not (mask[names.index("phi")] or mask[names.index("q")]):
        raise InvalidArgumentError("fit_anticrossing: q and phi are degenerate, fix one of them")

    def model(x, p):
        try:
            E_LP, E_UP, _ = hopfield(cavity_energy(CoupledOscillator.from_vector(p), x),
                                     p[0], p[1])
        except InvalidArgumentError:
            # outside the physical domain: a huge residual makes the trust region back off
            return np.full(x.shape, 1e6)
        return np.where(branch == 0, E_LP, E_UP)

    def jac(x, p):
        return _anticrossing_jac(x, p, branch)

    res = fit_least_squares(model, V, E, init.as_vector(), sigma=sigma, fixed_mask=mask, jac=jac,
                            max_nfev=20000)
    if not res.converged:
        raise NonConvergenceError("fit_anticrossing: fit did not converge", partial=res)
    return CoupledOscillator.from_vector(res.params), res


# ---------------------------------------------------------------- Feshbach interaction


@dataclass(frozen=True)
class FeshbachParams:
    """Exciton-exciton constants (g_t, g_s in ueV) and multiexciton couplings (meV)."""

    g_t: float = 3.05
    g_s: float = 3.05
    g_PB: float = 0.07
    g_PT: float = 0.23
    eps_B: float = 2 * 1452.08 - 2.2
    eps_T: float = 3 * 1452.08 - 2.4 * 2.2
    gamma_B: float = 0.34
    gamma_T: float = 0.34

    def __post_init__(self):
        if not (self.gamma_B > 0 and self.gamma_T > 0):
            raise InvalidArgumentError("FeshbachParams: gamma_B and gamma_T must be positive")

    @classmethod
    def from_binding(cls, E_X, E_B, E_T, **kw):
        """Build from the exciton energy and the biexciton/triexciton binding energies (meV)."""
        if not (E_B > 0 and E_T > 0):
            raise InvalidArgumentError("FeshbachParams: binding energies must be positive")
        return cls(eps_B=2 * E_X - E_B, eps_T=3 * E_X - E_T, **kw)

    def resonance_detunings(self, E_X, Omega):
        """Cavity-exciton detunings (meV) where 2 E_LP = eps_B and 3 E_LP = eps_T."""
        out = []
        for e in (E_X - self.eps_B / 2, E_X - self.eps_T / 3):
            # E_LP = E_X - e  <=>  Delta/2 - sqrt(Omega^2 + Delta^2/4) = -e
            out.append((Omega**2 - e**2) / e)
        return tuple(out)


def _dispersive(x, width):
    return x / (x**2 + width**2)


def feshbach_g(E_LP, cX2, p):
    """Two-body constant g and its triplet/singlet channels (ueV).

    alpha1 = g_t cX2^2, alpha2 = g_s cX2^2 + 2 g_PB^2 cX2^2 x / (x^2 + gamma_B^2),
    x = 2 E_LP - eps_B, g = (alpha1 + alpha2) / 2.
    """
    cX2 = np.asarray(cX2, dtype=float)
    if np.any((cX2 < 0) | (cX2 > 1)):
        raise InvalidArgumentError("feshbach_g: cX2 must lie in [0, 1]")
    c4 = cX2**2
    x = 2 * np.asarray(E_LP, dtype=float) - p.eps_B
    alpha1 = p.g_t * c4
    alpha2 = p.g_s * c4 + 2e3 * p.g_PB**2 * c4 * _dispersive(x, p.gamma_B)
    g = 0.5 * (alpha1 + alpha2)
    if np.ndim(g) == 0:
        return float(g), float(alpha1), float(alpha2)
    return g, alpha1, alpha2


def triexciton_gprime(E_LP, cX2, p):
    """Three-body constant g' (ueV): 2 g_PT^2 cX2^3 y / (y^2 + gamma_T^2), y = 3 E_LP - eps_T."""
    cX2 = np.asarray(cX2, dtype=float)
    if np.any((cX2 < 0) | (cX2 > 1)):
        raise InvalidArgumentError("triexciton_gprime: cX2 must lie in [0, 1]")
    y = 3 * np.asarray(E_LP, dtype=float) - p.eps_T
    gp = 2e3 * p.g_PT**2 * cX2**3 * _dispersive(y, p.gamma_T)
    return float(gp) if np.ndim(gp) == 0 else gp


# ---------------------------------------------------------------- inhomogeneous transmission


@dataclass(frozen=True)
class DinizParams:
    """Cavity coupled to a Gaussian-broadened exciton ensemble.

    kappa, sigma (HWHM of the exciton distribution) and gamma_X in ueV;
    Omega and omega_X in meV.
    """

    kappa: float = 64.0
    sigma: float = 435.0
    gamma_X: float = 40.0
    Omega: float = 1.52
    omega_X: float = 1452.08

    def __post_init__(self):
        if not (self.kappa > 0 and self.sigma > 0 and self.gamma_X > 0):
            raise InvalidArgumentError("DinizParams: widths must be positive")
        if not self.Omega >= 0:
            raise InvalidArgumentError("DinizParams: Omega must be non-negative")


def diniz_transmission(omega, p, omega_c):
    """Complex amplitude transmission t(omega) of the cavity mode at ``omega_c`` (meV)."""
    omega = np.asarray(omega, dtype=float)
    kappa, sig, gX = p.kappa * 1e-3, p.sigma * 1e-3, p.gamma_X * 1e-3
    s = math.sqrt(math.log(2.0))
    zeta = (omega - p.omega_X + 0.5j * gX) * s / sig
    W = -1j * s * p.Omega**2 * math.sqrt(math.pi) / sig * faddeeva(zeta)
    t = (kappa / 2j) / (omega - omega_c + 0.5j * kappa - W)
    return complex(t) if np.ndim(t) == 0 else t


def _lorentz(x, p):
    x0, fwhm, amp, c = p
    h = 0.5 * fwhm
    return amp * h * h / ((x - x0) ** 2 + h * h) + c


def _lorentz_jac(x, p):
    x0, fwhm, amp, c = p
    h = 0.5 * fwhm
    u = (x - x0) ** 2 + h * h
    L = h * h / u
    dx0 = amp * h * h * 2 * (x - x0) / u**2
    dh = amp * (2 * h / u - h * h * 2 * h / u**2)
    return np.column_stack([dx0, 0.5 * dh, L, np.ones_like(x)])


@dataclass
class LorentzFit:
    center: float
    fwhm: float
    area: float
    background: float
    fit: object = field(repr=False, default=None)

    def figure_of_merit(self, cX2):
        """cX2^2 / Gamma: interaction per linewidth, up to the exciton-exciton constant."""
        return cX2**2 / self.fwhm


def lp_lorentzian_characterize(omega, T):
    """Fit a Lorentzian plus constant to a sampled peak; returns LorentzFit.

    ``area`` is that of the Lorentzian alone, in the units of omega times T.
    """
    omega = np.asarray(omega, float)
    T = np.asarray(T, float)
    k = int(np.argmax(T))
    half = T[k] / 2
    above = np.nonzero(T >= half)[0]
    w0 = max(omega[above[-1]] - omega[above[0]], 3 * abs(omega[1] - omega[0]))
    span = omega[-1] - omega[0]
    if span < 3 * w0:
        raise InvalidArgumentError("lp_lorentzian_characterize: spectrum must cover >= 3 FWHM")
    init = np.array([omega[k], w0, T[k] - T.min(), T.min()])
    res = fit_least_squares(_lorentz, omega, T, init, jac=_lorentz_jac)
    if not res.converged:
        raise NonConvergenceError("lp_lorentzian_characterize: fit did not converge", partial=res)
    x0, fwhm, amp, c = res.params
    fwhm = abs(fwhm)
    return LorentzFit(center=x0, fwhm=fwhm, area=0.5 * math.pi * amp * fwhm, background=c, fit=res)


def diniz_lp_line(Delta, p, points=801):
    """LP transmission line at detuning Delta (meV): returns LorentzFit in meV.

    The peak is located on a coarse grid below the upper polariton, then
    fitted on a window of +-4 coarse FWHM around it.
    """
    omega_c = p.omega_X + Delta
    E_LP, _ = lp_energy(Delta, p.omega_X, max(p.Omega, 1e-12))
    w = np.linspace(E_LP - 0.6, E_LP + 0.3, 9001)
    T = np.abs(diniz_transmission(w, p, omega_c)) ** 2
    k = int(np.argmax(T))
    above = np.nonzero(T >= 0.5 * T[k])[0]
    half_window = max(4 * (w[above[-1]] - w[above[0]]), 0.1)
    w = np.linspace(w[k] - half_window, w[k] + half_window, points)
    T = np.abs(diniz_transmission(w, p, omega_c)) ** 2
    return lp_lorentzian_characterize(w, T)


def diniz_linewidth_table(deltas, p):
    """Gamma_LP (ueV) of the LP line over a detuning grid (meV)."""
    return np.array([diniz_lp_line(d, p).fwhm * 1e3 for d in np.atleast_1d(deltas)])
