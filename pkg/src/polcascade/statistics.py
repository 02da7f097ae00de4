"""Steady-state occupation statistics and the analytic zero-delay correlation.

The polariton mode is pumped incoherently from an exciton reservoir. With a
frozen reservoir the occupation is geometric (black-body). Reservoir number
fluctuations are handled by the joint rate equation over (n, n_r).
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .errors import (DegenerateInputError, InvalidArgumentError, NumericFailureError,
                     RegimeError, TruncationError)
from .filter import FilterSpec, transmission_table
from .ladder import LadderModel, feshbach_g, lp_energy, triexciton_gprime


# ---------------------------------------------------------------- distributions


@dataclass(frozen=True)
class OccupationDist:
    p: np.ndarray

    @property
    def n_max(self):
        return len(self.p) - 1

    @property
    def mean(self):
        return float(np.dot(np.arange(len(self.p)), self.p))


def thermal_occupation(A_over_C, n_max=12, tail=1e-10, max_n=2000):
    """Geometric distribution p_n = (1 - x) x^n, x = A/C, renormalised on 0..n_max.

    n_max grows until p[n_max] < ``tail``.
    """
    x = float(A_over_C)
    if not 0 <= x < 1:
        raise InvalidArgumentError("thermal_occupation: need 0 <= A/C < 1 (below threshold)")
    n_max = int(n_max)
    if n_max < 1:
        raise InvalidArgumentError("thermal_occupation: n_max must be >= 1")
    if x > 0:
        # g2 weights the tail by n^2, so cut where n^2 p_n < tail
        need = math.ceil(math.log(tail / (1 - x)) / math.log(x)) + 1
        while need * need * (1 - x) * x**need >= tail:
            need += 1
        n_max = max(n_max, need)
    if n_max > max_n:
        raise TruncationError("thermal_occupation: truncation cap exceeded",
                              diagnostics={"n_max": n_max, "cap": max_n})
    p = x ** np.arange(n_max + 1)
    p /= p.sum()
    return OccupationDist(p)


def _g2(p, P):
    # p and P share the leading (n) axis; extra axes are summed over
    n = np.arange(p.shape[0]).reshape((-1,) + (1,) * (p.ndim - 1))
    Pm1 = np.zeros_like(P)
    Pm1[1:] = P[:-1]
    num = float(np.sum(P * Pm1 * n * (n - 1) * p))
    den = float(np.sum(P * n * p))
    if not den > 0:
        raise DegenerateInputError("g2: no detectable emission (zero denominator)")
    return num / den**2


def g2_zero_analytic(dist, P):
    """Zero-delay correlation of filtered photons from a frozen-reservoir state.

    g2 = sum P_n P_{n-1} n (n-1) p_n / (sum P_n n p_n)^2. ``P`` is indexed
    by n from 0 (a transmission_table column or 1-d vector).
    """
    p = dist.p if isinstance(dist, OccupationDist) else np.asarray(dist, float)
    P = np.asarray(P, float)
    if P.ndim == 2:
        P = P[:, 0]
    if len(P) < len(p):
        raise InvalidArgumentError("g2_zero_analytic: transmissions do not cover the distribution")
    if np.any(P < 0):
        raise InvalidArgumentError("g2_zero_analytic: transmissions must be non-negative")
    return _g2(p, P[: len(p)])


# ---------------------------------------------------------------- reservoir


@dataclass(frozen=True)
class ReservoirModel:
    """Reservoir pump F (1/ps), relaxation gamma_r and dark decay gamma_D (ueV), shift g_r (ueV/exciton)."""

    F: float = 0.006
    gamma_r: float = HBAR / 350.0
    gamma_D: float = HBAR / 350.0
    g_r: float = 10.0

    def __post_init__(self):
        for k in ("F", "gamma_r", "gamma_D", "g_r"):
            v = getattr(self, k)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"ReservoirModel: {k} must be finite and non-negative")


@dataclass(frozen=True)
class JointDistribution:
    p: np.ndarray
    residual: float = 0.0

    @property
    def n_marginal(self):
        return self.p.sum(axis=1)

    @property
    def r_marginal(self):
        return self.p.sum(axis=0)

    def summary(self):
        """Mean polariton number, mean reservoir number and its standard deviation."""
        pn, pr = self.n_marginal, self.r_marginal
        n = np.arange(len(pn))
        r = np.arange(len(pr))
        nbar = float(n @ pn)
        rbar = float(r @ pr)
        sr = math.sqrt(max(float(r**2 @ pr) - rbar**2, 0.0))
        return {"n_mean": nbar, "nr_mean": rbar, "nr_std": sr}

    def to_json(self):
        return json.dumps({"p": self.p.tolist(), **self.summary()})


def generator(res, gamma, n_max, nr_max):
    """Rate matrix Q (dp/dt = Q p) over states n * (nr_max + 1) + n_r.

    Transitions: n -> n-1 at gamma n; (n, r) -> (n+1, r-1) at gamma_r r (n+1);
    r -> r+1 at F; r -> r-1 at gamma_D r. Rates out of the box are dropped
    together with their diagonal term, so columns sum to zero.
    """
    k = gamma / HBAR
    a = res.gamma_r / HBAR
    d = res.gamma_D / HBAR
    N, R = n_max + 1, nr_max + 1
    n, r = np.meshgrid(np.arange(N), np.arange(R), indexing="ij")
    idx = n * R + r
    Q = np.zeros((N * R, N * R))

    def add(mask, rate, target):
        src = idx[mask]
        Q[target[mask], src] += rate[mask]
        Q[src, src] -= rate[mask]

    add(n > 0, k * n, idx - R)
    add((r > 0) & (n < n_max), a * r * (n + 1), idx + R - 1)
    add(r < nr_max, np.full(n.shape, float(res.F)), idx + 1)
    add(r > 0, d * r, idx - 1)
    return Q


def _solve_null(Q):
    A = Q.copy()
    A[-1, :] = 1.0
    b = np.zeros(len(Q))
    b[-1] = 1.0
    p = np.linalg.solve(A, b)
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def power_iteration_steady_state(Q, tol=1e-12, p0=None):
    """Stationary vector of Q by iterating the uniformised chain I + Q / Lambda."""
    lam = 1.05 * np.max(-np.diag(Q))
    M = np.eye(len(Q)) + Q / lam
    p = np.full(len(Q), 1.0 / len(Q)) if p0 is None else np.asarray(p0, float)
    # squaring the transition matrix makes the iteration logarithmic in the mixing time
    for _ in range(64):
        q = M @ p
        if np.abs(q - p).sum() < tol:
            return q / q.sum()
        M = M @ M
        p = q
    raise NumericFailureError("power iteration did not converge", partial=p)


def joint_steady_state(res, gamma, n_max=12, nr_max=24, tail=1e-8, max_states=6000,
                       verify=False):
    """Stationary p(n, n_r) of the joint rate equation.

    Truncation grows until both marginals have p[last] < ``tail``. With
    ``verify`` the dense solution is checked against power iteration.
    """
    if not gamma > 0:
        raise InvalidArgumentError("joint_steady_state: gamma must be positive")
    if not res.gamma_r < gamma:
        raise RegimeError("joint_steady_state: need gamma_r < gamma (spontaneous-emission regime)")
    if res.F > 0 and res.gamma_D == 0 and res.gamma_r == 0:
        raise InvalidArgumentError("joint_steady_state: reservoir has no loss channel")
    n_max, nr_max = int(n_max), int(nr_max)
    while True:
        if (n_max + 1) * (nr_max + 1) > max_states:
            raise TruncationError("joint_steady_state: truncation cap exceeded",
                                  diagnostics={"n_max": n_max, "nr_max": nr_max})
        Q = generator(res, gamma, n_max, nr_max)
        p = _solve_null(Q)
        P = p.reshape(n_max + 1, nr_max + 1)
        tn, tr = P.sum(1)[-1], P.sum(0)[-1]
        if tn < tail and tr < tail:
            break
        if tn >= tail:
            n_max = int(math.ceil(n_max * 1.5))
        if tr >= tail:
            nr_max = int(math.ceil(nr_max * 1.5))
    resid = float(np.abs(Q @ p).max())
    if verify:
        pp = power_iteration_steady_state(Q)
        diff = float(np.abs(pp - p).max())
        if diff > 1e-8:
            raise NumericFailureError(f"joint_steady_state: power iteration disagrees ({diff:.2e})", partial=P)
    return JointDistribution(P, residual=resid)


def g2_zero_with_reservoir(joint, P_table):
    """Zero-delay correlation with the double sum over (n, n_r) and P[n, n_r]."""
    p = joint.p if isinstance(joint, JointDistribution) else np.asarray(joint, float)
    P = np.asarray(P_table, float)
    if P.shape[0] < p.shape[0] or P.shape[1] < p.shape[1]:
        raise InvalidArgumentError("g2_zero_with_reservoir: table does not cover the distribution")
    return _g2(p, P[: p.shape[0], : p.shape[1]])


def emission_spectrum(omega, ladder, mean_n, n_r, res, n=1):
    """Lorentzian emission line of the n -> n-1 transition with the reservoir present.

    Centre omega_n + g_r n_r, FWHM gamma - gamma_r n_r, integral pi <n>.
    """
    width = ladder.gamma - res.gamma_r * n_r
    if not width > 0:
        raise RegimeError("emission_spectrum: effective linewidth is not positive (at/above threshold)")
    centre = ladder.omega_LP + ladder.g * (n - 1) + ladder.g_prime * (n - 1) * (n - 2) + res.g_r * n_r
    h = 0.5 * width
    return mean_n * h / ((np.asarray(omega, float) - centre) ** 2 + h * h)


# ---------------------------------------------------------------- scans


@dataclass
class Curve:
    x: np.ndarray
    g2: np.ndarray
    x_label: str = "delta_F_ueV"
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {self.x_label: self.x.tolist(), **{k: np.asarray(v).tolist() for k, v in self.extra.items()},
                "g2_zero": self.g2.tolist()}

    @property
    def amplitude(self):
        return float(np.max(self.g2) - np.min(self.g2))

    def to_csv(self, path, comment=None):
        cols = [self.x_label, *self.extra.keys(), "g2_zero"]
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(len(self.x)):
                w.writerow([repr(float(self.x[i])), *(repr(float(v[i])) for v in self.extra.values()),
                            repr(float(self.g2[i]))])


def scan_filter(ladder, deltas, fwhm_F, dist=None, joint=None, g_r=0.0, peak_transmission=1.0):
    """g2(0) versus filter detuning (ueV).

    Without a reservoir the detuning is measured from omega_LP. With a
    joint distribution it is measured from the mean emission line
    omega_LP + g_r <n_r>, so that both models put the filter at the same
    place relative to the observed line.
    """
    deltas = np.asarray(deltas, float)
    if deltas.ndim != 1 or np.any(np.diff(deltas) <= 0):
        raise InvalidArgumentError("scan_filter: detunings must form an increasing grid")
    if (dist is None) == (joint is None):
        raise InvalidArgumentError("scan_filter: give exactly one of dist or joint")
    out = np.empty(len(deltas))
    if dist is not None:
        for i, d in enumerate(deltas):
            f = FilterSpec(ladder.omega_LP + d, fwhm_F, peak_transmission)
            P = transmission_table(ladder, f, n_max=dist.n_max)
            out[i] = g2_zero_analytic(dist, P)
    else:
        N, R = joint.p.shape
        ref = ladder.omega_LP + g_r * joint.summary()["nr_mean"]
        for i, d in enumerate(deltas):
            f = FilterSpec(ref + d, fwhm_F, peak_transmission)
            P = transmission_table(ladder, f, n_max=N - 1, nr_max=R - 1, g_r=g_r)
            out[i] = g2_zero_with_reservoir(joint, P)
    return Curve(deltas, out)


def scan_detuning(deltas, E_X, Omega, feshbach, gamma_LP, fwhm_F=23.0, filter_offset=0.6,
                  n_r=1.0, gamma_r=HBAR / 350.0, n_max=12):
    """g2(0) versus cavity-exciton detuning Delta (meV) with Feshbach-renormalised g, g'.

    ``gamma_LP`` is the LP linewidth (ueV) on the same grid, or a callable
    of Delta. At each point the ladder uses gamma = Gamma_LP(Delta), the
    filter sits at +``filter_offset`` Gamma_LP and the reservoir is frozen
    at ``n_r`` (A/C = gamma_r n_r / Gamma_LP). Returns the full curve with
    the biexciton-only curve (g' = 0) in ``extra``.
    """
    deltas = np.asarray(deltas, float)
    G = np.array([gamma_LP(d) for d in deltas]) if callable(gamma_LP) else np.asarray(gamma_LP, float)
    if G.shape != deltas.shape:
        raise InvalidArgumentError("scan_detuning: linewidth table does not cover the grid")
    E_LP, cX2 = lp_energy(deltas, E_X, Omega)
    g, _, _ = feshbach_g(E_LP, cX2, feshbach)
    gp = triexciton_gprime(E_LP, cX2, feshbach)
    g2_b = np.empty(len(deltas))
    g2_bt = np.empty(len(deltas))
    for i in range(len(deltas)):
        dist = thermal_occupation(gamma_r * n_r / G[i], n_max)
        f = FilterSpec(filter_offset * G[i], fwhm_F)
        for out, gpi in ((g2_b, 0.0), (g2_bt, gp[i])):
            lad = LadderModel(0.0, float(g[i]), float(gpi), float(G[i]), max(dist.n_max, 2))
            out[i] = g2_zero_analytic(dist, transmission_table(lad, f, n_max=dist.n_max))
    extra = {"cX2": cX2, "gamma_LP_ueV": G, "g_ueV": g, "g_prime_ueV": gp, "g2_biexciton": g2_b}
    return Curve(deltas, g2_bt, x_label="delta_meV", extra=extra)
