"""Levenberg-Marquardt fitting with frozen parameters and covariance errors."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..errors import InvalidArgumentError, RankDeficiencyError


@dataclass
class FitResult:
    params: np.ndarray
    std_errors: np.ndarray
    residual_norm: float
    converged: bool
    covariance: np.ndarray = field(repr=False, default=None)
    chi2_red: float = float("nan")
    nfev: int = 0


def central_jacobian(model, x, p, rel_step=1e-6):
    """Central finite-difference Jacobian d model(x, p) / d p."""
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(p.size):
        h = rel_step * max(abs(p[k]), 1.0)
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        cols.append((np.asarray(model(x, up)) - np.asarray(model(x, dn))) / (2 * h))
    return np.column_stack(cols)


def fit_least_squares(model, x, y, init, sigma=None, fixed_mask=None, jac=None,
                      absolute_sigma=True, max_nfev=2000, gtol=1e-8):
    """Weighted nonlinear least squares, minimising sum ((y - model(x, p)) / sigma)^2.

    ``model(x, p)`` returns predictions for the full parameter vector.
    ``jac(x, p)`` (optional) returns the (n_points, n_params) Jacobian;
    otherwise central differences are used. Parameters flagged in
    ``fixed_mask`` stay at their ``init`` value and get zero error.

    With ``absolute_sigma`` false the covariance is rescaled by the reduced
    chi-square, as for data whose errors are only relative.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(init, dtype=float).copy()
    if sigma is None:
        sigma = np.ones_like(y)
        absolute_sigma = False
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if np.any(~(sigma > 0)):
        raise InvalidArgumentError("fit_least_squares: sigma must be positive")
    fixed = np.zeros(p0.size, bool) if fixed_mask is None else np.asarray(fixed_mask, bool)
    free = ~fixed
    nfree = int(free.sum())
    if nfree == 0:
        raise InvalidArgumentError("fit_least_squares: all parameters fixed")
    if y.size < nfree:
        raise InvalidArgumentError("fit_least_squares: fewer points than free parameters")

    def full(q):
        p = p0.copy()
        p[free] = q
        return p

    def resid(q):
        return (y - np.asarray(model(x, full(q)), dtype=float)) / sigma

    def rjac(q):
        J = jac(x, full(q)) if jac is not None else central_jacobian(model, x, full(q))
        return -np.asarray(J, dtype=float)[:, free] / sigma[:, None]

    method = "lm" if y.size >= nfree else "trf"
    sol = least_squares(resid, p0[free], jac=rjac, method=method, xtol=1e-15,
                        ftol=1e-15, gtol=gtol, max_nfev=max_nfev, x_scale="jac")
    J = rjac(sol.x)
    # rank test on the column-scaled Jacobian so parameter units do not matter;
    # finite differences carry ~1e-10 relative noise, hence the looser floor
    norms = np.linalg.norm(J, axis=0)
    rtol = np.finfo(float).eps * max(J.shape) if jac is not None else 1e-9
    s = np.linalg.svd(J / np.where(norms > 0, norms, 1.0), compute_uv=False)
    if not np.all(np.isfinite(J)) or np.any(norms == 0) or s[-1] <= s[0] * rtol:
        raise RankDeficiencyError("fit_least_squares: Jacobian is rank deficient at the solution",
                                  partial=full(sol.x))
    cov_free = np.linalg.inv(J.T @ J)
    dof = y.size - nfree
    chi2 = float(sol.fun @ sol.fun)
    chi2_red = chi2 / dof if dof > 0 else float("nan")
    if not absolute_sigma and dof > 0:
        cov_free = cov_free * chi2_red
    cov = np.zeros((p0.size, p0.size))
    cov[np.ix_(free, free)] = cov_free
    grad = J.T @ sol.fun
    scale = max(1.0, np.sqrt(chi2)) * max(1.0, np.linalg.norm(J))
    converged = bool(sol.status > 0 and (np.linalg.norm(grad) < 1e-8 * scale or sol.status in (1, 2, 3, 4)))
    return FitResult(
        params=full(sol.x),
        std_errors=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        residual_norm=float(np.sqrt(chi2)),
        converged=converged,
        covariance=cov,
        chi2_red=chi2_red,
        nfev=int(sol.nfev),
    )
