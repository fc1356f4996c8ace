"""
Generalized Pareto tail model for threshold excesses.

Excesses over a high threshold u are modelled by

    H(t) = 1 - (1 + xi * t / sigma_hat) ** (-1 / xi),    t > 0,

with the exponential law 1 - exp(-t / sigma_hat) as the xi -> 0 limit.
Parameters are estimated by maximum likelihood with a derivative-free
simplex search, and standard errors come from the inverse of a
finite-difference observed information matrix.

All xi-dependent expressions go through ``log1p``/``expm1`` so that the
xi -> 0 limit is approached smoothly; below ``XI_ZERO`` the exponential
branch is used explicitly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import FitDiverged, OutOfSupport, SingularInformation, TooFewExceedances

XI_ZERO = 1e-8
XI_BOUNDS = (-1.0, 2.0)
MIN_EXCEEDANCES = 10
MAX_EVALUATIONS = 10_000
SIMPLEX_TOL = 1e-8


@dataclass(frozen=True)
class GpdFit:
    """Fitted tail model.

    ``cov`` is the 2x2 covariance of (sigma_hat, xi); it is ``None`` (and
    so are the standard errors) when the information matrix is singular.
    """

    u: float
    sigma_hat: float
    xi: float
    zeta_u: float
    n_total: int
    n_exceed: int
    se_sigma: Optional[float]
    se_xi: Optional[float]
    cov: Optional[tuple]
    log_lik: float

    @property
    def cov_matrix(self) -> np.ndarray:
        if self.cov is None:
            raise SingularInformation("fit carries no covariance matrix")
        return np.array(self.cov, dtype=float)

    @property
    def upper_endpoint(self) -> float:
        """Largest attainable value (``inf`` unless xi < 0)."""
        if self.xi < -XI_ZERO:
            return self.u + self.sigma_hat / -self.xi
        return math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.cov is not None:
            d["cov"] = [list(row) for row in self.cov]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GpdFit":
        cov = d.get("cov")
        if cov is not None:
            cov = tuple(tuple(float(v) for v in row) for row in cov)
        return cls(
            u=float(d["u"]),
            sigma_hat=float(d["sigma_hat"]),
            xi=float(d["xi"]),
            zeta_u=float(d["zeta_u"]),
            n_total=int(d["n_total"]),
            n_exceed=int(d["n_exceed"]),
            se_sigma=None if d.get("se_sigma") is None else float(d["se_sigma"]),
            se_xi=None if d.get("se_xi") is None else float(d["se_xi"]),
            cov=cov,
            log_lik=float(d["log_lik"]),
        )


@dataclass(frozen=True)
class GevParams:
    mu: float
    sigma: float
    xi: float
    block_size: int


def _check_support(sigma_hat, xi, t):
    t = np.asarray(t, dtype=float)
    if sigma_hat <= 0:
        raise ValueError(f"scale must be positive, got {sigma_hat}")
    if np.any(t < 0):
        raise OutOfSupport("GPD is supported on t >= 0")
    if xi < -XI_ZERO and np.any(t > sigma_hat / -xi):
        raise OutOfSupport(f"t beyond upper endpoint {sigma_hat / -xi}")
    return t


def gpd_cdf(sigma_hat: float, xi: float, t):
    """Distribution function H(t) of the excess over threshold.

    Accepts scalars or arrays.  Raises :class:`OutOfSupport` for negative
    ``t`` or for ``t`` past the upper endpoint when ``xi < 0``; the
    endpoint itself maps to 1.
    """
    t = _check_support(sigma_hat, xi, t)
    z = t / sigma_hat
    if abs(xi) < XI_ZERO:
        out = -np.expm1(-z)
    else:
        with np.errstate(divide="ignore"):
            out = -np.expm1(-np.log1p(xi * z) / xi)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def gpd_sf(sigma_hat: float, xi: float, t):
    """Survival 1 - H(t); zero past a finite endpoint instead of raising."""
    t = np.asarray(t, dtype=float)
    z = np.maximum(t, 0.0) / sigma_hat
    if abs(xi) < XI_ZERO:
        out = np.exp(-z)
    else:
        arg = xi * z
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(arg > -1.0, np.exp(-np.log1p(np.maximum(arg, -1.0)) / xi), 0.0)
    return float(out) if out.ndim == 0 else out


def gpd_pdf(sigma_hat: float, xi: float, t):
    """Density h(t) = (1/sigma_hat) (1 + xi t/sigma_hat)^(-1/xi - 1)."""
    t = _check_support(sigma_hat, xi, t)
    z = t / sigma_hat
    if abs(xi) < XI_ZERO:
        out = np.exp(-z) / sigma_hat
    else:
        with np.errstate(divide="ignore"):
            out = np.exp(-(1.0 / xi + 1.0) * np.log1p(xi * z)) / sigma_hat
    return float(out) if out.ndim == 0 else out


def gpd_quantile(sigma_hat: float, xi: float, q):
    """Inverse distribution function H^-1(q) for q in [0, 1)."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q >= 1)):
        raise ValueError("quantile level must lie in [0, 1)")
    log_tail = np.log1p(-q)
    if abs(xi) < XI_ZERO:
        out = -sigma_hat * log_tail
    else:
        out = sigma_hat * np.expm1(-xi * log_tail) / xi
    return float(out) if out.ndim == 0 else out


def gpd_loglik(excesses, sigma_hat: float, xi: float) -> float:
    """Log-likelihood of excesses under GPD(sigma_hat, xi).

    ``-k log sigma_hat - (1 + 1/xi) sum log(1 + xi d/sigma_hat)``, and
    ``-k log sigma_hat - sum d / sigma_hat`` in the exponential limit.
    """
    d = np.asarray(excesses, dtype=float)
    if sigma_hat <= 0:
        raise OutOfSupport("scale must be positive")
    if np.any(d <= 0):
        raise OutOfSupport("excesses must be strictly positive")
    z = d / sigma_hat
    k = d.size
    if abs(xi) < XI_ZERO:
        return float(-k * math.log(sigma_hat) - z.sum())
    arg = xi * z
    if np.any(arg <= -1.0):
        raise OutOfSupport("an excess lies beyond the upper endpoint")
    return float(-k * math.log(sigma_hat) - (1.0 + 1.0 / xi) * np.log1p(arg).sum())


def _nll_unit(theta, z):
    """Negative log-likelihood on mean-normalized excesses; +inf off-support."""
    s, xi = theta
    if s <= 0 or not XI_BOUNDS[0] < xi < XI_BOUNDS[1]:
        return math.inf
    w = z / s
    if abs(xi) < XI_ZERO:
        return z.size * math.log(s) + w.sum()
    arg = xi * w
    if arg.min() <= -1.0:
        return math.inf
    return z.size * math.log(s) + (1.0 + 1.0 / xi) * np.log1p(arg).sum()


def _moment_start(z):
    mean = z.mean()
    var = z.var(ddof=1)
    if var <= 0 or mean * mean / var > 1e3:
        return np.array([mean, 0.1])
    ratio = mean * mean / var
    xi0 = 0.5 * (1.0 - ratio)
    s0 = 0.5 * mean * (ratio + 1.0)
    xi0 = min(max(xi0, XI_BOUNDS[0] + 0.05), XI_BOUNDS[1] - 0.05)
    if not math.isfinite(_nll_unit((s0, xi0), z)):
        return np.array([mean, 0.1])
    return np.array([s0, xi0])


def _hessian(f, theta):
    """Central-difference Hessian with step 1e-4 * (1 + |theta_i|)."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    h = 1e-4 * (1.0 + np.abs(theta))
    H = np.empty((n, n))
    f0 = f(theta)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(theta + ei) - 2.0 * f0 + f(theta - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(theta + ei + ej) - f(theta + ei - ej)
                - f(theta - ei + ej) + f(theta - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return H


def fit_gpd(excesses: Sequence[float], u: float, n_total: int) -> GpdFit:
    """Maximum-likelihood GPD fit to threshold excesses.

    The search runs on excesses divided by their mean (so the simplex
    tolerance is scale-free) and is started at the method-of-moments
    estimate.  xi is confined to (-1, 2).  If the observed information
    is not invertible the fit is still returned, with ``cov`` and the
    standard errors set to ``None`` and a :class:`RuntimeWarning`.

    Raises
    ------
    TooFewExceedances
        Fewer than 10 excesses.
    FitDiverged
        The simplex did not contract within 10,000 evaluations.
    """
    d = np.asarray(excesses, dtype=float)
    if d.size < MIN_EXCEEDANCES:
        raise TooFewExceedances(f"need >= {MIN_EXCEEDANCES} excesses, got {d.size}")
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise ValueError("excesses must be finite and strictly positive")
    if n_total < d.size:
        raise ValueError("n_total cannot be smaller than the number of excesses")

    scale = float(d.mean())
    z = d / scale
    res = minimize(
        _nll_unit, _moment_start(z), args=(z,), method="Nelder-Mead",
        options={"xatol": SIMPLEX_TOL, "fatol": math.inf,
                 "maxfev": MAX_EVALUATIONS, "maxiter": MAX_EVALUATIONS},
    )
    if res.status != 0 or not np.isfinite(res.fun):
        raise FitDiverged(f"simplex search failed: {res.message}")

    sigma_hat = float(res.x[0]) * scale
    xi = float(res.x[1])
    if abs(xi) < XI_ZERO:
        xi = 0.0
    theta = np.array([sigma_hat, xi])

    def nll(t):
        try:
            return -gpd_loglik(d, t[0], t[1])
        except OutOfSupport:
            return math.inf

    cov = se_sigma = se_xi = None
    H = _hessian(nll, theta)
    if np.all(np.isfinite(H)):
        try:
            V = np.linalg.inv(H)
        except np.linalg.LinAlgError:
            V = None
        if V is not None and V[0, 0] > 0 and V[1, 1] > 0 and np.linalg.det(H) > 0:
            V = 0.5 * (V + V.T)
            cov = tuple(tuple(float(v) for v in row) for row in V)
            se_sigma = math.sqrt(V[0, 0])
            se_xi = math.sqrt(V[1, 1])
    if cov is None:
        warnings.warn("observed information is singular; standard errors unavailable",
                      RuntimeWarning, stacklevel=2)

    return GpdFit(
        u=float(u),
        sigma_hat=sigma_hat,
        xi=xi,
        zeta_u=d.size / n_total,
        n_total=int(n_total),
        n_exceed=int(d.size),
        se_sigma=se_sigma,
        se_xi=se_xi,
        cov=cov,
        log_lik=gpd_loglik(d, sigma_hat, xi),
    )


def gpd_to_gev(fit: GpdFit, block_size: int) -> GevParams:
    """Equivalent GEV parameters for maxima of blocks of ``block_size`` observations.

    Uses sigma = sigma_hat (n zeta)^xi and mu = u - sigma ((n zeta)^-xi - 1)/xi,
    which satisfies sigma_hat = sigma + xi (u - mu).
    """
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    log_nz = math.log(block_size * fit.zeta_u)
    xi = fit.xi
    if abs(xi) < XI_ZERO:
        sigma = fit.sigma_hat
        mu = fit.u + fit.sigma_hat * log_nz
    else:
        sigma = fit.sigma_hat * math.exp(xi * log_nz)
        mu = fit.u - sigma * math.expm1(-xi * log_nz) / xi
    return GevParams(mu=mu, sigma=sigma, xi=xi, block_size=int(block_size))


def sample_gpd(sigma_hat: float, xi: float, n: int, seed) -> np.ndarray:
    """Inverse-CDF draws from GPD(sigma_hat, xi); deterministic for a given seed."""
    if sigma_hat <= 0:
        raise ValueError("sigma_hat must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    U = np.random.default_rng(seed).random(n)
    return np.asarray(gpd_quantile(sigma_hat, xi, U))


def format_estimate(value: float, se: Optional[float], digits: int = 1) -> str:
    """``value (+/- se)`` at a fixed number of decimals, e.g. ``0.4 (+/- 0.1)``."""
    if se is None:
        return f"{value:.{digits}f} (+/- n/a)"
    return f"{value:.{digits}f} (+/- {se:.{digits}f})"
