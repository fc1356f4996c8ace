"""
Return levels, return periods and exceedance probabilities of a fitted tail.

The m-observation return level is the value exceeded on average once in
m observations:

    level(m) = u + sigma_hat/xi * ((m zeta_u)^xi - 1)      (xi != 0)
    level(m) = u + sigma_hat * log(m zeta_u)               (xi == 0)

It is only defined for m zeta_u >= 1; below that the level would sit under
the threshold, where the tail model has nothing to say.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Dict, List, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import BelowThreshold, InfinitePeriod, MissingHorizon, SingularInformation
from .tailfit import MIN_EXCEEDANCES, XI_ZERO, GpdFit, gpd_sf

DEFAULT_HORIZONS = (500, 1000, 2000, 5000, 10000)
_RATE_SLACK = 1e-12


class ReturnLevelPoint(NamedTuple):
    m: int
    level: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class ReturnLevelCurve:
    points: tuple

    def levels(self) -> List[float]:
        return [p.level for p in self.points]

    def horizons(self) -> List[int]:
        return [p.m for p in self.points]

    def __getitem__(self, m) -> ReturnLevelPoint:
        for p in self.points:
            if p.m == m:
                return p
        raise MissingHorizon(m)

    def to_rows(self) -> List[dict]:
        return [p._asdict() for p in self.points]


class Reason(str, enum.Enum):
    SHAPE_TOO_LARGE = "ShapeTooLarge"
    NEGATIVE_RETURN_LEVEL = "NegativeReturnLevel"
    NON_MONOTONE_RETURN_LEVELS = "NonMonotoneReturnLevels"
    TOO_FEW_EXCEEDANCES = "TooFewExceedances"


@dataclass(frozen=True)
class ValidityVerdict:
    reasons: tuple = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.reasons

    def to_dict(self) -> dict:
        return {"valid": self.valid, "reasons": [r.value for r in self.reasons]}


class ReturnPeriod(NamedTuple):
    period: float
    p: float


def _level(u, sigma_hat, xi, mz):
    # unchecked formula in terms of mz = m * zeta_u; finite differences step off mz >= 1
    log_mz = math.log(mz)
    if abs(xi) < XI_ZERO:
        return u + sigma_hat * log_mz
    return u + sigma_hat * math.expm1(xi * log_mz) / xi


def _rate_ok(fit, m):
    return m * fit.zeta_u >= 1.0 - _RATE_SLACK


def return_level(fit: GpdFit, m: int) -> float:
    """Level exceeded on average once every ``m`` observations."""
    if m < 1:
        raise ValueError("horizon m must be >= 1")
    if not _rate_ok(fit, m):
        raise BelowThreshold(f"m * zeta_u = {m * fit.zeta_u:.4g} < 1: level would fall below u")
    return _level(fit.u, fit.sigma_hat, fit.xi, max(m * fit.zeta_u, 1.0))


def _z(confidence):
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def return_level_variance(fit: GpdFit, m: int, include_rate: bool = True) -> float:
    """Delta-method variance of the return level.

    The parameter vector is (zeta_u, sigma_hat, xi).  zeta_u gets the
    binomial variance zeta_u (1 - zeta_u) / n_total and is treated as
    independent of the maximum-likelihood pair.  The gradient is taken by
    central finite differences of the level formula.
    """
    theta = np.array([fit.zeta_u, fit.sigma_hat, fit.xi])
    V = np.zeros((3, 3))
    V[1:, 1:] = fit.cov_matrix
    if include_rate:
        V[0, 0] = fit.zeta_u * (1.0 - fit.zeta_u) / fit.n_total
    grad = np.empty(3)
    for i in range(3):
        h = 1e-6 * (abs(theta[i]) if i < 2 else 1.0 + abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (_level(fit.u, up[1], up[2], m * up[0])
                   - _level(fit.u, dn[1], dn[2], m * dn[0])) / (2 * h)
    return float(max(grad @ V @ grad, 0.0))


def return_level_ci(fit: GpdFit, m: int, confidence: float = 0.95,
                    include_rate: bool = True) -> tuple:
    """Symmetric normal-approximation interval around the return level.

    The lower end is clipped at the threshold ``u``; the upper end is not
    clipped.  Raises :class:`SingularInformation` when the fit has no
    covariance matrix.
    """
    level = return_level(fit, m)
    if fit.cov is None:
        raise SingularInformation("cannot form an interval without a covariance matrix")
    half = _z(confidence) * math.sqrt(return_level_variance(fit, m, include_rate))
    return max(level - half, fit.u), level + half


def return_level_curve(fit: GpdFit, horizons: Sequence[int] = DEFAULT_HORIZONS,
                       confidence: float = 0.95) -> ReturnLevelCurve:
    points = []
    for m in horizons:
        level = return_level(fit, m)
        lo, hi = return_level_ci(fit, m, confidence)
        points.append(ReturnLevelPoint(int(m), level, lo, hi))
    return ReturnLevelCurve(tuple(points))


def _per_query_probability(fit, level):
    if level < fit.u:
        raise BelowThreshold(f"level {level} is below the threshold {fit.u}")
    return fit.zeta_u * gpd_sf(fit.sigma_hat, fit.xi, level - fit.u)


def exceedance_probability(fit: GpdFit, level: float, s: int) -> float:
    """Probability that at least one of the next ``s`` queries exceeds ``level``."""
    if s < 0:
        raise ValueError("s must be >= 0")
    p = _per_query_probability(fit, level)
    if s == 0:
        return 0.0
    if s == 1:
        return p
    if p >= 1.0:
        return 1.0
    return -math.expm1(s * math.log1p(-p))


def return_period(fit: GpdFit, level: float) -> ReturnPeriod:
    """Expected number of queries between exceedances of ``level``, with the per-query probability."""
    p = _per_query_probability(fit, level)
    if p <= 0.0:
        raise InfinitePeriod(f"level {level} is beyond the upper endpoint {fit.upper_endpoint}")
    return ReturnPeriod(1.0 / p, p)


def validate_fit(fit: GpdFit, horizons: Sequence[int] = DEFAULT_HORIZONS) -> ValidityVerdict:
    """Apply the acceptance rules for a fitted tail.

    A fit is rejected for a shape of 1 or more (infinite mean), any
    negative return level, return levels that decrease with the horizon,
    or fewer than 10 exceedances.  Horizons with m * zeta_u < 1 have no
    return level and are skipped.
    """
    horizons = list(horizons)
    if not horizons:
        raise ValueError("horizons must be non-empty")
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be strictly increasing")
    reasons = []
    if fit.xi >= 1.0:
        reasons.append(Reason.SHAPE_TOO_LARGE)
    levels = [return_level(fit, m) for m in horizons if _rate_ok(fit, m)]
    if any(lv < 0 for lv in levels):
        reasons.append(Reason.NEGATIVE_RETURN_LEVEL)
    if any(b < a for a, b in zip(levels, levels[1:])):
        reasons.append(Reason.NON_MONOTONE_RETURN_LEVELS)
    if fit.n_exceed < MIN_EXCEEDANCES:
        reasons.append(Reason.TOO_FEW_EXCEEDANCES)
    return ValidityVerdict(tuple(reasons))


def accuracy_check(curve: ReturnLevelCurve, actual_wcct: Mapping[int, float]) -> Dict[int, bool]:
    """True at m when the observed worst case lies in the closed interval [ci_low, ci_high]."""
    out = {}
    for m, actual in actual_wcct.items():
        p = curve[m]
        out[m] = p.ci_low <= actual <= p.ci_high
    return out


def write_curve_csv(curve: ReturnLevelCurve, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "level", "ci_low", "ci_high"])
        for p in curve.points:
            w.writerow([p.m, repr(p.level), repr(p.ci_low), repr(p.ci_high)])
