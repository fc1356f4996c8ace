"""
Model-checking data for a fitted tail: QQ points, density overlay,
tail-type classification and the range over which extrapolation is
supported by the data.

Nothing here draws plots; every product is a list of tuples that can be
written to CSV and handed to any plotting tool.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import TooFewExceedances
from .tailfit import GpdFit, gpd_pdf, gpd_quantile

TAIL_TOL = 0.05
QQ_TOL = 0.05


class TailKind(str, enum.Enum):
    GUMBEL = "TypeI_Gumbel"
    FRECHET = "TypeII_Frechet"
    WEIBULL = "TypeIII_Weibull"


class GuaranteeNote(str, enum.Enum):
    BOUNDED_HORIZON_OK = "BoundedHorizonOK"
    LIMITED_GUARANTEES = "LimitedGuarantees"
    NO_GUARANTEE = "NoGuarantee"
    LONG_HORIZON_OK = "LongHorizonOK"


class TailType(NamedTuple):
    kind: TailKind
    guarantee_note: GuaranteeNote


class QqPoint(NamedTuple):
    empirical: float
    model: float
    quantile: float


def classify_tail(xi: float, tol: float = TAIL_TOL) -> TailType:
    """Extreme-value family of a fitted shape.

    |xi| < tol is treated as Gumbel (exponential decay, guarantees up to a
    bounded horizon); larger positive shapes are Frechet (polynomial decay,
    none at all once xi >= 1); negative shapes are Weibull with a finite
    endpoint.
    """
    if abs(xi) < tol:
        return TailType(TailKind.GUMBEL, GuaranteeNote.BOUNDED_HORIZON_OK)
    if xi > 0:
        note = GuaranteeNote.NO_GUARANTEE if xi >= 1.0 else GuaranteeNote.LIMITED_GUARANTEES
        return TailType(TailKind.FRECHET, note)
    return TailType(TailKind.WEIBULL, GuaranteeNote.LONG_HORIZON_OK)


def qq_points(fit: GpdFit, excesses: Sequence[float]) -> List[QqPoint]:
    """Empirical against model quantiles at plotting positions i/(k+1)."""
    d = np.sort(np.asarray(excesses, dtype=float))
    k = d.size
    if k < 2:
        raise TooFewExceedances("QQ plot needs at least 2 excesses")
    q = np.arange(1, k + 1) / (k + 1)
    model = fit.u + gpd_quantile(fit.sigma_hat, fit.xi, q)
    return [QqPoint(fit.u + e, float(m), float(p)) for e, m, p in zip(d.tolist(), model, q)]


def density_overlay(fit: GpdFit, excesses: Sequence[float], bins: int = 30, points: int = 200
                    ) -> Tuple[List[Tuple[float, float]], List[Tuple[float, float]]]:
    """Normalized histogram of the excesses and the fitted density on the same range.

    Returns ``(histogram, model_curve)``: histogram entries are
    ``(bin midpoint, density)`` and integrate to one; the model curve is
    sampled at ``points`` evenly spaced excesses from 0 to the largest
    observed excess (capped at the upper endpoint when xi < 0).
    """
    d = np.asarray(excesses, dtype=float)
    if d.size < 2:
        raise TooFewExceedances("density overlay needs at least 2 excesses")
    if bins < 5:
        raise ValueError("need at least 5 bins")
    top = float(d.max())
    if fit.xi < 0:
        top = min(top, fit.sigma_hat / -fit.xi)
    dens, edges = np.histogram(d, bins=bins, range=(0.0, float(d.max())), density=True)
    mids = 0.5 * (edges[:-1] + edges[1:])
    t = np.linspace(0.0, top, points)
    pdf = gpd_pdf(fit.sigma_hat, fit.xi, t)
    return list(zip(mids.tolist(), dens.tolist())), list(zip(t.tolist(), np.asarray(pdf).tolist()))


def extrapolation_bound(fit: GpdFit, qq: Sequence[QqPoint], tol: float = QQ_TOL) -> float:
    """Largest model quantile up to which the QQ points stay within ``tol`` relative deviation.

    Points are walked in quantile order and the walk stops at the first
    point whose ``|empirical - model| / model`` reaches ``tol``.  If even
    the first point fails, the threshold itself is returned.
    """
    if not qq:
        raise ValueError("qq must be non-empty")
    bound = fit.u
    for p in sorted(qq, key=lambda p: p.quantile):
        if p.model == 0 or abs(p.empirical - p.model) / abs(p.model) >= tol:
            break
        bound = p.model
    return bound


@dataclass(frozen=True)
class DiagnosticsReport:
    qq: tuple
    histogram: tuple
    model_curve: tuple
    mrl: tuple
    tail_type: TailType
    extrapolation_bound: float
    verdict: Optional[object] = None
    files: dict = field(default_factory=dict)


def diagnose(fit: GpdFit, excesses, mrl=(), bins: int = 30, verdict=None) -> DiagnosticsReport:
    qq = qq_points(fit, excesses)
    hist, curve = density_overlay(fit, excesses, bins=bins)
    return DiagnosticsReport(
        qq=tuple(qq), histogram=tuple(hist), model_curve=tuple(curve), mrl=tuple(mrl),
        tail_type=classify_tail(fit.xi), extrapolation_bound=extrapolation_bound(fit, qq),
        verdict=verdict,
    )


def write_qq_csv(qq: Sequence[QqPoint], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantile", "empirical", "model"])
        for p in qq:
            w.writerow([repr(p.quantile), repr(p.empirical), repr(p.model)])


def write_density_csv(histogram, model_curve, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "x", "density"])
        for x, y in histogram:
            w.writerow(["empirical", repr(x), repr(y)])
        for x, y in model_curve:
            w.writerow(["model", repr(x), repr(y)])
