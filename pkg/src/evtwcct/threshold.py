"""
Threshold selection for peaks-over-threshold fitting.

The default protocol starts the threshold at mean + 2 std of the trace,
fits the tail, and while the fit is unacceptable lowers the threshold
geometrically (u <- u * (1 - rate), rate = 0.05% by default) until it
would drop below mean + 1 std.  Some analyses start at 3 std instead;
``start`` is a parameter.

Note on tail mass: under a normal model a one-sided mean + 2 std cut
keeps about 2.28% of the samples (4.55% is the two-sided figure).  The
cut here is one-sided and strict (x > u).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateTrace, FitDiverged, NoValidThreshold
from .predict import Reason, ValidityVerdict, validate_fit
from .tailfit import MIN_EXCEEDANCES, GpdFit, fit_gpd
from .trace import TimingTrace, TraceSummary, summarize

FIXED, SIGMA, AUTO = "fixed", "sigma", "auto"


@dataclass(frozen=True)
class ThresholdPolicy:
    """How to choose the threshold.

    ``kind`` is ``"fixed"`` (use ``u``), ``"sigma"`` (mean + k std) or
    ``"auto"`` (geometric scan from ``start`` std down to ``floor`` std).
    """

    kind: str = AUTO
    u: Optional[float] = None
    k: float = 2.0
    start: float = 2.0
    floor: float = 1.0
    rate: float = 0.0005

    def __post_init__(self):
        if self.kind not in (FIXED, SIGMA, AUTO):
            raise ValueError(f"unknown threshold policy {self.kind!r}")
        if self.kind == FIXED and (self.u is None or not math.isfinite(self.u)):
            raise ValueError("fixed policy needs a finite threshold u")
        if self.kind == SIGMA and not self.k > 0:
            raise ValueError("sigma multiple k must be positive")
        if not self.start > self.floor > 0:
            raise ValueError("need start > floor > 0")
        if not 0 < self.rate <= 0.01:
            raise ValueError("decrement rate must lie in (0, 0.01]")

    @classmethod
    def parse(cls, text: str) -> "ThresholdPolicy":
        """Parse ``auto``, ``fixed:<u>`` or ``sigma:<k>``."""
        text = text.strip()
        if text == AUTO:
            return cls(AUTO)
        kind, sep, value = text.partition(":")
        if sep and kind in (FIXED, SIGMA):
            try:
                number = float(value)
            except ValueError:
                raise ValueError(f"bad threshold value in {text!r}") from None
            return cls(FIXED, u=number) if kind == FIXED else cls(SIGMA, k=number)
        raise ValueError(f"threshold must be auto, fixed:<u> or sigma:<k>, got {text!r}")

    def describe(self) -> str:
        if self.kind == FIXED:
            return f"fixed:{self.u!r}"
        if self.kind == SIGMA:
            return f"sigma:{self.k!r}"
        return AUTO


class MeanResidualLifePoint(NamedTuple):
    u: float
    mean_excess: float
    count: int
    ci_halfwidth: float


class ScanStep(NamedTuple):
    """One threshold tried during a scan and what happened there."""

    u: float
    n_exceed: int
    valid: bool
    reasons: tuple


def threshold_from_sigma(summary: TraceSummary, k: float) -> float:
    if not k > 0:
        raise ValueError("k must be positive")
    if summary.std_dev == 0:
        raise DegenerateTrace("constant trace has no tail")
    return summary.mean + k * summary.std_dev


def extract_excesses(trace, u: float) -> np.ndarray:
    """Excesses x - u of the samples strictly above ``u``, in trace order."""
    x = trace.samples if isinstance(trace, TimingTrace) else np.asarray(trace, dtype=float)
    return x[x > u] - u


def mean_residual_life(trace, u_grid: Sequence[float], confidence_z: float = 1.959963984540054
                       ) -> List[MeanResidualLifePoint]:
    """Mean excess over each grid threshold with a normal-approximation 95% half-width.

    Grid points with fewer than two exceedances are left out.
    """
    grid = np.asarray(u_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("u_grid must be strictly increasing")
    out = []
    for u in grid.tolist():
        d = extract_excesses(trace, u)
        if d.size < 2:
            continue
        half = confidence_z * float(d.std(ddof=1)) / math.sqrt(d.size)
        out.append(MeanResidualLifePoint(u, float(d.mean()), int(d.size), half))
    return out


def write_mrl_csv(points: Sequence[MeanResidualLifePoint], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MeanResidualLifePoint._fields)
        for p in points:
            w.writerow([repr(p.u), repr(p.mean_excess), p.count, repr(p.ci_halfwidth)])


def fit_at(trace: TimingTrace, u: float) -> GpdFit:
    """Fit the tail above a given threshold."""
    return fit_gpd(extract_excesses(trace, u), u, len(trace))


def _try_fit(trace, u, validator):
    d = extract_excesses(trace, u)
    if d.size < MIN_EXCEEDANCES:
        return None, ScanStep(u, int(d.size), False, (Reason.TOO_FEW_EXCEEDANCES.value,))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_gpd(d, u, len(trace))
    except FitDiverged as exc:
        return None, ScanStep(u, int(d.size), False, (f"FitDiverged: {exc}",))
    verdict = validator(fit)
    reasons = tuple(getattr(r, "value", r) for r in verdict.reasons)
    if fit.cov is None:
        # no covariance means no confidence intervals downstream
        reasons += ("SingularInformation",)
    return fit, ScanStep(u, int(d.size), not reasons, reasons)


def auto_select_threshold(
    trace: TimingTrace,
    policy: ThresholdPolicy = ThresholdPolicy(),
    validator: Optional[Callable[[GpdFit], ValidityVerdict]] = None,
    trail: Optional[list] = None,
):
    """Scan thresholds downward until the tail fit passes ``validator``.

    Returns ``(u, fit)``.  Every threshold tried is appended to ``trail``
    (when given) as a :class:`ScanStep`.  Raises :class:`NoValidThreshold`
    once the next threshold would fall below mean + ``floor`` std; the
    exception carries the full trail.
    """
    if policy.kind != AUTO:
        raise ValueError("auto_select_threshold needs an auto policy")
    validator = validator or validate_fit
    steps = trail if trail is not None else []
    summary = summarize(trace)
    u = threshold_from_sigma(summary, policy.start)
    lowest = threshold_from_sigma(summary, policy.floor)
    while u >= lowest:
        fit, step = _try_fit(trace, u, validator)
        steps.append(step)
        if step.valid:
            return u, fit
        u *= 1.0 - policy.rate
    raise NoValidThreshold(
        f"no valid tail fit between mean+{policy.floor}sd and mean+{policy.start}sd "
        f"after {len(steps)} thresholds", steps)


def select_threshold(trace: TimingTrace, policy: ThresholdPolicy,
                     validator=None, trail: Optional[list] = None):
    """Apply any policy; fixed and sigma policies fit once and must validate."""
    if policy.kind == AUTO:
        return auto_select_threshold(trace, policy, validator, trail)
    validator = validator or validate_fit
    if policy.kind == FIXED:
        u = float(policy.u)
    else:
        u = threshold_from_sigma(summarize(trace), policy.k)
    fit, step = _try_fit(trace, u, validator)
    if trail is not None:
        trail.append(step)
    if not step.valid:
        raise NoValidThreshold(f"fit at u={u:.6g} is not valid: {', '.join(step.reasons)}", [step])
    return u, fit
