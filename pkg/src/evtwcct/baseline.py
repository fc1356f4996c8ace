"""
Sequential Bayes-factor baseline and the GEV-vs-baseline error metric.

The Jeffreys monitor accepts the running maximum as the worst case once
it has seen K consecutive samples that do not exceed it, with

    K = ceil(-log2(B) / log2(theta))

for Bayes factor B and confidence theta.  B = 100, theta = 0.95 gives
K = 90.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from .errors import (AlreadyAccepted, InvalidBayesFactor, InvalidTheta, NeverAccepted,
                     TooFewObservations)
from .predict import DEFAULT_HORIZONS, return_level
from .threshold import ThresholdPolicy, select_threshold
from .trace import TimingTrace, max_prefix

ERROR_CLAMP = 9.99


@dataclass(frozen=True)
class SequentialTestState:
    K: int
    running_max: float = -math.inf
    consec: int = 0
    samples_seen: int = 0
    accepted: bool = False
    b: Optional[int] = None
    T_b: Optional[float] = None


def jeffreys_required_samples(B: float, theta: float) -> int:
    """Smallest K with K >= -log2(B) / log2(theta)."""
    if not 0.0 < theta < 1.0:
        raise InvalidTheta(f"theta must lie in (0, 1), got {theta}")
    if not B >= 1.0 or not math.isfinite(B):
        raise InvalidBayesFactor(f"Bayes factor must be >= 1, got {B}")
    ratio = -math.log2(B) / math.log2(theta)
    # guard against ratios like 90.00000000000001 from rounding in log2
    return max(0, math.ceil(ratio - 1e-9))


def jeffreys_feed(state: SequentialTestState, sample: float) -> SequentialTestState:
    """Consume one sample; a new record resets the success counter."""
    if state.accepted:
        raise AlreadyAccepted(f"monitor already accepted at b={state.b}")
    seen = state.samples_seen + 1
    if seen == 1 or sample > state.running_max:
        running, consec = float(sample), 0
    else:
        running, consec = state.running_max, state.consec + 1
    new = replace(state, running_max=running, consec=consec, samples_seen=seen)
    if consec == state.K:
        new = replace(new, accepted=True, b=seen, T_b=running)
    return new


def run_jeffreys(samples: Iterable[float], K: int) -> SequentialTestState:
    """Feed samples in order until acceptance or exhaustion."""
    state = SequentialTestState(K=K)
    for x in samples:
        state = jeffreys_feed(state, x)
        if state.accepted:
            break
    return state


def rule_of_three(K: int) -> tuple:
    """95% upper bound 3/K on the failure probability after K clean observations."""
    if K < 30:
        raise TooFewObservations(f"rule of three needs K >= 30, got {K}")
    return 0.0, 3.0 / K


def prediction_error(rl_n: float, t_n: float, t_b: float) -> float:
    """(RL_n - T_n) / (T_n - T_b), clamped to +/-9.99.

    -1 means the tail model did as badly as the baseline (which predicts
    T_b); values in (-1, 1) mean it did better.  A zero denominator gives
    the clamp value with the numerator's sign, negative when that is zero.
    """
    num = rl_n - t_n
    den = t_n - t_b
    if den == 0:
        return ERROR_CLAMP if num > 0 else -ERROR_CLAMP
    return max(-ERROR_CLAMP, min(ERROR_CLAMP, num / den))


@dataclass(frozen=True)
class ComparisonRow:
    """Baseline acceptance, tail fit on the accepted prefix, and per-horizon errors."""

    label: str
    n: int
    mean: float
    b: int
    T_b: float
    u: float
    sigma_hat: float
    xi: float
    horizons: tuple
    T: tuple
    RL: tuple
    error: tuple

    def header(self) -> List[str]:
        cols = ["dataset", "n", "mean", "b", "T_b", "u", "sigma_hat", "xi"]
        cols += [f"T_{m}" for m in self.horizons]
        cols += [f"RL_{m}" for m in self.horizons]
        cols += [f"Error_{m}" for m in self.horizons]
        return cols

    def values(self) -> list:
        def fmt(v):
            return "" if v is None else repr(v)
        row = [self.label, self.n, repr(self.mean), self.b, repr(self.T_b),
               repr(self.u), repr(self.sigma_hat), repr(self.xi)]
        row += [fmt(v) for v in self.T]
        row += [fmt(v) for v in self.RL]
        row += [fmt(v) for v in self.error]
        return row


def compare_to_baseline(
    trace: TimingTrace,
    horizons: Sequence[int] = DEFAULT_HORIZONS[1:],
    bayes_factor: float = 100.0,
    confidence: float = 0.95,
    policy: ThresholdPolicy = ThresholdPolicy(),
    label: str = "",
    trail: Optional[list] = None,
) -> ComparisonRow:
    """Run the monitor, fit the tail on the first b samples only, and score both.

    ``T_m`` is the observed maximum of the first m samples.  Horizons past
    the end of the trace get ``None`` for T and Error.
    """
    K = jeffreys_required_samples(bayes_factor, confidence)
    state = run_jeffreys(trace, K)
    if not state.accepted:
        raise NeverAccepted(f"monitor needs {K} consecutive non-records; never reached "
                            f"in {len(trace)} samples")
    prefix = trace.head(state.b)
    u, fit = select_threshold(prefix, policy, trail=trail)
    T, RL, err = [], [], []
    for m in horizons:
        rl = return_level(fit, m)
        RL.append(rl)
        if m <= len(trace):
            t_m = max_prefix(trace, m)
            T.append(t_m)
            err.append(prediction_error(rl, t_m, state.T_b))
        else:
            T.append(None)
            err.append(None)
    return ComparisonRow(
        label=label, n=len(trace), mean=float(trace.samples.mean()), b=state.b, T_b=state.T_b,
        u=u, sigma_hat=fit.sigma_hat, xi=fit.xi, horizons=tuple(horizons),
        T=tuple(T), RL=tuple(RL), error=tuple(err),
    )


def write_comparison_csv(rows: Sequence[ComparisonRow], path) -> None:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(rows[0].header())
        for r in rows:
            w.writerow(r.values())

