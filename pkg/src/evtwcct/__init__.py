"""Extreme-value analysis of convergence-time traces.

Tail fitting over a threshold, worst-case predictions with confidence
intervals, and a sequential-test baseline to compare them against.
"""
__version__ = "0.1.0"

from .baseline import (ComparisonRow, SequentialTestState, compare_to_baseline,
                       jeffreys_feed, jeffreys_required_samples, prediction_error,
                       rule_of_three, run_jeffreys)
from .diagnostics import (DiagnosticsReport, QqPoint, TailType, classify_tail, density_overlay,
                          diagnose, extrapolation_bound, qq_points)
from .errors import *  # noqa: F401,F403
from .predict import (DEFAULT_HORIZONS, ReturnLevelCurve, ValidityVerdict, accuracy_check,
                      exceedance_probability, return_level, return_level_ci, return_level_curve,
                      return_period, validate_fit)
from .tailfit import (GevParams, GpdFit, fit_gpd, gpd_cdf, gpd_loglik, gpd_to_gev, sample_gpd)
from .threshold import (MeanResidualLifePoint, ThresholdPolicy, auto_select_threshold,
                        extract_excesses, mean_residual_life, select_threshold,
                        threshold_from_sigma)
from .trace import TimingTrace, TraceSummary, load_trace, max_prefix, summarize, write_trace
from .workloads import (SettleResult, SimConfig, run_campaign, simulate, simulate_pendulum,
                        simulate_tora, synthetic_tail_trace)

