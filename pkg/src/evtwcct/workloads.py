"""
Deterministic generators of convergence-time traces.

Two closed-loop systems are simulated with fixed-step explicit Euler and
a zero-order-hold random disturbance:

* inverted pendulum: theta' = omega, omega' = sin(theta) - (u + d) cos(theta)
* TORA: x0' = x1, x1' = -x0 + 0.1 sin(x2) + d, x2' = x3, x3' = u

The convergence time of a run is its settle time: the earliest simulated
time after which the state stays inside the settle box until the end of
the horizon.  The default controllers are linear state feedback
u = gains . x; any callable mapping a (dim, n) state batch to n controls
can be plugged in instead.

Runs are integrated in vectorized batches.  Every random quantity of a
run comes from its own generator seeded by ``SimConfig.seed``, so a run
gives the same result alone, inside a campaign, or in any chunking of a
campaign.

``synthetic_tail_trace`` produces traces whose tail above a known
threshold is exactly generalized Pareto, for parameter-recovery checks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import AllRunsFailed, NumericBlowup
from .tailfit import gpd_quantile, gpd_sf
from .trace import TimingTrace

BLOWUP = 1e6

PENDULUM_GAINS = (4.0, 2.0)
# LQR on the linearization (Q = I, R = 3), rounded; settles every corner of the
# initial box without disturbance in roughly 100 time units
TORA_GAINS = (0.4106, 0.7057, -0.1227, -0.4988)


@dataclass(frozen=True)
class SimConfig:
    system: str
    horizon: float
    dt: float
    disturbance_range: float
    disturbance_hold: float
    settle_box: tuple
    init_ranges: tuple
    seed: int
    controller_gains: tuple
    initial_state: Optional[tuple] = None

    def __post_init__(self):
        if self.system not in _SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        dim = _SYSTEMS[self.system][1]
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be at least one step")
        if not self.disturbance_hold >= self.dt:
            raise ValueError("disturbance hold must be at least one step")
        if self.disturbance_range < 0:
            raise ValueError("disturbance range must be non-negative")
        if len(self.settle_box) != dim or any(not w > 0 for w in self.settle_box):
            raise ValueError(f"settle box needs {dim} positive half-widths")
        if len(self.init_ranges) != dim or any(lo > hi for lo, hi in self.init_ranges):
            raise ValueError(f"init ranges need {dim} (lo, hi) pairs")
        if len(self.controller_gains) != dim:
            raise ValueError(f"controller needs {dim} gains")
        if self.initial_state is not None and len(self.initial_state) != dim:
            raise ValueError(f"initial state needs {dim} components")

    @classmethod
    def pendulum(cls, seed: int = 0, **overrides) -> "SimConfig":
        base = cls(
            system="pendulum", horizon=30.0, dt=0.02,
            disturbance_range=0.1, disturbance_hold=0.1,
            settle_box=(0.05, 0.05), init_ranges=((-1.0, 1.0), (-1.0, 1.0)),
            seed=seed, controller_gains=PENDULUM_GAINS,
        )
        return replace(base, **overrides)

    @classmethod
    def tora(cls, seed: int = 0, **overrides) -> "SimConfig":
        base = cls(
            system="tora", horizon=300.0, dt=0.02,
            disturbance_range=0.01, disturbance_hold=0.1,
            settle_box=(0.1, 0.1, 0.1, 0.1),
            init_ranges=((-1.0, 1.0), (-1.0, 1.0), (-0.5, 0.5), (-0.5, 0.5)),
            seed=seed, controller_gains=TORA_GAINS,
        )
        return replace(base, **overrides)

    @classmethod
    def default(cls, system: str, seed: int = 0, **overrides) -> "SimConfig":
        if system == "pendulum":
            return cls.pendulum(seed, **overrides)
        if system == "tora":
            return cls.tora(seed, **overrides)
        raise ValueError(f"unknown system {system!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["settle_box"] = tuple(d["settle_box"])
        d["init_ranges"] = tuple(tuple(r) for r in d["init_ranges"])
        d["controller_gains"] = tuple(d["controller_gains"])
        if d.get("initial_state") is not None:
            d["initial_state"] = tuple(d["initial_state"])
        return cls(**d)


class SettleResult(NamedTuple):
    settle_time: Optional[float]
    trajectory_length: int
    trajectory: Optional[np.ndarray] = None

    @property
    def settled(self) -> bool:
        return self.settle_time is not None


def _pendulum_rhs(x, u, d):
    theta, omega = x
    return np.array([omega, np.sin(theta) - (u + d) * np.cos(theta)])


def _tora_rhs(x, u, d):
    return np.array([x[1], -x[0] + 0.1 * np.sin(x[2]) + d, x[3], u])


_SYSTEMS = {"pendulum": (_pendulum_rhs, 2), "tora": (_tora_rhs, 4)}


def linear_controller(gains: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """u = sum_i gains[i] * x[i], evaluated elementwise in a fixed order."""
    g = tuple(float(v) for v in gains)

    def control(x):
        u = g[0] * x[0]
        for gi, xi in zip(g[1:], x[1:]):
            u = u + gi * xi
        return u
    return control


def _hold_index(config):
    k = np.arange(config.n_steps)
    return np.floor(k * config.dt / config.disturbance_hold + 1e-9).astype(int)


def _draw_run(config, n_holds):
    rng = np.random.default_rng(config.seed)
    lo = np.array([r[0] for r in config.init_ranges])
    hi = np.array([r[1] for r in config.init_ranges])
    x0 = rng.uniform(lo, hi)
    r = config.disturbance_range
    d = rng.uniform(-r, r, n_holds) if r > 0 else np.zeros(n_holds)
    if config.initial_state is not None:
        x0 = np.array(config.initial_state, dtype=float)
    return x0, d


def _simulate_batch(configs: Sequence[SimConfig], controller=None, keep_trajectory=False):
    """Integrate runs sharing one system/step/horizon; returns (settle index or -1, blown, traj)."""
    first = configs[0]
    rhs, dim = _SYSTEMS[first.system]
    shared = ("system", "horizon", "dt", "disturbance_hold", "settle_box")
    for c in configs[1:]:
        if any(getattr(c, f) != getattr(first, f) for f in shared):
            raise ValueError("batched runs must share system, horizon, dt, hold and settle box")
    control = controller or linear_controller(first.controller_gains)
    n_steps = first.n_steps
    hold = _hold_index(first)
    n_holds = int(hold[-1]) + 1

    draws = [_draw_run(c, n_holds) for c in configs]
    X = np.stack([x0 for x0, _ in draws], axis=1)
    D = np.stack([d for _, d in draws], axis=1)
    box = np.array(first.settle_box, dtype=float)[:, None]
    n = len(configs)
    last_out = np.full(n, -1)
    blown = np.zeros(n, dtype=bool)
    traj = np.empty((n_steps + 1, dim, n)) if keep_trajectory else None

    for k in range(n_steps + 1):
        big = np.any(np.abs(X) > BLOWUP, axis=0) | ~np.all(np.isfinite(X), axis=0)
        if big.any():
            blown |= big
            X[:, big] = 0.0
        last_out[np.any(np.abs(X) > box, axis=0)] = k
        if traj is not None:
            traj[k] = X
        if k == n_steps:
            break
        X = X + first.dt * rhs(X, control(X), D[hold[k]])

    settle = np.where(last_out + 1 <= n_steps, last_out + 1, -1)
    settle[blown] = -1
    return settle, blown, traj


def _result(config, settle_index, traj=None):
    if settle_index < 0:
        return SettleResult(None, config.n_steps, traj)
    return SettleResult(settle_index * config.dt, config.n_steps, traj)


def simulate(config: SimConfig, controller=None, keep_trajectory: bool = False) -> SettleResult:
    """Simulate one run of ``config.system``.

    Raises :class:`NumericBlowup` if any state component exceeds 1e6.
    ``keep_trajectory`` stores the (steps + 1, dim) state history.
    """
    settle, blown, traj = _simulate_batch([config], controller, keep_trajectory)
    if blown[0]:
        raise NumericBlowup(f"{config.system} run with seed {config.seed} diverged")
    return _result(config, int(settle[0]), None if traj is None else traj[:, :, 0])


def simulate_pendulum(config: SimConfig, controller=None, keep_trajectory: bool = False) -> SettleResult:
    if config.system != "pendulum":
        raise ValueError("config is not a pendulum config")
    return simulate(config, controller, keep_trajectory)


def simulate_tora(config: SimConfig, controller=None, keep_trajectory: bool = False) -> SettleResult:
    if config.system != "tora":
        raise ValueError("config is not a tora config")
    return simulate(config, controller, keep_trajectory)


def run_seed(base_seed: int, index: int) -> int:
    """Seed of run ``index`` in a campaign; a pure function of its arguments."""
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def run_campaign(system: str, n_runs: int, base_seed: int, template: Optional[SimConfig] = None,
                 controller=None, chunk_size: int = 2000, workers: int = 1) -> TimingTrace:
    """Run ``n_runs`` seeded simulations and collect settle times in run order.

    Runs that never settle (or blow up) are left out of the trace; their
    indices are listed in ``trace.meta``.  The result does not depend on
    ``chunk_size`` or ``workers``.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    template = template or SimConfig.default(system)
    if template.system != system:
        raise ValueError("template system does not match")
    configs = [replace(template, seed=run_seed(base_seed, i)) for i in range(n_runs)]
    chunks = [configs[i:i + chunk_size] for i in range(0, n_runs, chunk_size)]

    def work(chunk):
        return _simulate_batch(chunk, controller)[:2]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    settle = np.concatenate([p[0] for p in parts])
    blown = np.concatenate([p[1] for p in parts])

    ok = settle >= 0
    if not ok.any():
        raise AllRunsFailed(f"none of {n_runs} {system} runs settled")
    times = settle[ok] * template.dt
    failed = np.flatnonzero(~ok)
    meta = {
        "system": system,
        "n_runs": n_runs,
        "base_seed": base_seed,
        "failed_runs": int(failed.size),
        "failed_indices": failed.tolist(),
        "blowup_indices": np.flatnonzero(blown).tolist(),
        "config": template.to_dict(),
    }
    return TimingTrace(times, unit="time units", source=f"{system} campaign seed={base_seed}",
                       meta=meta)


class TailTruth(NamedTuple):
    """Ground truth of a synthetic trace: exact GPD(sigma_hat, xi) above u with rate zeta_u."""

    u: float
    sigma_hat: float
    xi: float
    zeta_u: float

    def at(self, threshold: float) -> "TailTruth":
        """Equivalent parameters for a higher threshold (threshold stability)."""
        if threshold < self.u:
            raise ValueError("tail is only exact above the construction threshold")
        t = threshold - self.u
        return TailTruth(threshold, self.sigma_hat + self.xi * t, self.xi,
                         self.zeta_u * float(gpd_sf(self.sigma_hat, self.xi, t)))

    @property
    def upper_endpoint(self) -> float:
        return self.u + self.sigma_hat / -self.xi if self.xi < 0 else math.inf


def synthetic_tail_trace(kind: str, body_scale: float = 1.0, n: int = 10_000, seed: int = 0,
                         xi: Optional[float] = None, tail_fraction: float = 0.3):
    """Trace with a uniform body on [0, body_scale] and an exact GPD tail above it.

    ``kind`` is ``"gumbel_tail"`` (xi = 0), ``"frechet_tail"`` (xi > 0,
    default 0.2) or ``"weibull_tail"`` (xi < 0, default -0.3).  The tail
    scale equals ``body_scale``.  Returns ``(trace, TailTruth)``.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    if kind == "gumbel_tail":
        xi = 0.0
    elif kind == "frechet_tail":
        xi = 0.2 if xi is None else xi
        if not xi > 0:
            raise ValueError("frechet tail needs xi > 0")
    elif kind == "weibull_tail":
        xi = -0.3 if xi is None else xi
        if not xi < 0:
            raise ValueError("weibull tail needs xi < 0")
    else:
        raise ValueError(f"unknown tail kind {kind!r}")
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    in_tail = rng.random(n) < tail_fraction
    body = body_scale * rng.random(n)
    tail = body_scale + gpd_quantile(body_scale, xi, rng.random(n))
    samples = np.where(in_tail, tail, body)
    truth = TailTruth(float(body_scale), float(body_scale), float(xi), float(tail_fraction))
    trace = TimingTrace(samples, unit="", source=f"synthetic {kind} seed={seed}",
                        meta={"kind": kind, "truth": truth._asdict()})
    return trace, truth
