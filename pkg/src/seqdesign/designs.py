"""Baseline treatment-allocation designs and the variance-oracle policy.

The switchback and daily-alternation families are canonical, documented
versions of the published designs they stand in for; hyperparameters (block
period, switch probability, burn-in, carryover window) are config, searched
over by the benchmark harness. Allocation policies are deterministic
functions of (history, internal parameters); randomization happens only
through the caller's policy stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ACTION_MINUS, ACTION_PLUS, History, Trajectory
from .estimators import ConditionalVarianceSpec


def switchback_sequence(horizon: int, period: int, start: int = ACTION_PLUS) -> np.ndarray:
    """Blocks of ``period`` identical actions, alternating, beginning with ``start``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if period < 1:
        raise ValueError("period must be >= 1")
    blocks = (np.arange(horizon) // period) % 2
    return np.where(blocks == 0, start, -start).astype(int)


def random_switchback(horizon: int, rng: np.random.Generator, switch_prob: float) -> np.ndarray:
    """Geometric switchback: first action uniform, then flip with probability
    ``switch_prob`` at each step."""
    if not 0.0 < switch_prob <= 1.0:
        raise ValueError("switch probability must lie in (0, 1]")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    actions = np.empty(horizon, dtype=int)
    actions[0] = ACTION_PLUS if rng.random() < 0.5 else ACTION_MINUS
    flips = rng.random(horizon - 1) < switch_prob
    for t in range(1, horizon):
        actions[t] = -actions[t - 1] if flips[t - 1] else actions[t - 1]
    return actions


def daily_alternation(n_days: int, intervals_per_day: int, pattern: str,
                      rng: np.random.Generator | None = None,
                      start: int = ACTION_PLUS) -> np.ndarray:
    """One action per day, repeated across the day's intervals.

    ``pattern="alternate"`` alternates deterministically (ABAB); ``"randomized"``
    flips a fair coin per day.
    """
    if pattern not in ("alternate", "randomized"):
        raise ValueError("pattern must be 'alternate' or 'randomized'")
    if pattern == "alternate":
        day_actions = np.where(np.arange(n_days) % 2 == 0, start, -start)
    else:
        if rng is None:
            raise ValueError("randomized pattern requires an rng")
        day_actions = np.where(rng.random(n_days) < 0.5, ACTION_PLUS, ACTION_MINUS)
    return np.repeat(day_actions.astype(int), intervals_per_day)


class FixedSwitchbackPolicy:
    """Deterministic switchback: action depends only on the step index."""

    def __init__(self, period: int, start: int = ACTION_PLUS):
        if period < 1:
            raise ValueError("period must be >= 1")
        self.period = period
        self.start = start

    def allocate(self, history: History) -> float:
        t = len(history)  # 0-based step index
        action = self.start if (t // self.period) % 2 == 0 else -self.start
        return 1.0 if action == ACTION_PLUS else 0.0


class RandomSwitchbackPolicy:
    """Geometric switchback expressed as assignment probabilities: uniform
    first action, then flip with probability ``switch_prob``."""

    def __init__(self, switch_prob: float):
        if not 0.0 < switch_prob <= 1.0:
            raise ValueError("switch probability must lie in (0, 1]")
        self.switch_prob = switch_prob

    def allocate(self, history: History) -> float:
        if len(history) == 0:
            return 0.5
        prev = int(history.actions[-1])
        return 1.0 - self.switch_prob if prev == ACTION_PLUS else self.switch_prob


class DailyAlternationPolicy:
    """Constant action within each day.

    Deterministic mode alternates day actions ABAB from ``start``; randomized
    mode tosses a fair coin at each day's first interval and then repeats the
    realized day action (read back from the history) for the rest of the day.
    """

    def __init__(self, intervals_per_day: int, randomized: bool = False, start: int = ACTION_PLUS):
        if intervals_per_day < 1:
            raise ValueError("intervals_per_day must be >= 1")
        self.intervals_per_day = intervals_per_day
        self.randomized = randomized
        self.start = start

    def allocate(self, history: History) -> float:
        t = len(history)  # 0-based step index
        day, offset = divmod(t, self.intervals_per_day)
        if not self.randomized:
            action = self.start if day % 2 == 0 else -self.start
            return 1.0 if action == ACTION_PLUS else 0.0
        if offset == 0:
            return 0.5
        day_action = int(history.actions[day * self.intervals_per_day])
        return 1.0 if day_action == ACTION_PLUS else 0.0


class NeymanOraclePolicy:
    """Allocates sigma_+ / (sigma_+ + sigma_-) at every history."""

    def __init__(self, variance_spec: ConditionalVarianceSpec):
        self.variance_spec = variance_spec

    def allocate(self, history: History) -> float:
        s_plus = self.variance_spec(history, history.pending, ACTION_PLUS)
        s_minus = self.variance_spec(history, history.pending, ACTION_MINUS)
        return s_plus / (s_plus + s_minus)


def neyman_oracle_policy(variance_spec: ConditionalVarianceSpec) -> NeymanOraclePolicy:
    return NeymanOraclePolicy(variance_spec)


@dataclass(frozen=True)
class DesignSpec:
    """A named design together with its hyperparameters and paired estimator."""

    design_id: str
    variant: str
    params: dict = field(default_factory=dict)
    estimator: str = ""


_DESIGN_ESTIMATORS = {
    "BSZ": "ht_carryover",
    "HW": "burnin_dim",
    "XCT": "ols_plugin",
    "TMDP": "ols_plugin",
    "NMDP": "ols_plugin",
    "WSY": "ols_plugin",
    "TRL": "ols_plugin",
    "NEYMAN": "ols_plugin",
}


def paired_estimator(design_id: str, env_kind: str = "linear") -> str:
    """Estimator conventionally paired with each design family.

    The daily/fixed-interval designs and TRL use the linear plug-in on linear
    environments and LSTD on the nonlinear dispatch environment.
    """
    key = design_id.upper()
    if key not in _DESIGN_ESTIMATORS:
        raise ValueError(f"unknown design {design_id!r}")
    est = _DESIGN_ESTIMATORS[key]
    if est == "ols_plugin" and env_kind == "dispatch":
        return "lstd"
    return est


def burnin_diff_in_means(traj: Trajectory, burn_in: int) -> float:
    """Difference in means after discarding ``burn_in`` steps at the start of
    every constant-action run (runs no longer than the burn-in are dropped
    entirely, including the leading one)."""
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    actions = traj.actions
    outcomes = traj.outcomes
    keep = np.zeros(len(traj), dtype=bool)
    run_start = 0
    for t in range(1, len(traj) + 1):
        if t == len(traj) or actions[t] != actions[run_start]:
            keep[run_start + burn_in: t] = True
            run_start = t
    plus = outcomes[keep & (actions == ACTION_PLUS)]
    minus = outcomes[keep & (actions == ACTION_MINUS)]
    if len(plus) == 0 or len(minus) == 0:
        raise ValueError("burn-in discarding left an empty arm")
    return float(plus.mean() - minus.mean())


def ht_carryover(traj: Trajectory, window: int, switch_prob: float) -> float:
    """Horvitz-Thompson estimate weighting steps whose last ``window + 1``
    actions are constant, with exact block probabilities under the geometric
    switchback law (uniform first action, flip probability ``switch_prob``)."""
    if window < 0:
        raise ValueError("window must be nonnegative")
    if not 0.0 < switch_prob < 1.0:
        raise ValueError("switch probability must lie strictly in (0, 1) "
                         "for Horvitz-Thompson weighting")
    actions = traj.actions
    outcomes = traj.outcomes
    total = 0.0
    for t in range(len(traj)):
        lo = max(0, t - window)
        block = actions[lo: t + 1]
        if np.all(block == block[-1]):
            p_block = 0.5 * (1.0 - switch_prob) ** (t - lo)
            total += float(block[-1]) * outcomes[t] / p_block
    return total / len(traj)
