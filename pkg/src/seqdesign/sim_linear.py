"""Synthetic linear-Gaussian environment.

Days are i.i.d.; within a day of M intervals, a two-dimensional observation
evolves linearly with Gaussian noise and the outcome is a linear function of
observation and action. Four named parameter settings ("i".."iv") vary the
noise scales and transition structure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ACTIONS
from .estimators import LinearModelParams, ate_plugin

OBS_DIM = 2

_SETTINGS = {
    "i": dict(reward_obs=(0.6, 0.2), trans_matrix=((0.5, 0.1), (0.0, 0.6)), sigma=0.2),
    "ii": dict(reward_obs=(0.6, 0.2), trans_matrix=((0.6, 0.2), (0.5, 0.6)), sigma=0.3),
    "iii": dict(reward_obs=(0.6, 0.2), trans_matrix=((0.5, 0.1), (0.0, 0.6)), sigma=0.3),
    "iv": dict(reward_obs=(0.3, 0.1), trans_matrix=((0.5, 0.1), (0.0, 0.6)), sigma=0.3),
}


@dataclass(frozen=True)
class LinearEnvConfig:
    n_days: int
    intervals_per_day: int
    params: LinearModelParams
    sigma_y: float
    sigma_o: float
    setting: str = "custom"

    def __post_init__(self):
        if self.sigma_y <= 0 or self.sigma_o <= 0:
            raise ValueError("noise scales must be strictly positive")
        if self.params.obs_dim != OBS_DIM:
            raise ValueError("environment observations are two-dimensional")
        if self.params.n_intervals != self.intervals_per_day:
            raise ValueError("parameter set does not cover intervals_per_day")

    def with_days(self, n_days: int) -> "LinearEnvConfig":
        return replace(self, n_days=n_days)


@dataclass(frozen=True)
class EnvState:
    day: int       # 1-based
    interval: int  # 1-based
    obs: np.ndarray


def make_setting(setting_id: str, n_days: int = 30, intervals_per_day: int = 4) -> LinearEnvConfig:
    """Named parameter settings; all share direct effect 0.2 and carryover
    effect (0.1, 0.05)."""
    if setting_id not in _SETTINGS:
        raise ValueError(f"unknown setting {setting_id!r}; expected one of {sorted(_SETTINGS)}")
    s = _SETTINGS[setting_id]
    params = LinearModelParams.stationary(
        n_intervals=intervals_per_day,
        reward_intercept=0.0,
        reward_obs=s["reward_obs"],
        reward_effect=0.2,
        trans_intercept=(0.0, 0.0),
        trans_matrix=s["trans_matrix"],
        trans_effect=(0.1, 0.05),
    )
    return LinearEnvConfig(
        n_days=n_days,
        intervals_per_day=intervals_per_day,
        params=params,
        sigma_y=s["sigma"],
        sigma_o=s["sigma"],
        setting=setting_id,
    )


class LinearEnv:
    """Simulator over ``config.n_days`` i.i.d. days.

    ``noise_scale`` multiplies both noise standard deviations; 0.0 turns the
    environment deterministic for arithmetic tests.
    """

    def __init__(self, config: LinearEnvConfig, noise_scale: float = 1.0):
        if noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        self.config = config
        self.noise_scale = float(noise_scale)
        self.n_days = config.n_days
        self.intervals_per_day = config.intervals_per_day
        self.obs_dim = OBS_DIM

    def reset_day(self, rng: np.random.Generator, day: int = 1) -> EnvState:
        """Start a day: initial observation drawn standard normal."""
        obs = self.noise_scale * rng.standard_normal(OBS_DIM)
        return EnvState(day=day, interval=1, obs=obs)

    def step(self, state: EnvState, action: int, rng: np.random.Generator) -> tuple[float, EnvState | None]:
        """Advance one interval; returns (outcome, next state or None at day end)."""
        if action not in ACTIONS:
            raise ValueError("action must be +1 or -1")
        m = self.intervals_per_day
        if not 1 <= state.interval <= m:
            raise ValueError("cannot step a terminated day")
        p = self.config.params
        j = state.interval - 1
        eps_y = self.noise_scale * self.config.sigma_y * rng.standard_normal()
        outcome = float(p.reward_intercept[j] + p.reward_obs[j] @ state.obs
                        + p.reward_effect[j] * action + eps_y)
        if state.interval == m:
            return outcome, None
        eps_o = self.noise_scale * self.config.sigma_o * rng.standard_normal(OBS_DIM)
        nxt = p.trans_intercept[j] + p.trans_matrix[j] @ state.obs + p.trans_effect[j] * action + eps_o
        return outcome, EnvState(day=state.day, interval=state.interval + 1, obs=nxt)

    def episode(self, rng: np.random.Generator) -> "_LinearEpisode":
        return _LinearEpisode(self, rng)

    def true_ate(self) -> float:
        return ate_plugin(self.config.params)

    def forced_outcome_means(self, action: int, n_rollouts: int, rng: np.random.Generator) -> np.ndarray:
        """Vectorized forced rollouts: per-rollout mean outcome across all
        n_days * M steps under a constant action."""
        n, m = self.n_days, self.intervals_per_day
        p = self.config.params
        total_days = n_rollouts * n
        a = float(action)
        obs = self.noise_scale * rng.standard_normal((total_days, OBS_DIM))
        outcome_sum = np.zeros(total_days)
        for j in range(m):
            eps_y = self.noise_scale * self.config.sigma_y * rng.standard_normal(total_days)
            outcome_sum += p.reward_intercept[j] + obs @ p.reward_obs[j] + p.reward_effect[j] * a + eps_y
            if j < m - 1:
                eps_o = self.noise_scale * self.config.sigma_o * rng.standard_normal((total_days, OBS_DIM))
                obs = p.trans_intercept[j] + obs @ p.trans_matrix[j].T + p.trans_effect[j] * a + eps_o
        per_day_mean = outcome_sum / m
        return per_day_mean.reshape(n_rollouts, n).mean(axis=1)


class _LinearEpisode:
    """Iterates day by day through one experiment; environment noise is drawn
    in a fixed order independent of the actions taken."""

    def __init__(self, env: LinearEnv, rng: np.random.Generator):
        self._env = env
        self._rng = rng
        self._day = 1
        self._state = env.reset_day(rng, day=1)
        self._done = False

    @property
    def pending(self) -> np.ndarray:
        return self._state.obs

    @property
    def day(self) -> int:
        return self._day

    @property
    def interval(self) -> int:
        return self._state.interval

    def step(self, action: int) -> tuple[float, bool]:
        if self._done:
            raise RuntimeError("episode already finished")
        outcome, nxt = self._env.step(self._state, action, self._rng)
        if nxt is None:
            if self._day == self._env.n_days:
                self._done = True
            else:
                self._day += 1
                self._state = self._env.reset_day(self._rng, day=self._day)
        else:
            self._state = nxt
        return outcome, self._done
