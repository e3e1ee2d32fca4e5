"""Shared domain types and plumbing for time-series experiments.

Data is organized as a panel of ``n_days`` days with ``intervals_per_day``
intervals each; a panel flattens to a single trajectory of length
``T = n_days * intervals_per_day`` with ``t = (day - 1) * M + interval``
(both 1-based). Everything downstream (estimators, designs, the RL agent)
works on these types.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

ACTION_PLUS = 1
ACTION_MINUS = -1
ACTIONS = (ACTION_MINUS, ACTION_PLUS)


def _label_entropy(label: str | int) -> int:
    if isinstance(label, int):
        return label & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """Derive a named, independent RNG stream from a root seed.

    Streams are keyed by name, not by spawn order, so adding a new consumer
    never perturbs the draws seen by existing ones.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_label_entropy(x) for x in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def config_hash(config: dict) -> str:
    """Stable sha256 hex digest of a JSON-serializable config mapping."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class StepTriplet:
    """One completed (observation, action, outcome) step."""

    observation: np.ndarray
    action: int
    outcome: float

    def __post_init__(self):
        obs = np.asarray(self.observation, dtype=float)
        if not np.all(np.isfinite(obs)):
            raise ValueError("observation entries must be finite")
        if not np.isfinite(self.outcome):
            raise ValueError("outcome must be finite")
        object.__setattr__(self, "observation", obs)


@dataclass(frozen=True)
class History:
    """Prefix of an experiment: completed triplets plus the pending observation.

    At decision time t there are ``t - 1`` completed steps; ``pending`` is the
    observation O_t that has not yet been paired with an action. Stored as raw
    arrays; normalization/tokenization is the consumer's job.
    """

    obs: np.ndarray       # (t-1, d)
    actions: np.ndarray   # (t-1,)
    outcomes: np.ndarray  # (t-1,)
    pending: np.ndarray   # (d,)

    def __len__(self) -> int:
        return self.obs.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.pending.shape[0]

    def step(self, i: int) -> StepTriplet:
        return StepTriplet(self.obs[i], int(self.actions[i]), float(self.outcomes[i]))

    @staticmethod
    def empty(pending: np.ndarray) -> "History":
        pending = np.asarray(pending, dtype=float)
        d = pending.shape[0]
        return History(
            obs=np.empty((0, d)),
            actions=np.empty((0,), dtype=int),
            outcomes=np.empty((0,)),
            pending=pending,
        )

    def extend(self, action: int, outcome: float, next_pending: np.ndarray) -> "History":
        """Return the history after taking ``action``, observing ``outcome``
        and the next pending observation."""
        return History(
            obs=np.vstack([self.obs, self.pending[None, :]]),
            actions=np.append(self.actions, int(action)),
            outcomes=np.append(self.outcomes, float(outcome)),
            pending=np.asarray(next_pending, dtype=float),
        )


@runtime_checkable
class DesignPolicy(Protocol):
    """Treatment allocation strategy: history -> probability of assigning +1."""

    def allocate(self, history: History) -> float: ...


@dataclass(frozen=True)
class PanelData:
    """Fully populated n_days x intervals_per_day grid of steps.

    ``actions`` uses +1/-1 for experimental data and 0 for A/A panels where
    a single policy ran throughout.
    """

    obs: np.ndarray       # (n, M, d)
    actions: np.ndarray   # (n, M) int
    outcomes: np.ndarray  # (n, M)

    def __post_init__(self):
        obs = np.asarray(self.obs, dtype=float)
        actions = np.asarray(self.actions, dtype=int)
        outcomes = np.asarray(self.outcomes, dtype=float)
        if obs.ndim != 3:
            raise ValueError("obs must have shape (n_days, M, d)")
        n, m, _ = obs.shape
        if n < 1 or m < 1:
            raise ValueError("panel must contain at least one populated cell")
        if actions.shape != (n, m) or outcomes.shape != (n, m):
            raise ValueError("actions/outcomes shapes must match obs grid")
        if not (np.all(np.isfinite(obs)) and np.all(np.isfinite(outcomes))):
            raise ValueError("panel entries must be finite")
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def n_days(self) -> int:
        return self.obs.shape[0]

    @property
    def intervals_per_day(self) -> int:
        return self.obs.shape[1]

    @property
    def obs_dim(self) -> int:
        return self.obs.shape[2]


@dataclass(frozen=True)
class Trajectory:
    """Panel flattened to a single time series with t = (day-1)*M + interval."""

    obs: np.ndarray       # (T, d)
    actions: np.ndarray   # (T,)
    outcomes: np.ndarray  # (T,)
    n_days: int
    intervals_per_day: int

    def __len__(self) -> int:
        return self.obs.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.obs.shape[1]

    def day_interval(self, t: int) -> tuple[int, int]:
        """Map 1-based flat index t to 1-based (day, interval)."""
        if not 1 <= t <= len(self):
            raise ValueError(f"t={t} outside trajectory of length {len(self)}")
        m = self.intervals_per_day
        return (t - 1) // m + 1, (t - 1) % m + 1

    def history_at(self, t: int) -> History:
        """History as seen at decision time t (1-based): t-1 completed steps
        plus O_t pending."""
        if not 1 <= t <= len(self):
            raise ValueError(f"t={t} outside trajectory of length {len(self)}")
        return History(
            obs=self.obs[: t - 1],
            actions=self.actions[: t - 1],
            outcomes=self.outcomes[: t - 1],
            pending=self.obs[t - 1],
        )

    def prefix_panel(self, n_days: int) -> PanelData:
        """First ``n_days`` full days as a panel."""
        if not 1 <= n_days <= self.n_days:
            raise ValueError("prefix must cover between 1 and n_days days")
        m, d = self.intervals_per_day, self.obs_dim
        upto = n_days * m
        return PanelData(
            obs=self.obs[:upto].reshape(n_days, m, d),
            actions=self.actions[:upto].reshape(n_days, m),
            outcomes=self.outcomes[:upto].reshape(n_days, m),
        )


def flatten_panel(panel: PanelData) -> Trajectory:
    """Flatten an n x M panel into a length-T trajectory, row-major by day."""
    n, m, d = panel.obs.shape
    return Trajectory(
        obs=panel.obs.reshape(n * m, d),
        actions=panel.actions.reshape(n * m),
        outcomes=panel.outcomes.reshape(n * m),
        n_days=n,
        intervals_per_day=m,
    )


def unflatten_trajectory(traj: Trajectory) -> PanelData:
    """Inverse of :func:`flatten_panel`."""
    n, m, d = traj.n_days, traj.intervals_per_day, traj.obs_dim
    if len(traj) != n * m:
        raise ValueError("trajectory length inconsistent with day/interval counts")
    return PanelData(
        obs=traj.obs.reshape(n, m, d),
        actions=traj.actions.reshape(n, m),
        outcomes=traj.outcomes.reshape(n, m),
    )


def history_window(history: History, w: int | None) -> History:
    """Keep only the last ``w`` completed triplets (plus the pending
    observation). ``w=None`` means unbounded and returns the input unchanged."""
    if w is None:
        return history
    if w < 1:
        raise ValueError("window size must be >= 1 (or None for unbounded)")
    if len(history) <= w:
        return history
    return History(
        obs=history.obs[-w:],
        actions=history.actions[-w:],
        outcomes=history.outcomes[-w:],
        pending=history.pending,
    )


def sample_action(p: float, rng: np.random.Generator) -> int:
    """Draw +1 with probability ``p``, else -1."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"assignment probability must lie in [0,1], got {p}")
    return ACTION_PLUS if rng.random() < p else ACTION_MINUS


@runtime_checkable
class Episode(Protocol):
    """One in-progress experiment: exposes the pending observation and
    advances one interval per action."""

    @property
    def pending(self) -> np.ndarray: ...

    def step(self, action: int) -> tuple[float, bool]:
        """Apply an action; return (outcome, experiment finished)."""
        ...


@runtime_checkable
class Simulator(Protocol):
    """Environment capable of generating full experiments.

    Implementations draw all environment noise in a fixed, action-independent
    order so that two designs sharing an environment stream see identical
    noise (the common-random-numbers contract).
    """

    n_days: int
    intervals_per_day: int
    obs_dim: int

    def episode(self, rng: np.random.Generator) -> Episode: ...


class ConstantPolicy:
    """Always assigns one arm; used for forced Monte Carlo rollouts."""

    def __init__(self, action: int):
        if action not in ACTIONS:
            raise ValueError("action must be +1 or -1")
        self.probability = 1.0 if action == ACTION_PLUS else 0.0

    def allocate(self, history: History) -> float:
        return self.probability


def run_design(env: Simulator, policy: DesignPolicy, env_rng: np.random.Generator,
               policy_rng: np.random.Generator) -> Trajectory:
    """Roll one full experiment under ``policy``.

    Environment noise comes from ``env_rng`` only; action randomization from
    ``policy_rng`` only, so the same ``env_rng`` state yields identical noise
    across designs.
    """
    episode = env.episode(env_rng)
    history = History.empty(episode.pending)
    obs, actions, outcomes = [], [], []
    done = False
    while not done:
        obs.append(np.array(episode.pending, dtype=float))
        p = float(policy.allocate(history))
        action = sample_action(p, policy_rng)
        outcome, done = episode.step(action)
        actions.append(action)
        outcomes.append(outcome)
        if not done:
            history = history.extend(action, outcome, episode.pending)
    return Trajectory(
        obs=np.asarray(obs),
        actions=np.asarray(actions, dtype=int),
        outcomes=np.asarray(outcomes),
        n_days=env.n_days,
        intervals_per_day=env.intervals_per_day,
    )


def forced_rollout(env: Simulator, action: int, rng: np.random.Generator) -> Trajectory:
    """Roll one experiment with every interval forced to ``action``."""
    return run_design(env, ConstantPolicy(action), rng, np.random.default_rng(0))


def generic_forced_outcome_means(env: Simulator, action: int, n_rollouts: int,
                                 rng: np.random.Generator) -> np.ndarray:
    """Per-rollout mean outcome under a forced arm; loop fallback for
    environments without a vectorized path."""
    means = np.empty(n_rollouts)
    for r in range(n_rollouts):
        means[r] = forced_rollout(env, action, rng).outcomes.mean()
    return means


@dataclass(frozen=True)
class RunManifest:
    """Identifies a run well enough to reproduce it bit for bit."""

    seed: int
    environment: str
    design: str
    estimator: str
    config_digest: str
    created_at: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "environment": self.environment,
            "design": self.design,
            "estimator": self.estimator,
            "config_digest": self.config_digest,
            "created_at": self.created_at,
            "extra": self.extra,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "RunManifest":
        payload = json.loads(text)
        return RunManifest(
            seed=int(payload["seed"]),
            environment=payload["environment"],
            design=payload["design"],
            estimator=payload["estimator"],
            config_digest=payload["config_digest"],
            created_at=payload.get("created_at", ""),
            extra=payload.get("extra", {}),
        )


def write_trajectory_csv(path, trajectories: list[Trajectory], replications: list[int] | None = None) -> None:
    """Export trajectories as CSV with columns
    (replication, day, interval, t, obs_1..obs_d, action, outcome)."""
    if not trajectories:
        raise ValueError("no trajectories to export")
    d = trajectories[0].obs_dim
    if replications is None:
        replications = list(range(1, len(trajectories) + 1))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["replication", "day", "interval", "t"]
            + [f"obs_{j + 1}" for j in range(d)]
            + ["action", "outcome"]
        )
        for rep, traj in zip(replications, trajectories):
            for t in range(1, len(traj) + 1):
                day, interval = traj.day_interval(t)
                row = [rep, day, interval, t]
                row += [repr(float(x)) for x in traj.obs[t - 1]]
                row += [int(traj.actions[t - 1]), repr(float(traj.outcomes[t - 1]))]
                writer.writerow(row)
