"""Double-DQN training of the transformer allocation policy.

The agent interacts with a simulator, scores each history prefix with the
Q-network, explores epsilon-greedily, and learns from a proxy reward: the
negative discounted squared gap between the running ATE estimate and the
simulator's Monte Carlo truth. Day-end sparse rewards are the default (the
dense per-step variant and a raw-outcome mode for sanity environments are
config options). Optimization is AdamW with cosine learning-rate decay and
global-norm gradient clipping; the target network tracks the online one
through soft updates.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .. import core
from ..core import ACTION_MINUS, ACTION_PLUS, History, PanelData, Simulator
from ..estimators import daily_ols_ate
from .network import NetConfig, encode_history, init_params, qnet_backward, qnet_forward

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrlConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int | None = None           # defaults to 4 * d_model
    alpha: float = 0.8                # proxy-reward discount
    gamma_rl: float = 1.0             # return discount
    epsilon: float = 0.10
    tau: float = 0.005
    warmup_days: int = 7
    window: int | None = None
    base_lr: float = 1e-3
    schedule_steps: int | None = None  # defaults to total gradient steps
    clip_norm: float = 1.0
    weight_decay: float = 1e-4
    replay_capacity: int = 20000       # transitions
    batch_size: int = 32
    epochs: int = 150
    episodes_per_epoch: int = 2
    grad_steps_per_epoch: int = 4
    reward_mode: str = "sparse"        # sparse | dense | outcome
    norm_episodes: int = 2
    validation_reps: int = 0           # 0 disables checkpoint selection
    validation_every: int = 25         # epochs between validation passes
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if not 0.0 < self.gamma_rl <= 1.0:
            raise ValueError("gamma_rl must lie in (0, 1]")
        if self.reward_mode not in ("sparse", "dense", "outcome"):
            raise ValueError("reward_mode must be sparse, dense, or outcome")
        if self.window is not None and self.window < 1:
            raise ValueError("attention window must be >= 1 or None")

    @property
    def ff_width(self) -> int:
        return 4 * self.d_model if self.d_ff is None else self.d_ff


@dataclass(frozen=True)
class NormStats:
    """Input normalization, frozen after the warm-up/calibration phase."""

    obs_loc: np.ndarray
    obs_scale: np.ndarray
    y_loc: float
    y_scale: float

    @staticmethod
    def identity(obs_dim: int) -> "NormStats":
        return NormStats(np.zeros(obs_dim), np.ones(obs_dim), 0.0, 1.0)

    @staticmethod
    def from_data(obs: np.ndarray, outcomes: np.ndarray) -> "NormStats":
        return NormStats(
            obs_loc=obs.mean(axis=0),
            obs_scale=np.maximum(obs.std(axis=0), 1e-8),
            y_loc=float(outcomes.mean()),
            y_scale=float(max(outcomes.std(), 1e-8)),
        )


def proxy_reward(est: float, ate_mc: float, alpha: float, t: int, horizon: int,
                 mode: str, warmup_days: int, intervals_per_day: int) -> float:
    """Negative discounted squared error of the running estimate.

    Dense mode pays -alpha^(T-t) * err^2 at every step; sparse mode pays
    -alpha^(n-i) * err^2 only at day ends (t = i*M). Both modes pay zero for
    the first ``warmup_days`` days.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    m = intervals_per_day
    day = (t - 1) // m + 1
    if day <= warmup_days:
        return 0.0
    err_sq = (est - ate_mc) ** 2
    if mode == "dense":
        return -(alpha ** (horizon - t)) * err_sq
    if mode == "sparse":
        if t % m != 0:
            return 0.0
        n_days = horizon // m
        return -(alpha ** (n_days - day)) * err_sq
    raise ValueError(f"unknown reward mode {mode!r}")


@dataclass
class _Episode:
    completed: np.ndarray  # (T, token_dim) tokens of finished triplets
    pending: np.ndarray    # (T, token_dim) pending-observation tokens
    actions: np.ndarray    # (T,) in {-1, +1}
    rewards: np.ndarray    # (T,)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def state_tokens(self, t: int, window: int | None) -> np.ndarray:
        """Tokens of S_t (1-based): t-1 completed triplets plus pending O_t."""
        lo = 0 if window is None else max(0, (t - 1) - window)
        return np.vstack([self.completed[lo: t - 1], self.pending[t - 1: t]])


class ReplayBuffer:
    """Uniform sampler over transitions of stored episodes."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.episodes: list[_Episode] = []
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, episode: _Episode) -> None:
        self.episodes.append(episode)
        self._size += episode.horizon
        while self._size > self.capacity and len(self.episodes) > 1:
            dropped = self.episodes.pop(0)
            self._size -= dropped.horizon

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[tuple[_Episode, int]]:
        if not self.episodes:
            raise ValueError("replay buffer is empty")
        lengths = np.array([ep.horizon for ep in self.episodes])
        bounds = np.cumsum(lengths)
        flat = rng.integers(self._size, size=batch_size)
        out = []
        for f in flat:
            idx = int(np.searchsorted(bounds, f, side="right"))
            t = int(f - (bounds[idx - 1] if idx else 0)) + 1
            out.append((self.episodes[idx], t))
        return out


def _pad_batch(token_seqs: list[np.ndarray], token_dim: int) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([seq.shape[0] for seq in token_seqs])
    out = np.zeros((len(token_seqs), int(lengths.max()), token_dim))
    for i, seq in enumerate(token_seqs):
        out[i, : seq.shape[0]] = seq
    return out, lengths


def _q_final(params: dict, token_seqs: list[np.ndarray], net: NetConfig) -> np.ndarray:
    padded, lengths = _pad_batch(token_seqs, net.token_dim)
    q = qnet_forward(params, padded, net)
    return q[np.arange(len(token_seqs)), lengths - 1]


def ddqn_target(batch: list[tuple[_Episode, int]], online: dict, target: dict,
                gamma_rl: float, net: NetConfig, window: int | None) -> np.ndarray:
    """Double-DQN targets: r, or r + gamma * Q_target(s', argmax_a Q_online(s', a))."""
    targets = np.empty(len(batch))
    next_seqs, next_slots = [], []
    for i, (ep, t) in enumerate(batch):
        targets[i] = ep.rewards[t - 1]
        if t < ep.horizon:
            next_seqs.append(ep.state_tokens(t + 1, window))
            next_slots.append(i)
    if next_seqs:
        q_online = _q_final(online, next_seqs, net)
        q_target = _q_final(target, next_seqs, net)
        best = q_online.argmax(axis=1)
        targets[next_slots] += gamma_rl * q_target[np.arange(len(next_seqs)), best]
    return targets


def td_loss_and_grads(online: dict, batch: list[tuple[_Episode, int]], targets: np.ndarray,
                      net: NetConfig, window: int | None) -> tuple[float, dict]:
    """Mean squared TD error at the taken actions, with exact gradients."""
    seqs = [ep.state_tokens(t, window) for ep, t in batch]
    padded, lengths = _pad_batch(seqs, net.token_dim)
    q_all, cache = qnet_forward(online, padded, net, need_cache=True)
    rows = np.arange(len(batch))
    cols = lengths - 1
    a_idx = np.array([(int(ep.actions[t - 1]) + 1) // 2 for ep, t in batch])
    q_sel = q_all[rows, cols, a_idx]
    err = q_sel - targets
    if not np.all(np.isfinite(err)):
        bad = int(np.flatnonzero(~np.isfinite(err))[0])
        raise ValueError(f"non-finite TD error at batch index {bad}")
    loss = float((err ** 2).mean())
    dq = np.zeros_like(q_all)
    dq[rows, cols, a_idx] = 2.0 * err / len(batch)
    grads = qnet_backward(online, cache, dq, net)
    return loss, grads


@dataclass
class TrainState:
    params: dict
    target: dict
    m: dict
    v: dict
    step: int = 0

    @staticmethod
    def fresh(params: dict) -> "TrainState":
        clone = {k: v.copy() for k, v in params.items()}
        return TrainState(
            params=params,
            target=clone,
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
        )


def cosine_lr(base_lr: float, step: int, schedule_steps: int) -> float:
    frac = min(step, schedule_steps) / schedule_steps
    return base_lr * 0.5 * (1.0 + np.cos(np.pi * frac))


def clip_global_norm(grads: dict, clip: float) -> dict:
    total = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    if total > clip > 0:
        scale = clip / total
        return {k: g * scale for k, g in grads.items()}
    return grads


def optimizer_step(state: TrainState, grads: dict, config: TrlConfig,
                   schedule_steps: int) -> TrainState:
    """One AdamW update with cosine learning rate and global-norm clipping.

    Weight decay is decoupled (applied directly to the parameters, scaled by
    the current learning rate); at the end of the cosine schedule the
    learning rate is zero and the parameters freeze.
    """
    grads = clip_global_norm(grads, config.clip_norm)
    state.step += 1
    lr = cosine_lr(config.base_lr, state.step, schedule_steps)
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g ** 2
        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        state.params[name] -= lr * (m_hat / (np.sqrt(v_hat) + eps)
                                    + config.weight_decay * state.params[name])
    return state


def soft_update(target: dict, online: dict, tau: float) -> dict:
    """target <- (1 - tau) * target + tau * online, elementwise."""
    return {k: (1.0 - tau) * target[k] + tau * online[k] for k in target}


def act(params: dict, history: History, epsilon: float, rng: np.random.Generator,
        net: NetConfig, norm: NormStats, window: int | None = None) -> int:
    """Epsilon-greedy action; greedy ties resolve to +1."""
    if epsilon > 0 and rng.random() < epsilon:
        return ACTION_PLUS if rng.random() < 0.5 else ACTION_MINUS
    tokens = encode_history(history, net, norm.obs_loc, norm.obs_scale,
                            norm.y_loc, norm.y_scale, window)
    q = qnet_forward(params, tokens[None, :, :], net)[0, tokens.shape[0] - 1]
    return ACTION_PLUS if q[1] >= q[0] else ACTION_MINUS


class LearnedPolicy:
    """Greedy allocation from trained parameters (deterministic handle)."""

    def __init__(self, params: dict, net: NetConfig, norm: NormStats,
                 window: int | None = None):
        self.params = params
        self.net = net
        self.norm = norm
        self.window = window

    def allocate(self, history: History) -> float:
        tokens = encode_history(history, self.net, self.norm.obs_loc, self.norm.obs_scale,
                                self.norm.y_loc, self.norm.y_scale, self.window)
        q = qnet_forward(self.params, tokens[None, :, :], self.net)[0, tokens.shape[0] - 1]
        return 1.0 if q[1] >= q[0] else 0.0


@dataclass(frozen=True)
class LogRow:
    epoch: int
    mean_return: float
    loss: float
    lr: float


@dataclass
class TrainResult:
    policy: LearnedPolicy
    log: list[LogRow]
    state: TrainState
    config: TrlConfig
    net: NetConfig
    norm: NormStats

    def save(self, path) -> None:
        save_checkpoint(path, self)


def _norm_tokens(obs, action, outcome, norm: NormStats, token_dim: int) -> np.ndarray:
    tok = np.zeros(token_dim)
    d = len(norm.obs_loc)
    tok[:d] = (obs - norm.obs_loc) / norm.obs_scale
    tok[d] = action
    tok[d + 1] = (outcome - norm.y_loc) / norm.y_scale
    return tok


def _pending_token(obs, norm: NormStats, token_dim: int) -> np.ndarray:
    tok = np.zeros(token_dim)
    d = len(norm.obs_loc)
    tok[:d] = (obs - norm.obs_loc) / norm.obs_scale
    return tok


def _calibrate_norm(env: Simulator, config: TrlConfig, rng: np.random.Generator) -> NormStats:
    """Freeze input normalization from a few uniformly randomized episodes."""
    if config.norm_episodes < 1:
        return NormStats.identity(env.obs_dim)
    all_obs, all_y = [], []
    for _ in range(config.norm_episodes):
        episode = env.episode(rng)
        done = False
        while not done:
            all_obs.append(np.array(episode.pending))
            action = ACTION_PLUS if rng.random() < 0.5 else ACTION_MINUS
            y, done = episode.step(action)
            all_y.append(y)
    return NormStats.from_data(np.asarray(all_obs), np.asarray(all_y))


def default_running_estimator(panel: PanelData, day: int) -> float:
    """Day-end running estimate: the per-interval plug-in with fallbacks."""
    return daily_ols_ate(panel).value


def train(env: Simulator, config: TrlConfig, rng: np.random.Generator,
          ate_mc: float | None = None, estimator=default_running_estimator) -> TrainResult:
    """Learn an allocation policy on ``env`` by transformer double-DQN.

    ``ate_mc`` is the precomputed Monte Carlo truth used by the proxy reward
    (required unless ``reward_mode='outcome'``, which takes the environment's
    raw outcome as the reward). ``estimator(panel, day)`` computes the running
    ATE estimate from the completed-day prefix.

    With ``validation_reps > 0`` the greedy policy is scored periodically on a
    training-side seed block and the best checkpoint is returned; evaluation
    replications elsewhere must use different seeds.
    """
    if config.reward_mode != "outcome" and ate_mc is None:
        raise ValueError("proxy rewards need the precomputed Monte Carlo truth (ate_mc)")
    n_days, m = env.n_days, env.intervals_per_day
    horizon = n_days * m
    seq_cap = horizon + 1 if config.window is None else min(config.window, horizon) + 1
    net = NetConfig(obs_dim=env.obs_dim, d_model=config.d_model, n_heads=config.n_heads,
                    n_layers=config.n_layers, d_ff=config.ff_width, max_seq_len=seq_cap)

    rng_init, rng_norm, rng_rollout, rng_replay, rng_val = rng.spawn(5)
    norm = _calibrate_norm(env, config, rng_norm)
    params = init_params(net, rng_init)
    state = TrainState.fresh(params)
    replay = ReplayBuffer(config.replay_capacity)
    total_grad_steps = config.epochs * config.grad_steps_per_epoch
    schedule = config.schedule_steps or max(total_grad_steps, 1)
    val_seed = int(rng_val.integers(2 ** 63))
    best_val = np.inf
    best_params = None

    log: list[LogRow] = []
    for epoch in range(1, config.epochs + 1):
        returns = []
        rngs = rng_rollout.spawn(2 * config.episodes_per_epoch)
        episodes = _collect_episodes(env, state.params, net, norm, config,
                                     rngs[::2], rngs[1::2], ate_mc, estimator)
        for episode in episodes:
            replay.add(episode)
            returns.append(float(episode.rewards.sum()))
        losses = []
        for _ in range(config.grad_steps_per_epoch):
            batch = replay.sample(config.batch_size, rng_replay)
            targets = ddqn_target(batch, state.params, state.target,
                                  config.gamma_rl, net, config.window)
            loss, grads = td_loss_and_grads(state.params, batch, targets, net, config.window)
            state = optimizer_step(state, grads, config, schedule)
            state.target = soft_update(state.target, state.params, config.tau)
            losses.append(loss)
        log.append(LogRow(
            epoch=epoch,
            mean_return=float(np.mean(returns)),
            loss=float(np.mean(losses)) if losses else float("nan"),
            lr=cosine_lr(config.base_lr, state.step, schedule),
        ))
        if (config.validation_reps > 0 and ate_mc is not None
                and (epoch % config.validation_every == 0 or epoch == config.epochs)):
            val = greedy_policy_mse(env, state.params, net, norm, config.window,
                                    ate_mc, estimator, config.validation_reps, val_seed)
            if val < best_val:
                best_val = val
                best_params = {k: v.copy() for k, v in state.params.items()}

    final_params = best_params if best_params is not None else state.params
    policy = LearnedPolicy(final_params, net, norm, config.window)
    return TrainResult(policy=policy, log=log, state=state, config=config, net=net, norm=norm)


def greedy_policy_mse(env: Simulator, params: dict, net: NetConfig, norm: NormStats,
                      window: int | None, ate_mc: float, estimator, reps: int,
                      seed: int) -> float:
    """Mean squared end-of-experiment estimator error of the greedy policy.

    Rolls ``reps`` lockstep episodes on the named environment streams; the
    replication streams match ``bench.run_grid`` keyed by the same seed, so a
    deterministic policy scores identically here and there.
    """
    from .. import core

    n_days, m = env.n_days, env.intervals_per_day
    horizon = n_days * m
    k = net.token_dim
    episodes = [env.episode(core.substream(seed, "env", r + 1)) for r in range(reps)]
    completed = np.zeros((reps, horizon, k))
    pending = np.zeros((reps, horizon, k))
    actions = np.zeros((reps, horizon), dtype=int)
    raw_obs = np.zeros((reps, horizon, env.obs_dim))
    raw_y = np.zeros((reps, horizon))
    cache = None
    if window is None:
        from .network import IncrementalQNet
        cache = IncrementalQNet(params, net, reps)
    for t in range(1, horizon + 1):
        for i, ep in enumerate(episodes):
            obs = np.array(ep.pending, dtype=float)
            raw_obs[i, t - 1] = obs
            pending[i, t - 1] = _pending_token(obs, norm, k)
        if cache is not None:
            q = cache.set_token(t - 1, pending[:, t - 1, :])
        else:
            lo = max(0, (t - 1) - window)
            state_batch = np.concatenate(
                [completed[:, lo: t - 1, :], pending[:, t - 1: t, :]], axis=1)
            q = qnet_forward(params, state_batch, net)[:, -1, :]
        actions[:, t - 1] = np.where(q[:, 1] >= q[:, 0], ACTION_PLUS, ACTION_MINUS)
        for i, ep in enumerate(episodes):
            y, _ = ep.step(int(actions[i, t - 1]))
            raw_y[i, t - 1] = y
            completed[i, t - 1] = _norm_tokens(raw_obs[i, t - 1], actions[i, t - 1], y, norm, k)
        if cache is not None and t < horizon:
            cache.set_token(t - 1, completed[:, t - 1, :])
    errors = np.empty(reps)
    for i in range(reps):
        panel = PanelData(obs=raw_obs[i].reshape(n_days, m, env.obs_dim),
                          actions=actions[i].reshape(n_days, m),
                          outcomes=raw_y[i].reshape(n_days, m))
        errors[i] = float(estimator(panel, n_days)) - ate_mc
    return float((errors ** 2).mean())


def _collect_episodes(env: Simulator, params: dict, net: NetConfig, norm: NormStats,
                      config: TrlConfig, env_rngs, act_rngs, ate_mc: float | None,
                      estimator) -> list[_Episode]:
    """Roll several episodes in lockstep, batching the Q forwards across them.

    Every episode shares the horizon, so at each step all state token
    sequences have equal length and batch without padding.
    """
    n_days, m = env.n_days, env.intervals_per_day
    horizon = n_days * m
    k = net.token_dim
    n_par = len(env_rngs)
    completed = np.zeros((n_par, horizon, k))
    pending = np.zeros((n_par, horizon, k))
    actions = np.zeros((n_par, horizon), dtype=int)
    rewards = np.zeros((n_par, horizon))
    raw_obs = np.zeros((n_par, horizon, env.obs_dim))
    raw_y = np.zeros((n_par, horizon))

    episodes = [env.episode(r) for r in env_rngs]
    latest_est: list[float | None] = [None] * n_par
    cache = None
    if config.window is None:
        from .network import IncrementalQNet
        cache = IncrementalQNet(params, net, n_par)
    for t in range(1, horizon + 1):
        for i, episode in enumerate(episodes):
            obs = np.array(episode.pending, dtype=float)
            raw_obs[i, t - 1] = obs
            pending[i, t - 1] = _pending_token(obs, norm, k)
        explore = np.array([r.random() < config.epsilon for r in act_rngs])
        greedy_idx = np.flatnonzero(~explore)
        if cache is not None:
            q_batch_all = cache.set_token(t - 1, pending[:, t - 1, :])
            if greedy_idx.size:
                q = q_batch_all[greedy_idx]
                actions[greedy_idx, t - 1] = np.where(q[:, 1] >= q[:, 0],
                                                      ACTION_PLUS, ACTION_MINUS)
        elif greedy_idx.size:
            lo = max(0, (t - 1) - config.window)
            state_batch = np.concatenate(
                [completed[greedy_idx, lo: t - 1, :], pending[greedy_idx, t - 1: t, :]], axis=1)
            q_batch = qnet_forward(params, state_batch, net)[:, -1, :]
            for row, i in enumerate(greedy_idx):
                actions[i, t - 1] = ACTION_PLUS if q_batch[row, 1] >= q_batch[row, 0] else ACTION_MINUS
        for i in np.flatnonzero(explore):
            actions[i, t - 1] = ACTION_PLUS if act_rngs[i].random() < 0.5 else ACTION_MINUS
        for i, episode in enumerate(episodes):
            outcome, _ = episode.step(int(actions[i, t - 1]))
            raw_y[i, t - 1] = outcome
            completed[i, t - 1] = _norm_tokens(raw_obs[i, t - 1], actions[i, t - 1],
                                               outcome, norm, k)
        if cache is not None and t < horizon:
            cache.set_token(t - 1, completed[:, t - 1, :])
        if config.reward_mode == "outcome":
            rewards[:, t - 1] = raw_y[:, t - 1]
            continue
        day, offset = divmod(t - 1, m)
        day_end = offset == m - 1
        for i in range(n_par):
            if day_end and day + 1 >= 2 and day + 1 > config.warmup_days:
                panel = PanelData(
                    obs=raw_obs[i, : t].reshape(day + 1, m, env.obs_dim),
                    actions=actions[i, : t].reshape(day + 1, m),
                    outcomes=raw_y[i, : t].reshape(day + 1, m),
                )
                latest_est[i] = float(estimator(panel, day + 1))
            if config.reward_mode == "sparse":
                if day_end and latest_est[i] is not None:
                    rewards[i, t - 1] = proxy_reward(latest_est[i], ate_mc, config.alpha,
                                                     t, horizon, "sparse",
                                                     config.warmup_days, m)
            elif latest_est[i] is not None:  # dense: carry the last day-end estimate
                rewards[i, t - 1] = proxy_reward(latest_est[i], ate_mc, config.alpha,
                                                 t, horizon, "dense",
                                                 config.warmup_days, m)
    return [_Episode(completed=completed[i], pending=pending[i],
                     actions=actions[i], rewards=rewards[i]) for i in range(n_par)]


def save_checkpoint(path, result: TrainResult) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "trl_config": asdict(result.config),
        "net_config": asdict(result.net),
        "norm": {
            "obs_loc": result.norm.obs_loc.tolist(),
            "obs_scale": result.norm.obs_scale.tolist(),
            "y_loc": result.norm.y_loc,
            "y_scale": result.norm.y_scale,
        },
        "params": {k: v.tolist() for k, v in result.state.params.items()},
        "log": [asdict(row) for row in result.log],
    }
    payload["config_digest"] = core.config_hash({"trl": payload["trl_config"],
                                                 "net": payload["net_config"]})
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_policy(path) -> LearnedPolicy:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    net = NetConfig(**payload["net_config"])
    norm = NormStats(
        obs_loc=np.asarray(payload["norm"]["obs_loc"], dtype=float),
        obs_scale=np.asarray(payload["norm"]["obs_scale"], dtype=float),
        y_loc=float(payload["norm"]["y_loc"]),
        y_scale=float(payload["norm"]["y_scale"]),
    )
    params = {k: np.asarray(v, dtype=float) for k, v in payload["params"].items()}
    window = payload["trl_config"].get("window")
    return LearnedPolicy(params, net, norm, window)


def write_training_log_csv(path, log: list[LogRow]) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,mean_return,loss,lr\n")
        for row in log:
            fh.write(f"{row.epoch},{row.mean_return!r},{row.loss!r},{row.lr!r}\n")
