import numpy as np
import pytest

from seqdesign.core import History, substream
from seqdesign.trl.agent import (
    LearnedPolicy,
    NormStats,
    ReplayBuffer,
    TrainState,
    TrlConfig,
    _Episode,
    act,
    cosine_lr,
    ddqn_target,
    load_policy,
    optimizer_step,
    proxy_reward,
    soft_update,
    td_loss_and_grads,
    train,
)
from seqdesign.trl.network import NetConfig, init_params, qnet_forward

NET = NetConfig(obs_dim=2, d_model=8, n_heads=2, n_layers=1, d_ff=16, max_seq_len=16)


def make_episode(horizon=6, seed=0, rewards=None):
    rng = np.random.default_rng(seed)
    return _Episode(
        completed=rng.standard_normal((horizon, NET.token_dim)),
        pending=rng.standard_normal((horizon, NET.token_dim)),
        actions=rng.choice([-1, 1], horizon),
        rewards=np.zeros(horizon) if rewards is None else np.asarray(rewards, float),
    )


class TestProxyReward:
    def test_zero_error(self):
        assert proxy_reward(0.5, 0.5, 0.8, 10, 20, "dense", 0, 4) == 0.0

    def test_dense_final_step(self):
        r = proxy_reward(0.6, 0.5, 0.8, 20, 20, "dense", 0, 4)
        assert r == pytest.approx(-0.01, abs=1e-15)

    def test_sparse_day_end(self):
        # day i = n - 2 with alpha 0.5 and error 0.2: -0.25 * 0.04
        n_days, m = 10, 3
        t = (n_days - 2) * m
        r = proxy_reward(0.7, 0.5, 0.5, t, n_days * m, "sparse", 0, m)
        assert r == pytest.approx(-0.25 * 0.04, abs=1e-15)

    def test_sparse_zero_off_day_end(self):
        assert proxy_reward(0.7, 0.5, 0.5, 7, 30, "sparse", 0, 3) == 0.0

    def test_warmup_zeroes_rewards(self):
        assert proxy_reward(0.9, 0.5, 0.8, 4, 40, "sparse", 7, 4) == 0.0
        assert proxy_reward(0.9, 0.5, 0.8, 27, 40, "dense", 7, 4) == 0.0

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            proxy_reward(0.5, 0.5, 1.0, 1, 4, "dense", 0, 2)


class TestDdqnTarget:
    def test_terminal_is_reward(self):
        ep = make_episode(rewards=[0, 0, 0, 0, 0, -0.3])
        params = init_params(NET, np.random.default_rng(0))
        targets = ddqn_target([(ep, 6)], params, params, 1.0, NET, None)
        assert targets[0] == pytest.approx(-0.3, abs=1e-15)

    def test_online_argmax_target_value(self):
        # force known Q values through the heads of two distinct param sets
        ep = make_episode(rewards=[0.0] * 6)
        rng = np.random.default_rng(1)
        online = init_params(NET, rng)
        target = init_params(NET, rng)
        online["head.b"] = np.array([1.0, 2.0])   # argmax -> index 1
        target["head.b"] = np.array([5.0, 7.0])
        targets = ddqn_target([(ep, 3)], online, target, 1.0, NET, None)
        assert targets[0] == pytest.approx(7.0, abs=1e-12)

    def test_identical_nets_reduce_to_q_learning(self):
        ep = make_episode(rewards=[0.5] * 6)
        params = init_params(NET, np.random.default_rng(2))
        params["head.w"] = 0.3 * np.random.default_rng(3).standard_normal((8, 2))
        t_ddqn = ddqn_target([(ep, 2)], params, params, 0.9, NET, None)
        seq = ep.state_tokens(3, None)
        q = qnet_forward(params, seq[None], NET)[0, -1]
        assert t_ddqn[0] == pytest.approx(0.5 + 0.9 * q.max(), abs=1e-12)


class TestTdLoss:
    def test_zero_loss_zero_grads(self):
        ep = make_episode()
        params = init_params(NET, np.random.default_rng(4))  # zero head -> Q == 0
        targets = np.zeros(2)
        loss, grads = td_loss_and_grads(params, [(ep, 1), (ep, 4)], targets, NET, None)
        assert loss == 0.0
        assert all(np.all(g == 0) for g in grads.values())

    def test_single_transition_loss_value(self):
        ep = make_episode()
        params = init_params(NET, np.random.default_rng(5))
        params["head.b"] = np.array([1.0, 1.0])  # Q == 1 for both actions
        loss, _ = td_loss_and_grads(params, [(ep, 2)], np.array([0.0]), NET, None)
        assert loss == pytest.approx(1.0, abs=1e-12)

    def test_nonfinite_target_raises(self):
        ep = make_episode()
        params = init_params(NET, np.random.default_rng(6))
        with pytest.raises(ValueError, match="batch index 0"):
            td_loss_and_grads(params, [(ep, 1)], np.array([np.nan]), NET, None)


class TestOptimizer:
    def setup_method(self):
        self.config = TrlConfig(d_model=8, n_heads=2, n_layers=1, d_ff=16,
                                base_lr=0.1, weight_decay=0.01, clip_norm=1.0)
        self.params = init_params(NET, np.random.default_rng(7))
        self.params["head.w"] += 1.0
        self.state = TrainState.fresh(self.params)

    def test_zero_grads_weight_decay_only(self):
        before = {k: v.copy() for k, v in self.state.params.items()}
        grads = {k: np.zeros_like(v) for k, v in self.state.params.items()}
        optimizer_step(self.state, grads, self.config, schedule_steps=100)
        lr = cosine_lr(0.1, 1, 100)
        for name in before:
            np.testing.assert_allclose(self.state.params[name],
                                       before[name] * (1 - lr * 0.01), atol=1e-12)

    def test_gradient_clipping(self):
        grads = {k: np.zeros_like(v) for k, v in self.state.params.items()}
        grads["head.w"] = np.full_like(self.state.params["head.w"], 10.0)
        clipped = False
        norm = np.sqrt(float((grads["head.w"] ** 2).sum()))
        from seqdesign.trl.agent import clip_global_norm
        out = clip_global_norm(grads, 1.0)
        out_norm = np.sqrt(sum(float((g ** 2).sum()) for g in out.values()))
        assert norm > 1.0 and out_norm == pytest.approx(1.0, abs=1e-12)

    def test_cosine_schedule_endpoint_freezes(self):
        assert cosine_lr(0.1, 100, 100) == pytest.approx(0.0, abs=1e-15)
        self.state.step = 99
        before = {k: v.copy() for k, v in self.state.params.items()}
        grads = {k: np.ones_like(v) for k, v in self.state.params.items()}
        optimizer_step(self.state, grads, self.config, schedule_steps=100)
        for name in before:
            np.testing.assert_allclose(self.state.params[name], before[name], atol=1e-15)


class TestSoftUpdate:
    def test_tau_extremes(self):
        online = {"w": np.array([1.0, 2.0])}
        target = {"w": np.array([0.0, 0.0])}
        np.testing.assert_array_equal(soft_update(target, online, 1.0)["w"], online["w"])
        np.testing.assert_array_equal(soft_update(target, online, 0.0)["w"], target["w"])

    def test_two_small_steps_equal_one_blend(self):
        online = {"w": np.array([1.0])}
        target = {"w": np.array([0.0])}
        twice = soft_update(soft_update(target, online, 0.005), online, 0.005)
        blend = 1.0 - (1.0 - 0.005) ** 2
        np.testing.assert_allclose(twice["w"], [blend], atol=1e-12)

    def test_contraction(self):
        rng = np.random.default_rng(8)
        online = {"w": rng.standard_normal(5)}
        target = {"w": rng.standard_normal(5)}
        dist = np.linalg.norm(target["w"] - online["w"])
        for _ in range(10):
            target = soft_update(target, online, 0.3)
            new_dist = np.linalg.norm(target["w"] - online["w"])
            assert new_dist < dist
            dist = new_dist


class TestAct:
    def test_epsilon_one_uniform(self):
        params = init_params(NET, np.random.default_rng(9))
        norm = NormStats.identity(2)
        h = History.empty(np.zeros(2))
        rng = substream(10, "act")
        draws = [act(params, h, 1.0, rng, NET, norm) for _ in range(2000)]
        frac = np.mean([d == 1 for d in draws])
        assert 0.45 < frac < 0.55

    def test_greedy_picks_argmax(self):
        params = init_params(NET, np.random.default_rng(11))
        params["head.b"] = np.array([0.3, 0.9])
        norm = NormStats.identity(2)
        h = History.empty(np.zeros(2))
        assert act(params, h, 0.0, substream(0, "a"), NET, norm) == 1
        params["head.b"] = np.array([0.9, 0.3])
        assert act(params, h, 0.0, substream(0, "a"), NET, norm) == -1

    def test_tie_resolves_to_plus(self):
        params = init_params(NET, np.random.default_rng(12))  # zero head: Q ties
        norm = NormStats.identity(2)
        h = History.empty(np.zeros(2))
        assert act(params, h, 0.0, substream(0, "a"), NET, norm) == 1


class TestReplayBuffer:
    def test_capacity_evicts_whole_episodes(self):
        buf = ReplayBuffer(capacity=10)
        buf.add(make_episode(horizon=6, seed=0))
        buf.add(make_episode(horizon=6, seed=1))
        assert len(buf) == 6  # first evicted: 12 > 10
        assert len(buf.episodes) == 1

    def test_sampled_transitions_carry_prefixes(self):
        buf = ReplayBuffer(capacity=100)
        buf.add(make_episode(horizon=6, seed=2))
        batch = buf.sample(20, substream(13, "replay"))
        for ep, t in batch:
            assert 1 <= t <= 6
            assert ep.state_tokens(t, None).shape == (t, NET.token_dim)

    def test_empty_buffer_raises(self):
        with pytest.raises(ValueError):
            ReplayBuffer(5).sample(1, substream(0, "r"))


class _TinyEnv:
    """Two-day, two-interval environment with outcome = action."""

    n_days, intervals_per_day, obs_dim = 2, 2, 2

    def episode(self, rng):
        env = self

        class Ep:
            def __init__(self):
                self.t = 0
                self._obs = rng.standard_normal(2)

            @property
            def pending(self):
                return self._obs

            def step(self, action):
                self.t += 1
                self._obs = rng.standard_normal(2)
                return float(action), self.t >= env.n_days * env.intervals_per_day

        return Ep()


class TestTrain:
    def tiny_config(self, **kw):
        base = dict(d_model=8, n_heads=2, n_layers=1, d_ff=16, epochs=3,
                    episodes_per_epoch=2, grad_steps_per_epoch=2, batch_size=4,
                    reward_mode="outcome", norm_episodes=1, replay_capacity=64)
        base.update(kw)
        return TrlConfig(**base)

    def test_missing_truth_rejected(self):
        cfg = self.tiny_config(reward_mode="sparse")
        with pytest.raises(ValueError, match="ate_mc"):
            train(_TinyEnv(), cfg, substream(14, "t"))

    def test_deterministic_log(self):
        cfg = self.tiny_config()
        log1 = train(_TinyEnv(), cfg, substream(15, "t")).log
        log2 = train(_TinyEnv(), cfg, substream(15, "t")).log
        assert log1 == log2

    def test_log_shape_and_lr_decay(self):
        cfg = self.tiny_config()
        res = train(_TinyEnv(), cfg, substream(16, "t"))
        assert [row.epoch for row in res.log] == [1, 2, 3]
        assert res.log[-1].lr < cfg.base_lr

    def test_checkpoint_round_trip(self, tmp_path):
        cfg = self.tiny_config()
        res = train(_TinyEnv(), cfg, substream(17, "t"))
        path = tmp_path / "ckpt.json"
        res.save(path)
        policy = load_policy(path)
        h = History.empty(np.array([0.3, -0.2]))
        assert policy.allocate(h) == res.policy.allocate(h)

    def test_dominant_action_learned(self):
        cfg = self.tiny_config(epochs=15, episodes_per_epoch=2, grad_steps_per_epoch=4,
                               base_lr=3e-3, epsilon=0.2)
        res = train(_TinyEnv(), cfg, substream(18, "t"))
        rng = np.random.default_rng(19)
        hits = 0
        for _ in range(100):
            t = int(rng.integers(0, 4))
            h = History(obs=rng.standard_normal((t, 2)), actions=rng.choice([-1, 1], t),
                        outcomes=rng.standard_normal(t), pending=rng.standard_normal(2))
            hits += res.policy.allocate(h) == 1.0
        assert hits >= 80


class TestWindowedPolicy:
    def test_window_one_depends_only_on_last_step(self):
        # zero positional table: with window 1 the Q function sees only the
        # most recent triplet and the pending observation
        cfg = TrlConfig(d_model=8, n_heads=2, n_layers=1, d_ff=16, window=1,
                        epochs=1, episodes_per_epoch=1, grad_steps_per_epoch=0,
                        reward_mode="outcome", norm_episodes=0)
        res = train(_TinyEnv(), cfg, substream(20, "t"))
        params = {k: v.copy() for k, v in res.state.params.items()}
        params["pos.table"] = np.zeros_like(params["pos.table"])
        rng = np.random.default_rng(21)
        params["head.w"] = 0.5 * rng.standard_normal(params["head.w"].shape)
        policy = LearnedPolicy(params, res.net, res.norm, window=1)
        last = (np.array([0.4, -0.1]), 1, 0.6)
        pending = np.array([0.2, 0.9])
        probs = set()
        for _ in range(5):
            t = int(rng.integers(1, 6))
            obs = np.vstack([rng.standard_normal((t - 1, 2)), last[0][None]])
            actions = np.append(rng.choice([-1, 1], t - 1), last[1])
            outcomes = np.append(rng.standard_normal(t - 1), last[2])
            h = History(obs=obs, actions=actions, outcomes=outcomes, pending=pending)
            probs.add(policy.allocate(h))
        assert len(probs) == 1


@pytest.mark.slow
class TestTrainingLossTrend:
    def test_loss_moving_average_trends_down(self):
        from seqdesign import sim_linear
        env = sim_linear.LinearEnv(sim_linear.make_setting("i", n_days=10))
        truth = env.true_ate()
        cfg = TrlConfig(d_model=8, n_heads=2, n_layers=1, d_ff=16, epochs=150,
                        episodes_per_epoch=4, grad_steps_per_epoch=4, batch_size=16,
                        gamma_rl=0.9, warmup_days=3, norm_episodes=2,
                        replay_capacity=20000)
        res = train(env, cfg, substream(71, "trend"), ate_mc=truth)
        losses = np.array([row.loss for row in res.log])
        window = 50
        ma = np.convolve(losses, np.ones(window) / window, mode="valid")
        assert ma[-1] <= ma[0]
