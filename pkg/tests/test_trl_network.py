import numpy as np
import pytest

from seqdesign.core import History
from seqdesign.trl.network import (
    NetConfig,
    encode_history,
    init_params,
    layer_norm,
    param_groups,
    qnet_backward,
    qnet_forward,
)

CFG = NetConfig(obs_dim=2, d_model=16, n_heads=2, n_layers=2, d_ff=32, max_seq_len=32)


def make_params(seed, random_head=True):
    rng = np.random.default_rng(seed)
    params = init_params(CFG, rng)
    if random_head:
        params["head.w"] = 0.5 * rng.standard_normal(params["head.w"].shape)
        params["head.b"] = 0.1 * rng.standard_normal(2)
    return params


def make_history(n_steps, seed=0):
    rng = np.random.default_rng(seed)
    return History(
        obs=rng.standard_normal((n_steps, 2)),
        actions=rng.choice([-1, 1], n_steps),
        outcomes=rng.standard_normal(n_steps),
        pending=rng.standard_normal(2),
    )


class TestEncodeHistory:
    def encode(self, history, window=None):
        return encode_history(history, CFG, np.zeros(2), np.ones(2), 0.0, 1.0, window)

    def test_sequence_lengths(self):
        assert self.encode(make_history(5)).shape == (6, 4)
        assert self.encode(make_history(0)).shape == (1, 4)

    def test_window_truncation(self):
        tokens = self.encode(make_history(20), window=6)
        assert tokens.shape == (7, 4)

    def test_pending_slots_zeroed(self):
        h = make_history(3)
        tokens = self.encode(h)
        assert tokens[-1, 2] == 0.0 and tokens[-1, 3] == 0.0
        np.testing.assert_array_equal(tokens[-1, :2], h.pending)

    def test_normalization_applied(self):
        h = make_history(4)
        tokens = encode_history(h, CFG, np.array([1.0, 2.0]), np.array([2.0, 4.0]), 0.5, 2.0)
        np.testing.assert_allclose(tokens[0, :2], (h.obs[0] - [1.0, 2.0]) / [2.0, 4.0])
        assert tokens[0, 3] == pytest.approx((h.outcomes[0] - 0.5) / 2.0)

    def test_dimension_mismatch(self):
        h = History(obs=np.zeros((2, 3)), actions=np.array([1, -1]),
                    outcomes=np.zeros(2), pending=np.zeros(3))
        with pytest.raises(ValueError):
            encode_history(h, CFG, np.zeros(3), np.ones(3), 0.0, 1.0)


class TestForward:
    def test_zero_head_gives_zero_q(self):
        params = make_params(0, random_head=False)
        tokens = np.random.default_rng(1).standard_normal((2, 5, 4))
        q = qnet_forward(params, tokens, CFG)
        np.testing.assert_array_equal(q, np.zeros((2, 5, 2)))

    def test_causal_mask_exact(self):
        params = make_params(2)
        rng = np.random.default_rng(3)
        tokens = rng.standard_normal((3, 8, 4))
        base = qnet_forward(params, tokens, CFG)
        for trial in range(100):
            cut = rng.integers(1, 8)
            perturbed = tokens.copy()
            perturbed[:, cut:, :] = rng.standard_normal((3, 8 - cut, 4)) * 5
            q = qnet_forward(params, perturbed, CFG)
            assert np.array_equal(base[:, :cut], q[:, :cut])

    def test_positional_encoding_orders_tokens(self):
        params = make_params(4)
        rng = np.random.default_rng(5)
        tokens = rng.standard_normal((1, 6, 4))
        swapped = tokens.copy()
        swapped[0, [1, 3]] = swapped[0, [3, 1]]
        q1 = qnet_forward(params, tokens, CFG)[0, -1]
        q2 = qnet_forward(params, swapped, CFG)[0, -1]
        assert not np.allclose(q1, q2)

    def test_nan_parameters_rejected(self):
        params = make_params(6)
        params["embed.w"][0, 0] = np.nan
        with pytest.raises(ValueError, match="embed.w"):
            qnet_forward(params, np.zeros((1, 2, 4)), CFG)

    def test_max_seq_len_enforced(self):
        params = make_params(7)
        with pytest.raises(ValueError):
            qnet_forward(params, np.zeros((1, 33, 4)), CFG)


class TestLayerNorm:
    def test_pre_affine_moments(self):
        rng = np.random.default_rng(8)
        x = 3.0 + 2.5 * rng.standard_normal((4, 7, 16))
        _, (xhat, _, _) = layer_norm(x, np.ones(16), np.zeros(16))
        np.testing.assert_allclose(xhat.mean(axis=-1), 0.0, atol=1e-6)
        np.testing.assert_allclose(xhat.var(axis=-1), 1.0, atol=1e-6)


class TestGradients:
    @staticmethod
    def loss_and_grads(params, tokens, dq):
        q, cache = qnet_forward(params, tokens, CFG, need_cache=True)
        loss = float((q * dq).sum())
        grads = qnet_backward(params, cache, dq, CFG)
        return loss, grads

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_difference_all_groups(self, seed):
        rng = np.random.default_rng(seed)
        params = make_params(seed)
        tokens = rng.standard_normal((2, 5, 4))
        dq = rng.standard_normal((2, 5, 2))

        def loss_fn():
            return float((qnet_forward(params, tokens, CFG) * dq).sum())

        _, grads = self.loss_and_grads(params, tokens, dq)
        h = 1e-5
        pick = np.random.default_rng(seed + 100)
        for group, names in param_groups(params).items():
            worst = 0.0
            for name in names:
                flat = params[name].reshape(-1)
                for i in pick.choice(flat.size, size=min(4, flat.size), replace=False):
                    orig = flat[i]
                    flat[i] = orig + h
                    lp = loss_fn()
                    flat[i] = orig - h
                    lm = loss_fn()
                    flat[i] = orig
                    fd = (lp - lm) / (2 * h)
                    an = grads[name].reshape(-1)[i]
                    worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-6))
            assert worst <= 1e-4, f"{group} gradient error {worst}"

    def test_padding_is_inert(self):
        # gradients and outputs at real positions ignore right padding
        params = make_params(9)
        rng = np.random.default_rng(10)
        tokens = rng.standard_normal((1, 4, 4))
        padded = np.zeros((1, 6, 4))
        padded[0, :4] = tokens[0]
        q_short = qnet_forward(params, tokens, CFG)
        q_long = qnet_forward(params, padded, CFG)
        np.testing.assert_allclose(q_short[0], q_long[0, :4], atol=1e-12)


class TestIncrementalForward:
    def test_matches_full_forward_through_replace_append(self):
        from seqdesign.trl.network import IncrementalQNet
        rng = np.random.default_rng(30)
        params = make_params(30)
        b, horizon = 4, 12
        completed = rng.standard_normal((b, horizon, 4))
        pendings = rng.standard_normal((b, horizon, 4))
        inc = IncrementalQNet(params, CFG, b)
        for t in range(1, horizon + 1):
            q_inc = inc.set_token(t - 1, pendings[:, t - 1, :])
            seq = np.concatenate([completed[:, : t - 1, :], pendings[:, t - 1: t, :]], axis=1)
            q_full = qnet_forward(params, seq, CFG)[:, -1, :]
            np.testing.assert_allclose(q_inc, q_full, atol=1e-10)
            if t < horizon:
                inc.set_token(t - 1, completed[:, t - 1, :])

    def test_out_of_order_write_rejected(self):
        from seqdesign.trl.network import IncrementalQNet
        inc = IncrementalQNet(make_params(31), CFG, 2)
        with pytest.raises(ValueError):
            inc.set_token(3, np.zeros((2, 4)))


class TestParamGroups:
    def test_every_parameter_grouped(self):
        params = make_params(11)
        groups = param_groups(params)
        grouped = [n for names in groups.values() for n in names]
        assert sorted(grouped) == sorted(params)
        assert groups["head"] == ["head.w", "head.b"] or set(groups["head"]) == {"head.w", "head.b"}
