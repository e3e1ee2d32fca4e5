"""Masked self-attention Q-network over variable-length histories.

Implemented directly on numpy in double precision with hand-derived backward
passes, so gradient correctness is checkable against finite differences and
the causal mask's guarantees hold bit-for-bit: a position's output is an
exact function of the tokens at or before it.

Architecture (pre-norm):
    tokens -> linear embed + learned positional table
    n_layers x [x += MHA(LN(x)); x += FFN(LN(x))]
    final LN -> linear head -> 2 Q-values per position (order: action -1, +1)

Each completed (observation, action, outcome) triplet becomes one token of
concatenated (normalized obs, action, normalized outcome); the pending
observation becomes a final token with the action/outcome slots zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .. import core
from ..core import History

_LN_EPS = 1e-12
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class NetConfig:
    obs_dim: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    max_seq_len: int = 128

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if min(self.d_model, self.n_heads, self.n_layers, self.d_ff, self.max_seq_len) < 1:
            raise ValueError("all widths must be >= 1")

    @property
    def token_dim(self) -> int:
        return self.obs_dim + 2

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def init_params(config: NetConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Scaled-normal initialization; the output head starts at zero so the
    untrained network scores both actions identically."""
    d, f, k = config.d_model, config.d_ff, config.token_dim
    p: dict[str, np.ndarray] = {
        "embed.w": rng.standard_normal((k, d)) / np.sqrt(k),
        "embed.b": np.zeros(d),
        "pos.table": 0.02 * rng.standard_normal((config.max_seq_len, d)),
        "head.w": np.zeros((d, 2)),
        "head.b": np.zeros(2),
        "ln_f.g": np.ones(d),
        "ln_f.b": np.zeros(d),
    }
    for layer in range(config.n_layers):
        pre = f"layer{layer}."
        for name in ("q", "k", "v", "o"):
            p[pre + f"attn.w{name}"] = rng.standard_normal((d, d)) / np.sqrt(d)
            if name != "k":  # a key bias shifts every score of a query equally;
                p[pre + f"attn.b{name}"] = np.zeros(d)  # softmax cancels it exactly
        p[pre + "ln1.g"] = np.ones(d)
        p[pre + "ln1.b"] = np.zeros(d)
        p[pre + "ln2.g"] = np.ones(d)
        p[pre + "ln2.b"] = np.zeros(d)
        p[pre + "ffn.w1"] = rng.standard_normal((d, f)) / np.sqrt(d)
        p[pre + "ffn.b1"] = np.zeros(f)
        p[pre + "ffn.w2"] = rng.standard_normal((f, d)) / np.sqrt(f)
        p[pre + "ffn.b2"] = np.zeros(d)
    return p


def param_groups(params: dict[str, np.ndarray]) -> dict[str, list[str]]:
    """Parameter names bucketed by functional group (for gradient audits)."""
    groups: dict[str, list[str]] = {"embedding": [], "positional": [], "attention": [],
                                    "feedforward": [], "layernorm": [], "head": []}
    for name in params:
        if name.startswith("embed."):
            groups["embedding"].append(name)
        elif name.startswith("pos."):
            groups["positional"].append(name)
        elif ".attn." in name:
            groups["attention"].append(name)
        elif ".ffn." in name:
            groups["feedforward"].append(name)
        elif "ln" in name:
            groups["layernorm"].append(name)
        else:
            groups["head"].append(name)
    return groups


def encode_history(history: History, config: NetConfig,
                   obs_loc: np.ndarray, obs_scale: np.ndarray,
                   y_loc: float, y_scale: float,
                   window: int | None = None) -> np.ndarray:
    """Token sequence for a history: one token per completed triplet plus the
    pending-observation token with zeroed action/outcome slots."""
    if history.obs_dim != config.obs_dim:
        raise ValueError(f"history carries {history.obs_dim}-dim observations, "
                         f"network expects {config.obs_dim}")
    history = core.history_window(history, window)
    n = len(history)
    tokens = np.zeros((n + 1, config.token_dim))
    if n:
        tokens[:n, : config.obs_dim] = (history.obs - obs_loc) / obs_scale
        tokens[:n, config.obs_dim] = history.actions
        tokens[:n, config.obs_dim + 1] = (history.outcomes - y_loc) / y_scale
    tokens[n, : config.obs_dim] = (history.pending - obs_loc) / obs_scale
    return tokens


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    """Per-token normalization; returns output and the cache for backward."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return gain * xhat + bias, (xhat, inv, gain)


def _layer_norm_backward(dy: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv, gain = cache
    dgain = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    dbias = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gain
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dgain, dbias


def _gelu(x: np.ndarray):
    phi = ndtr(x)
    return x * phi, phi


def _gelu_backward(dy: np.ndarray, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
    pdf = np.exp(-0.5 * x ** 2) * _INV_SQRT_2PI
    return dy * (phi + x * pdf)


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def qnet_forward(params: dict[str, np.ndarray], tokens: np.ndarray,
                 config: NetConfig, need_cache: bool = False):
    """Batched forward pass.

    ``tokens`` is (batch, seq, token_dim); sequences are left-aligned and the
    causal mask keeps any right padding inert for real positions. Returns
    Q-values of shape (batch, seq, 2) and, optionally, the backward cache.
    """
    for name, value in params.items():
        if not np.all(np.isfinite(value)):
            raise ValueError(f"non-finite entries in parameter {name}")
    tokens = np.asarray(tokens, dtype=float)
    if tokens.ndim == 2:
        tokens = tokens[None, :, :]
    b, t, _ = tokens.shape
    if t > config.max_seq_len:
        raise ValueError(f"sequence length {t} exceeds max_seq_len {config.max_seq_len}")
    d, h = config.d_model, config.n_heads
    scale = 1.0 / np.sqrt(config.head_dim)
    causal = np.tril(np.ones((t, t), dtype=bool))

    x = tokens @ params["embed.w"] + params["embed.b"] + params["pos.table"][:t]
    cache: dict = {"tokens": tokens, "layers": []}
    for layer in range(config.n_layers):
        pre = f"layer{layer}."
        lc: dict = {}
        lc["x_in"] = x
        h1, lc["ln1"] = layer_norm(x, params[pre + "ln1.g"], params[pre + "ln1.b"])
        lc["h1"] = h1
        q = _split_heads(h1 @ params[pre + "attn.wq"] + params[pre + "attn.bq"], h)
        k = _split_heads(h1 @ params[pre + "attn.wk"], h)
        v = _split_heads(h1 @ params[pre + "attn.wv"] + params[pre + "attn.bv"], h)
        scores = np.where(causal, q @ k.transpose(0, 1, 3, 2) * scale, -np.inf)
        scores_max = scores.max(axis=-1, keepdims=True)
        expo = np.exp(scores - scores_max)
        attn = expo / expo.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(attn @ v)
        attn_out = ctx @ params[pre + "attn.wo"] + params[pre + "attn.bo"]
        x = x + attn_out
        lc.update(q=q, k=k, v=v, attn=attn, ctx=ctx)
        lc["x_mid"] = x
        h2, lc["ln2"] = layer_norm(x, params[pre + "ln2.g"], params[pre + "ln2.b"])
        lc["h2"] = h2
        pre_act = h2 @ params[pre + "ffn.w1"] + params[pre + "ffn.b1"]
        act, phi = _gelu(pre_act)
        x = x + act @ params[pre + "ffn.w2"] + params[pre + "ffn.b2"]
        lc.update(pre_act=pre_act, act=act, phi=phi)
        cache["layers"].append(lc)
    cache["x_pre_final"] = x
    xf, cache["ln_f"] = layer_norm(x, params["ln_f.g"], params["ln_f.b"])
    cache["xf"] = xf
    q_values = xf @ params["head.w"] + params["head.b"]
    if need_cache:
        return q_values, cache
    return q_values


def qnet_backward(params: dict[str, np.ndarray], cache: dict, dq: np.ndarray,
                  config: NetConfig) -> dict[str, np.ndarray]:
    """Exact gradients of a scalar loss given dLoss/dQ at every position."""
    grads = {name: np.zeros_like(value) for name, value in params.items()}
    h = config.n_heads
    scale = 1.0 / np.sqrt(config.head_dim)

    xf = cache["xf"]
    grads["head.w"] += np.einsum("btd,bto->do", xf, dq)
    grads["head.b"] += dq.sum(axis=(0, 1))
    dxf = dq @ params["head.w"].T
    dx, dg, db = _layer_norm_backward(dxf, cache["ln_f"])
    grads["ln_f.g"] += dg
    grads["ln_f.b"] += db

    for layer in range(config.n_layers - 1, -1, -1):
        pre = f"layer{layer}."
        lc = cache["layers"][layer]
        # FFN branch
        dffn_out = dx
        grads[pre + "ffn.w2"] += np.einsum("btf,btd->fd", lc["act"], dffn_out)
        grads[pre + "ffn.b2"] += dffn_out.sum(axis=(0, 1))
        dact = dffn_out @ params[pre + "ffn.w2"].T
        dpre = _gelu_backward(dact, lc["pre_act"], lc["phi"])
        grads[pre + "ffn.w1"] += np.einsum("btd,btf->df", lc["h2"], dpre)
        grads[pre + "ffn.b1"] += dpre.sum(axis=(0, 1))
        dh2 = dpre @ params[pre + "ffn.w1"].T
        dx_mid, dg, db = _layer_norm_backward(dh2, lc["ln2"])
        grads[pre + "ln2.g"] += dg
        grads[pre + "ln2.b"] += db
        dx = dx + dx_mid  # residual

        # attention branch
        dattn_out = dx
        grads[pre + "attn.wo"] += np.einsum("btd,bte->de", lc["ctx"], dattn_out)
        grads[pre + "attn.bo"] += dattn_out.sum(axis=(0, 1))
        dctx = _split_heads(dattn_out @ params[pre + "attn.wo"].T, h)
        attn, q, k, v = lc["attn"], lc["q"], lc["k"], lc["v"]
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dq_heads = dscores @ k * scale
        dk_heads = dscores.transpose(0, 1, 3, 2) @ q * scale
        dq_flat = _merge_heads(dq_heads)
        dk_flat = _merge_heads(dk_heads)
        dv_flat = _merge_heads(dv)
        h1 = lc["h1"]
        grads[pre + "attn.wq"] += np.einsum("btd,bte->de", h1, dq_flat)
        grads[pre + "attn.bq"] += dq_flat.sum(axis=(0, 1))
        grads[pre + "attn.wk"] += np.einsum("btd,bte->de", h1, dk_flat)
        grads[pre + "attn.wv"] += np.einsum("btd,bte->de", h1, dv_flat)
        grads[pre + "attn.bv"] += dv_flat.sum(axis=(0, 1))
        dh1 = (dq_flat @ params[pre + "attn.wq"].T
               + dk_flat @ params[pre + "attn.wk"].T
               + dv_flat @ params[pre + "attn.wv"].T)
        dx_in, dg, db = _layer_norm_backward(dh1, lc["ln1"])
        grads[pre + "ln1.g"] += dg
        grads[pre + "ln1.b"] += db
        dx = dx + dx_in  # residual

    tokens = cache["tokens"]
    t = tokens.shape[1]
    grads["embed.w"] += np.einsum("btk,btd->kd", tokens, dx)
    grads["embed.b"] += dx.sum(axis=(0, 1))
    grads["pos.table"][:t] += dx.sum(axis=0)
    return grads


class IncrementalQNet:
    """Key/value-cached forward pass for lockstep rollouts.

    Histories grow by replacing the pending-observation token with its
    completed triplet and appending the next pending token; under the causal
    mask both operations touch exactly one position, so per-step cost stays
    linear in the current length instead of quadratic. Only valid for
    unwindowed histories (a sliding window re-indexes positions).

    ``set_token(pos, tokens)`` recomputes position ``pos`` for every batch row
    and returns that position's Q-values; positions must be written in
    nondecreasing order.
    """

    def __init__(self, params: dict[str, np.ndarray], config: NetConfig, batch_size: int):
        self.params = params
        self.config = config
        self.b = batch_size
        d = config.d_model
        h, dh = config.n_heads, config.head_dim
        cap = config.max_seq_len
        self._k = [np.zeros((batch_size, h, cap, dh)) for _ in range(config.n_layers)]
        self._v = [np.zeros((batch_size, h, cap, dh)) for _ in range(config.n_layers)]
        self._len = 0
        self._scale = 1.0 / np.sqrt(dh)

    def set_token(self, pos: int, tokens: np.ndarray) -> np.ndarray:
        if pos > self._len or pos >= self.config.max_seq_len:
            raise ValueError(f"position {pos} out of order (cache length {self._len})")
        p, cfg = self.params, self.config
        h, dh = cfg.n_heads, cfg.head_dim
        x = tokens @ p["embed.w"] + p["embed.b"] + p["pos.table"][pos]
        for layer in range(cfg.n_layers):
            pre = f"layer{layer}."
            h1, _ = layer_norm(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
            q = (h1 @ p[pre + "attn.wq"] + p[pre + "attn.bq"]).reshape(self.b, h, dh)
            k = (h1 @ p[pre + "attn.wk"]).reshape(self.b, h, dh)
            v = (h1 @ p[pre + "attn.wv"] + p[pre + "attn.bv"]).reshape(self.b, h, dh)
            self._k[layer][:, :, pos, :] = k
            self._v[layer][:, :, pos, :] = v
            keys = self._k[layer][:, :, : pos + 1, :]
            vals = self._v[layer][:, :, : pos + 1, :]
            scores = np.einsum("bhd,bhtd->bht", q, keys) * self._scale
            scores -= scores.max(axis=-1, keepdims=True)
            expo = np.exp(scores)
            attn = expo / expo.sum(axis=-1, keepdims=True)
            ctx = np.einsum("bht,bhtd->bhd", attn, vals).reshape(self.b, h * dh)
            x = x + ctx @ p[pre + "attn.wo"] + p[pre + "attn.bo"]
            h2, _ = layer_norm(x, p[pre + "ln2.g"], p[pre + "ln2.b"])
            act, _ = _gelu(h2 @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"])
            x = x + act @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"]
        xf, _ = layer_norm(x, p["ln_f.g"], p["ln_f.b"])
        self._len = max(self._len, pos + 1)
        return xf @ p["head.w"] + p["head.b"]


def qnet_q_final(params: dict[str, np.ndarray], tokens_batch: list[np.ndarray],
                 config: NetConfig) -> np.ndarray:
    """Q-values at each sequence's final position for a ragged batch."""
    lengths = [tok.shape[0] for tok in tokens_batch]
    t_max = max(lengths)
    padded = np.zeros((len(tokens_batch), t_max, config.token_dim))
    for i, tok in enumerate(tokens_batch):
        padded[i, : tok.shape[0]] = tok
    q = qnet_forward(params, padded, config)
    return np.stack([q[i, lengths[i] - 1] for i in range(len(tokens_batch))])
