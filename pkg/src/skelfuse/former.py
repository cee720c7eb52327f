"""Transformer branch: joint/segment tokenization, single-head attention
blocks with residual layer normalization, feedforward blocks, mean pooling
and a linear head.

Block structure per layer:

    F = Norm(X + softmax((XWq)(XWk)^T / sqrt(d_h)) XWv Wo)
    Y = Norm(F + ReLU(F W1) W2)

Norm is per-token feature normalization (mean 0, variance 1, epsilon 1e-5
inside the square root) followed by learned scale and shift. Attention
logits are scaled by 1/sqrt(d_h). All arithmetic is float64; ``backward``
consumes the forward cache and is pinned by the finite-difference check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .gcn import he_uniform

LAYER_NORM_EPS = 1e-5


def tokenize(x: np.ndarray, segments: int) -> np.ndarray:
    """Turn a batch [B, M, T, V, C] into tokens [B, V*S, C].

    Token (v, s) is the mean of joint v's channel vector over persons and
    the frames of temporal segment s; token index is v*S + s. T is padded up
    to a multiple of S by repeating the last frame.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 5:
        raise DimensionError(f"batch must be [B, M, T, V, C], got {x.shape}")
    b, m, t, v, c = x.shape
    if segments < 1:
        raise ConfigError(f"segments must be >= 1, got {segments}")
    if segments > t:
        raise ConfigError(f"cannot split T={t} frames into {segments} segments")
    rem = (-t) % segments
    if rem:
        x = np.concatenate([x, np.repeat(x[:, :, -1:], rem, axis=2)], axis=2)
    seg_len = x.shape[2] // segments
    # [B, M, S, seg_len, V, C] -> mean over persons and in-segment frames
    segs = x.reshape(b, m, segments, seg_len, v, c).mean(axis=(1, 3))
    tokens = segs.transpose(0, 2, 1, 3).reshape(b, v * segments, c)
    return tokens


def positional_encode(tokens: np.ndarray, pos_table: np.ndarray) -> np.ndarray:
    """Add a learned per-token table [N, d] to tokens [B, N, d]."""
    if pos_table.shape != tokens.shape[1:]:
        raise DimensionError(
            f"positional table {pos_table.shape} does not match tokens "
            f"{tokens.shape[1:]}")
    return tokens + pos_table


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    """Per-token feature normalization; returns (out, cache for backward)."""
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    xhat = centered * inv_std
    return xhat * gamma + beta, (xhat, inv_std, gamma)


def layer_norm_backward(dout: np.ndarray, cache):
    xhat, inv_std, gamma = cache
    d = xhat.shape[-1]
    dgamma = (dout * xhat).sum(axis=tuple(range(dout.ndim - 1)))
    dbeta = dout.sum(axis=tuple(range(dout.ndim - 1)))
    dxhat = dout * gamma
    dx = (inv_std / d) * (d * dxhat
                          - dxhat.sum(axis=-1, keepdims=True)
                          - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
    return dx, dgamma, dbeta


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class AttentionParams:
    """Single-head attention weights plus the post-residual norm parameters."""

    W_Q: np.ndarray   # [d, d_h]
    W_K: np.ndarray   # [d, d_h]
    W_V: np.ndarray   # [d, d_h]
    W_O: np.ndarray   # [d_h, d]
    norm_gamma: np.ndarray  # [d]
    norm_beta: np.ndarray   # [d]

    def __post_init__(self):
        d, d_h = self.W_Q.shape
        if d < 1 or d_h < 1:
            raise DimensionError(f"attention dims must be >= 1, got {self.W_Q.shape}")
        for name, w, shape in (("W_K", self.W_K, (d, d_h)),
                               ("W_V", self.W_V, (d, d_h)),
                               ("W_O", self.W_O, (d_h, d)),
                               ("norm_gamma", self.norm_gamma, (d,)),
                               ("norm_beta", self.norm_beta, (d,))):
            if w.shape != shape:
                raise DimensionError(f"{name} has shape {w.shape}, want {shape}")


def attention_weights(x: np.ndarray, p: AttentionParams) -> np.ndarray:
    """Row-stochastic attention matrix [B, N, N] (rows sum to 1)."""
    q = x @ p.W_Q
    k = x @ p.W_K
    logits = q @ k.swapaxes(-1, -2) / np.sqrt(p.W_Q.shape[1])
    return _softmax_rows(logits)


def attention_block_forward(x: np.ndarray, p: AttentionParams,
                            return_cache: bool = False):
    """Norm(X + Attention(XWq, XWk, XWv) Wo) for X of shape [B, N, d]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"tokens must be [B, N, d], got {x.shape}")
    if x.shape[2] != p.W_Q.shape[0]:
        raise DimensionError(
            f"token width {x.shape[2]} does not match W_Q {p.W_Q.shape}")
    q = x @ p.W_Q
    k = x @ p.W_K
    v = x @ p.W_V
    logits = q @ k.swapaxes(-1, -2) / np.sqrt(p.W_Q.shape[1])
    attn = _softmax_rows(logits)
    ctx = attn @ v
    out, norm_cache = layer_norm(x + ctx @ p.W_O, p.norm_gamma, p.norm_beta)
    if not return_cache:
        return out
    return out, {"x": x, "q": q, "k": k, "v": v, "attn": attn, "ctx": ctx,
                 "norm": norm_cache}


def attention_block_backward(dout: np.ndarray, p: AttentionParams, cache):
    """Gradients of the attention block; returns (dx, grads dict)."""
    x, q, k, v = cache["x"], cache["q"], cache["k"], cache["v"]
    attn, ctx = cache["attn"], cache["ctx"]
    dres, dgamma, dbeta = layer_norm_backward(dout, cache["norm"])
    d = x.shape[-1]
    d_h = p.W_Q.shape[1]
    dx = dres.copy()
    dctx = dres @ p.W_O.T
    d_wo = ctx.reshape(-1, d_h).T @ dres.reshape(-1, d)
    dattn = dctx @ v.swapaxes(-1, -2)
    dv = attn.swapaxes(-1, -2) @ dctx
    # softmax backward per row: dL = P * (dP - sum(dP * P))
    dlogits = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dlogits /= np.sqrt(d_h)
    dq = dlogits @ k
    dk = dlogits.swapaxes(-1, -2) @ q
    x_flat = x.reshape(-1, d)
    d_wq = x_flat.T @ dq.reshape(-1, d_h)
    d_wk = x_flat.T @ dk.reshape(-1, d_h)
    d_wv = x_flat.T @ dv.reshape(-1, d_h)
    dx += dq @ p.W_Q.T + dk @ p.W_K.T + dv @ p.W_V.T
    grads = {"W_Q": d_wq, "W_K": d_wk, "W_V": d_wv, "W_O": d_wo,
             "norm_gamma": dgamma, "norm_beta": dbeta}
    return dx, grads


@dataclass
class FeedforwardParams:
    """Position-wise two-layer MLP plus its post-residual norm parameters."""

    W1: np.ndarray  # [d, d_ff]
    W2: np.ndarray  # [d_ff, d]
    norm_gamma: np.ndarray
    norm_beta: np.ndarray

    def __post_init__(self):
        d, d_ff = self.W1.shape
        if self.W2.shape != (d_ff, d):
            raise DimensionError(
                f"W2 has shape {self.W2.shape}, want {(d_ff, d)}")
        if self.norm_gamma.shape != (d,) or self.norm_beta.shape != (d,):
            raise DimensionError("norm parameters do not match token width")


def feedforward_block(f: np.ndarray, p: FeedforwardParams,
                      return_cache: bool = False):
    """Norm(F + ReLU(F W1) W2) per token."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3 or f.shape[2] != p.W1.shape[0]:
        raise DimensionError(
            f"tokens {f.shape} do not match feedforward W1 {p.W1.shape}")
    pre = f @ p.W1
    hidden = np.maximum(pre, 0.0)
    out, norm_cache = layer_norm(f + hidden @ p.W2, p.norm_gamma, p.norm_beta)
    if not return_cache:
        return out
    return out, {"f": f, "mask": pre > 0, "hidden": hidden, "norm": norm_cache}


def feedforward_block_backward(dout: np.ndarray, p: FeedforwardParams, cache):
    dres, dgamma, dbeta = layer_norm_backward(dout, cache["norm"])
    d, d_ff = p.W1.shape
    df = dres.copy()
    dhidden = dres @ p.W2.T
    d_w2 = cache["hidden"].reshape(-1, d_ff).T @ dres.reshape(-1, d)
    dpre = dhidden * cache["mask"]
    d_w1 = cache["f"].reshape(-1, d).T @ dpre.reshape(-1, d_ff)
    df += dpre @ p.W1.T
    return df, {"W1": d_w1, "W2": d_w2, "norm_gamma": dgamma, "norm_beta": dbeta}


@dataclass
class FormerModel:
    """Tokenize -> embed -> positional encode -> blocks -> mean pool -> head."""

    num_joints: int
    segments: int
    embed_W: np.ndarray                 # [C, d]
    pos_table: np.ndarray               # [V*S, d]
    blocks: list[tuple[AttentionParams, FeedforwardParams]]
    head_W: np.ndarray                  # [d, K]

    def __post_init__(self):
        if self.num_joints < 1 or self.segments < 1:
            raise ConfigError("num_joints and segments must be >= 1")
        n = self.num_joints * self.segments
        d = self.embed_W.shape[1]
        if self.pos_table.shape != (n, d):
            raise DimensionError(
                f"positional table {self.pos_table.shape} does not match "
                f"{n} tokens of width {d}")
        if not self.blocks:
            raise ConfigError("model needs at least one block")
        if self.head_W.shape[0] != d:
            raise DimensionError(
                f"head input {self.head_W.shape[0]} does not match width {d}")

    @property
    def branch(self) -> str:
        return "former"

    @property
    def num_classes(self) -> int:
        return self.head_W.shape[1]

    @property
    def in_channels(self) -> int:
        return self.embed_W.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        out = {"embed.W": self.embed_W, "pos.table": self.pos_table}
        for i, (attn, ffn) in enumerate(self.blocks):
            for name in ("W_Q", "W_K", "W_V", "W_O", "norm_gamma", "norm_beta"):
                out[f"blocks.{i}.attn.{name}"] = getattr(attn, name)
            for name in ("W1", "W2", "norm_gamma", "norm_beta"):
                out[f"blocks.{i}.ffn.{name}"] = getattr(ffn, name)
        out["head.W"] = self.head_W
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 5:
            raise DimensionError(f"batch must be [B, M, T, V, C], got {x.shape}")
        if x.shape[3] != self.num_joints:
            raise DimensionError(
                f"batch has V={x.shape[3]}, model expects {self.num_joints}")
        if x.shape[4] != self.in_channels:
            raise DimensionError(
                f"batch has C={x.shape[4]}, model expects {self.in_channels}")
        tokens = tokenize(x, self.segments)
        h = positional_encode(tokens @ self.embed_W, self.pos_table)
        block_caches = []
        for attn, ffn in self.blocks:
            h, a_cache = attention_block_forward(h, attn, return_cache=True)
            h, f_cache = feedforward_block(h, ffn, return_cache=True)
            block_caches.append((a_cache, f_cache))
        pooled = h.mean(axis=1)
        logits = pooled @ self.head_W
        cache = {"tokens": tokens, "pooled": pooled, "blocks": block_caches,
                 "num_tokens": h.shape[1]}
        return logits, cache

    def backward(self, dlogits: np.ndarray, cache: dict) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {
            "head.W": cache["pooled"].T @ dlogits,
        }
        n = cache["num_tokens"]
        dh = np.broadcast_to(
            (dlogits @ self.head_W.T)[:, None, :] / n,
            (dlogits.shape[0], n, self.head_W.shape[0])).copy()
        for i in range(len(self.blocks) - 1, -1, -1):
            attn, ffn = self.blocks[i]
            a_cache, f_cache = cache["blocks"][i]
            dh, ffn_grads = feedforward_block_backward(dh, ffn, f_cache)
            for name, g in ffn_grads.items():
                grads[f"blocks.{i}.ffn.{name}"] = g
            dh, attn_grads = attention_block_backward(dh, attn, a_cache)
            for name, g in attn_grads.items():
                grads[f"blocks.{i}.attn.{name}"] = g
        grads["pos.table"] = dh.sum(axis=0)
        c = self.embed_W.shape[0]
        grads["embed.W"] = (cache["tokens"].reshape(-1, c).T
                            @ dh.reshape(-1, self.embed_W.shape[1]))
        return grads


def init_former_model(num_joints: int, num_classes: int, in_channels: int,
                      segments: int = 4, width: int = 64, depth: int = 2,
                      ffn_width: int = 128, seed: int = 0) -> FormerModel:
    """Seeded desk-scale model: He-uniform weights, ones/zeros norm params,
    zero positional table (positions are learned from scratch)."""
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
    if in_channels not in (2, 3):
        raise ConfigError(f"in_channels must be 2 or 3, got {in_channels}")
    if width < 1 or depth < 1 or ffn_width < 1 or segments < 1:
        raise ConfigError("width, depth, ffn_width, segments must be >= 1")
    rng = np.random.default_rng(seed)
    d_h = width
    blocks = []
    for _ in range(depth):
        attn = AttentionParams(
            W_Q=he_uniform(rng, (width, d_h), width),
            W_K=he_uniform(rng, (width, d_h), width),
            W_V=he_uniform(rng, (width, d_h), width),
            W_O=he_uniform(rng, (d_h, width), d_h),
            norm_gamma=np.ones(width),
            norm_beta=np.zeros(width))
        ffn = FeedforwardParams(
            W1=he_uniform(rng, (width, ffn_width), width),
            W2=he_uniform(rng, (ffn_width, width), ffn_width),
            norm_gamma=np.ones(width),
            norm_beta=np.zeros(width))
        blocks.append((attn, ffn))
    return FormerModel(
        num_joints=num_joints,
        segments=segments,
        embed_W=he_uniform(rng, (in_channels, width), in_channels),
        pos_table=np.zeros((num_joints * segments, width)),
        blocks=blocks,
        head_W=he_uniform(rng, (width, num_classes), width))
