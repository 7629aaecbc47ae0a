"""Structured dot-product attention over weight-space tokens.

Three attention summands are available, each with its own projections:

* ``KV1`` (row aggregation). The query for ``W_l[i, j]`` is row ``i`` of
  ``Q(W_l)``, a token indexed by the neurons of layer ``l-1``. Key/value
  tokens of the same shape are the rows of ``W_l`` (part ``"rows"``), the
  columns of ``W_{l-1}`` (``"prev_cols"``) and ``b_{l-1}`` (``"prev_bias"``).
  The attended token is read back at coordinate ``j``.
* ``KV2`` (column aggregation). The query for ``W_l[i, j]`` is column ``j``;
  keys are columns of ``W_l`` (``"cols"``), rows of ``W_{l+1}``
  (``"next_rows"``) and ``b_l`` (``"bias"``); read back at coordinate ``i``.
  Bias entries of layer ``l`` use the whole ``b_l`` as their query.
* ``KV3`` (global). Every entry is a ``c``-dimensional token; all entries are
  keys.

Parts that would reference a layer outside ``1..L`` are dropped. Projections
act on column vectors (``theta @ x``), so row-stacked tokens are multiplied by
``theta.T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import WeightElement
from ..errors import DimMismatch, EmptyKV, WSKitError
from .mlp import MLPSpec, mlp_from_layers

KV_PARTS = {
    "KV1": ("rows", "prev_cols", "prev_bias"),
    "KV2": ("cols", "next_rows", "bias"),
    "KV3": ("weights", "biases"),
}


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def attend(Q: np.ndarray, K: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Batched attention: ``Q`` (n, d), ``K`` (m, d), ``V`` (m, dv) -> (n, dv)."""
    if len(K) == 0:
        raise EmptyKV("attention needs at least one key/value pair")
    if Q.shape[-1] != K.shape[-1]:
        raise DimMismatch(f"query dim {Q.shape[-1]} != key dim {K.shape[-1]}")
    return softmax(Q @ K.T) @ V


def attention_weights(q, keys) -> np.ndarray:
    keys = np.atleast_2d(np.asarray(keys, dtype=np.float64))
    if keys.size == 0:
        raise EmptyKV("attention needs at least one key/value pair")
    return softmax(keys @ np.asarray(q, dtype=np.float64))


def nft_attention(q, kvs) -> np.ndarray:
    """Softmax(<q, k_p>)-weighted mean of the values ``v_p`` for ``kvs = [(k_p, v_p), ...]``."""
    if len(kvs) == 0:
        raise EmptyKV("attention needs at least one key/value pair")
    K = np.array([np.asarray(k, dtype=np.float64).reshape(-1) for k, _ in kvs])
    V = np.array([np.asarray(x, dtype=np.float64).reshape(-1) for _, x in kvs])
    return attend(np.asarray(q, dtype=np.float64).reshape(1, -1), K, V)[0]


def layernorm(x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def layer_encoding(v: WeightElement, phi_w, phi_b) -> WeightElement:
    """Add learned per-layer vectors ``phi_w[l]`` to weights and ``phi_b[l]`` to biases."""
    W = tuple(w + np.asarray(p, dtype=np.float64) for w, p in zip(v.W, phi_w))
    b = tuple(x + np.asarray(p, dtype=np.float64) for x, p in zip(v.b, phi_b))
    return WeightElement(v.arch, W, b)


@dataclass
class AttentionSummand:
    kind: str
    theta_q: np.ndarray
    theta_k: np.ndarray
    theta_v: np.ndarray
    parts: tuple | None = None  # None: every part of this kind
    layers: tuple | None = None  # 1-based layers whose entries are updated; None: all
    targets: tuple = ("weights", "biases")

    def __post_init__(self):
        if self.kind not in KV_PARTS:
            raise WSKitError(f"unknown attention kind {self.kind!r}")
        self.parts = KV_PARTS[self.kind] if self.parts is None else tuple(self.parts)
        bad = set(self.parts) - set(KV_PARTS[self.kind])
        if bad:
            raise WSKitError(f"{self.kind} has no parts {sorted(bad)}")
        for name in ("theta_q", "theta_k", "theta_v"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=np.float64)))
        c = self.theta_q.shape[0]
        if any(getattr(self, n).shape != (c, c) for n in ("theta_q", "theta_k", "theta_v")):
            raise DimMismatch("theta_Q, theta_K, theta_V must all be c x c")

    @property
    def channels(self) -> int:
        return self.theta_q.shape[0]

    def updates(self, layer: int, target: str) -> bool:
        if target == "biases" and self.kind == "KV1":
            return False
        return target in self.targets and (self.layers is None or layer in self.layers)


@dataclass
class NFTParams:
    summands: list = field(default_factory=list)
    mlp: MLPSpec | None = None
    use_layernorm: bool = True
    attn_residual: bool = True
    mlp_residual: bool = True
    ln_eps: float = 1e-5


@dataclass
class PoolParams:
    token: np.ndarray
    theta_q: np.ndarray
    theta_k: np.ndarray
    theta_v: np.ndarray


def _proj(v: WeightElement, theta: np.ndarray):
    return [w @ theta.T for w in v.W], [x @ theta.T for x in v.b]


def _summand_update(v: WeightElement, s: AttentionSummand):
    L, c = v.arch.L, v.channels
    Qw, Qb = _proj(v, s.theta_q)
    Kw, Kb = _proj(v, s.theta_k)
    Vw, Vb = _proj(v, s.theta_v)
    dW = [np.zeros(w.shape) for w in v.W]
    db = [np.zeros(x.shape) for x in v.b]
    mW = [False] * L
    mb = [False] * L

    if s.kind == "KV3":
        K = np.concatenate(
            ([w.reshape(-1, c) for w in Kw] if "weights" in s.parts else [])
            + ([x for x in Kb] if "biases" in s.parts else [])
        ) if s.parts else np.zeros((0, c))
        V = np.concatenate(
            ([w.reshape(-1, c) for w in Vw] if "weights" in s.parts else [])
            + ([x for x in Vb] if "biases" in s.parts else [])
        ) if s.parts else np.zeros((0, c))
        for l in range(L):
            if s.updates(l + 1, "weights"):
                dW[l] = attend(Qw[l].reshape(-1, c), K, V).reshape(v.W[l].shape)
                mW[l] = True
            if s.updates(l + 1, "biases"):
                db[l] = attend(Qb[l], K, V)
                mb[l] = True
        return dW, db, mW, mb

    for l in range(L):
        d_out, d_in = v.W[l].shape[:2]
        if s.kind == "KV1":
            if not s.updates(l + 1, "weights"):
                continue
            keys, vals = [], []
            if "rows" in s.parts:
                keys.append(Kw[l].reshape(d_out, -1))
                vals.append(Vw[l].reshape(d_out, -1))
            if "prev_cols" in s.parts and l > 0:
                n_prev = v.W[l - 1].shape[1]
                keys.append(Kw[l - 1].transpose(1, 0, 2).reshape(n_prev, -1))
                vals.append(Vw[l - 1].transpose(1, 0, 2).reshape(n_prev, -1))
            if "prev_bias" in s.parts and l > 0:
                keys.append(Kb[l - 1].reshape(1, -1))
                vals.append(Vb[l - 1].reshape(1, -1))
            if not keys:
                raise EmptyKV(f"KV1 is empty at layer {l + 1}")
            out = attend(Qw[l].reshape(d_out, -1), np.concatenate(keys), np.concatenate(vals))
            dW[l] = out.reshape(d_out, d_in, c)
            mW[l] = True
        else:  # KV2
            upd_w, upd_b = s.updates(l + 1, "weights"), s.updates(l + 1, "biases")
            if not (upd_w or upd_b):
                continue
            keys, vals = [], []
            if "cols" in s.parts:
                keys.append(Kw[l].transpose(1, 0, 2).reshape(d_in, -1))
                vals.append(Vw[l].transpose(1, 0, 2).reshape(d_in, -1))
            if "next_rows" in s.parts and l < L - 1:
                keys.append(Kw[l + 1].reshape(v.W[l + 1].shape[0], -1))
                vals.append(Vw[l + 1].reshape(v.W[l + 1].shape[0], -1))
            if "bias" in s.parts:
                keys.append(Kb[l].reshape(1, -1))
                vals.append(Vb[l].reshape(1, -1))
            if not keys:
                raise EmptyKV(f"KV2 is empty at layer {l + 1}")
            K, V = np.concatenate(keys), np.concatenate(vals)
            if upd_w:
                out = attend(Qw[l].transpose(1, 0, 2).reshape(d_in, -1), K, V)
                dW[l] = out.reshape(d_in, d_out, c).transpose(1, 0, 2)
                mW[l] = True
            if upd_b:
                db[l] = attend(Qb[l].reshape(1, -1), K, V).reshape(d_out, c)
                mb[l] = True
    return dW, db, mW, mb


def _self_attention(v: WeightElement, params: NFTParams):
    L, c = v.arch.L, v.channels
    dW = [np.zeros(w.shape) for w in v.W]
    db = [np.zeros(x.shape) for x in v.b]
    mW, mb = [False] * L, [False] * L
    for s in params.summands:
        if s.channels != c:
            raise DimMismatch(f"summand projections are {s.channels} x {s.channels}, features have c = {c}")
        sW, sb, smW, smb = _summand_update(v, s)
        for l in range(L):
            dW[l] = dW[l] + sW[l]
            db[l] = db[l] + sb[l]
            mW[l] = mW[l] or smW[l]
            mb[l] = mb[l] or smb[l]
    return WeightElement(v.arch, tuple(dW), tuple(db)), mW, mb


def nft_self_attention(v: WeightElement, params: NFTParams) -> WeightElement:
    """Sum of the enabled attention summands (zero where nothing is updated)."""
    return _self_attention(v, params)[0]


def _ln(v: WeightElement, params: NFTParams) -> WeightElement:
    return v.map_entries(lambda x: layernorm(x, params.ln_eps)) if params.use_layernorm else v


def nft_block(v: WeightElement, params: NFTParams) -> WeightElement:
    """z = v + SA(LN(v)); out = z + MLP(LN(z)), with LN and both residuals switchable.

    Without the attention residual, entries touched by some summand are
    replaced by the attention output and all others keep their value. Without
    the MLP residual the block returns MLP(LN(z)).
    """
    sa, mW, mb = _self_attention(_ln(v, params), params)
    if params.attn_residual:
        z = WeightElement(v.arch, tuple(a + b for a, b in zip(v.W, sa.W)), tuple(a + b for a, b in zip(v.b, sa.b)))
    else:
        z = WeightElement(
            v.arch,
            tuple(s if m else a for a, s, m in zip(v.W, sa.W, mW)),
            tuple(s if m else a for a, s, m in zip(v.b, sa.b, mb)),
        )
    if params.mlp is None:
        return z
    if params.mlp.in_dim != v.channels or params.mlp.out_dim != v.channels:
        raise DimMismatch(f"block MLP must map {v.channels} -> {v.channels} channels")
    m = _ln(z, params).map_entries(params.mlp)
    if not params.mlp_residual:
        return m
    return WeightElement(v.arch, tuple(a + b for a, b in zip(z.W, m.W)), tuple(a + b for a, b in zip(z.b, m.b)))


def all_tokens(v: WeightElement) -> np.ndarray:
    c = v.channels
    return np.concatenate([w.reshape(-1, c) for w in v.W] + list(v.b))


def nft_pool(v: WeightElement, pool: PoolParams) -> np.ndarray:
    """Cross-attention of one learned token against every weight and bias entry."""
    X = all_tokens(v)
    q = np.asarray(pool.theta_q, dtype=np.float64) @ np.asarray(pool.token, dtype=np.float64)
    K = X @ np.asarray(pool.theta_k, dtype=np.float64).T
    V = X @ np.asarray(pool.theta_v, dtype=np.float64).T
    return attend(q[None, :], K, V)[0]


def uniform_pool(c: int) -> PoolParams:
    """Zero query/key projections: pooling becomes the plain mean of all entries."""
    z = np.zeros((c, c))
    return PoolParams(np.zeros(c), z, z, np.eye(c))


def random_nft_params(c: int, rng: np.random.Generator, hidden: int = 4, scale: float = 0.5) -> NFTParams:
    def m():
        return rng.normal(0.0, scale, (c, c))

    summands = [AttentionSummand(k, m(), m(), m()) for k in ("KV1", "KV2", "KV3")]
    mlp = mlp_from_layers(
        [(rng.normal(0, scale, (hidden, c)), rng.normal(0, scale, hidden)), (rng.normal(0, scale, (c, hidden)), rng.normal(0, scale, c))],
        "relu",
    )
    return NFTParams(summands, mlp)


def threshold_mlp() -> MLPSpec:
    """Scalar ReLU ramp: 0 for x <= 0.8, 1 for x >= 0.85, linear in between."""
    return mlp_from_layers([([[20.0], [20.0]], [-16.0, -17.0]), ([[1.0, -1.0]], [0.0])], "relu")
