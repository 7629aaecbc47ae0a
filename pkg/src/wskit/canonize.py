"""Neuron identification by bias rank and the sorting-based canonization map.

Everything in here is integer bookkeeping plus data movement; no float
arithmetic touches the weight values, which is what makes the G-invariance
of :func:`canon` bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    GroupElement,
    WeightElement,
    entry_index,
    flatten,
    unflatten,
)
from .errors import TiedBiases, UnsupportedChannels

N_TAG = 5


@dataclass(frozen=True)
class BiasRanks:
    ranks: tuple[tuple[int, ...], ...]


@dataclass(frozen=True, eq=False)
class CanonResult:
    canon5: WeightElement
    representative: WeightElement
    g_v: GroupElement


def _require_c1(v: WeightElement):
    if v.channels != 1:
        raise UnsupportedChannels("canonization is defined for c = 1")


def bias_ranks(v: WeightElement) -> BiasRanks:
    """rank_l(i) = #{j : b_l[j] < b_l[i]} for hidden layers, raw index for the last."""
    _require_c1(v)
    L = v.arch.L
    out = []
    for l in range(L):
        x = v.b[l][:, 0]
        if l == L - 1:
            out.append(tuple(range(len(x))))
            continue
        order = np.argsort(x, kind="stable")
        sorted_x = x[order]
        ties = np.flatnonzero(sorted_x[1:] == sorted_x[:-1])
        if len(ties):
            k = ties[0]
            i, j = sorted(int(t) for t in (order[k], order[k + 1]))
            raise TiedBiases(l + 1, i, j)
        ranks = np.empty(len(x), dtype=int)
        ranks[order] = np.arange(len(x))
        out.append(tuple(ranks.tolist()))
    return BiasRanks(tuple(out))


def _tags(v: WeightElement, ranks: BiasRanks) -> np.ndarray:
    """(M, 4) integer array of (layer, is_bias, src_id, tgt_id) in flat layout order.

    For biases the last two slots are (0, id). Layer numbers are 1-based.
    """
    arch = v.arch
    tags = np.empty((arch.n_params, 4), dtype=np.int64)
    for k, (layer, is_bias, i, j) in enumerate(entry_index(arch)):
        l = layer - 1
        if is_bias:
            tags[k] = (layer, 1, 0, ranks.ranks[l][i])
        else:
            tgt = ranks.ranks[l][i]
            src = j if l == 0 else ranks.ranks[l - 1][j]
            tags[k] = (layer, 0, src, tgt)
    return tags


def neuron_id_map(v: WeightElement) -> WeightElement:
    """Append (layer, is_bias, src_id, tgt_id) tags as channels 2..5."""
    _require_c1(v)
    ranks = bias_ranks(v)
    vals = flatten(v).as_matrix()
    rows = np.concatenate([vals, _tags(v, ranks).astype(np.float64)], axis=1)
    return unflatten(rows.reshape(-1), v.arch, N_TAG)


def canon(v: WeightElement) -> CanonResult:
    _require_c1(v)
    ranks = bias_ranks(v)
    tags = _tags(v, ranks)
    rows = np.concatenate([flatten(v).as_matrix(), tags.astype(np.float64)], axis=1)
    # Sort key priority is (layer, is_bias, tgt_id, src_id): rows index targets,
    # so this is the order that lines up with the row-major flat layout.
    order = np.lexsort((tags[:, 2], tags[:, 3], tags[:, 1], tags[:, 0]))
    canon5 = unflatten(rows[order].reshape(-1), v.arch, N_TAG)
    g_v = GroupElement(ranks.ranks[:-1])
    return CanonResult(canon5, canon5.channel(0), g_v)


def canon_features(v: WeightElement) -> WeightElement:
    """Own value in channel 1, flatten(canon5) broadcast into channels 2..5M+1."""
    res = canon(v)
    block = flatten(res.canon5).values
    own = flatten(v).as_matrix()
    rows = np.concatenate([own, np.broadcast_to(block, (own.shape[0], block.size))], axis=1)
    return unflatten(rows.reshape(-1), v.arch, 1 + block.size)
