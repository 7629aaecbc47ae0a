"""Neuron-type positional encoding appended to weight-space features."""

from __future__ import annotations

import numpy as np

from ..core import Architecture, WeightElement


def pe_types(arch: Architecture) -> int:
    """|T_PE| = d_0 + d_L + 1 (inputs, outputs, one shared hidden type)."""
    return arch.dims[0] + arch.dims[-1] + 1


def _type_index(arch: Architecture, layer: int, i: int) -> int:
    # layer is 0..L; types ordered in_1..in_d0, out_1..out_dL, hidden
    if layer == 0:
        return i
    if layer == arch.L:
        return arch.dims[0] + i
    return pe_types(arch) - 1


def nfn_positional_encoding(v: WeightElement) -> WeightElement:
    """Append [source type, target type] to weights and [0, own type] to biases."""
    arch, L = v.arch, v.arch.L
    T = pe_types(arch)
    eye = np.eye(T)
    W, b = [], []
    for l in range(1, L + 1):
        d_out, d_in = arch.dims[l], arch.dims[l - 1]
        src = eye[[_type_index(arch, l - 1, j) for j in range(d_in)]]  # (d_in, T)
        tgt = eye[[_type_index(arch, l, i) for i in range(d_out)]]  # (d_out, T)
        pe_w = np.concatenate(
            [np.broadcast_to(src[None], (d_out, d_in, T)), np.broadcast_to(tgt[:, None], (d_out, d_in, T))],
            axis=-1,
        )
        W.append(np.concatenate([v.W[l - 1], pe_w], axis=-1))
        b.append(np.concatenate([v.b[l - 1], np.zeros((d_out, T)), tgt], axis=-1))
    return WeightElement(arch, tuple(W), tuple(b))


def strip_positional_encoding(v: WeightElement, c: int) -> WeightElement:
    return v.map_entries(lambda x: x[..., :c])
