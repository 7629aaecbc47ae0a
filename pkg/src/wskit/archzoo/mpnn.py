"""GMN and NG message-passing layers on parameter graphs.

For a directed edge ``s -> t`` the message into ``t`` is
``phi_m([h_t, h_s, e_st(, u)])`` and the edge update is
``phi_e([h_t, h_s, e_st(, u)])``. Since every connection is stored in both
directions, summing over incoming edges is the same as summing over the
undirected neighborhood. Sums run over edges in stored order.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimMismatch, VariantMismatch
from ..graphs import GMN, NG, NeuralGraph
from .mlp import MLPSpec


def _need(mlp: MLPSpec, in_dim: int, name: str) -> None:
    if mlp.in_dim != in_dim:
        raise DimMismatch(f"{name} expects input dim {mlp.in_dim}, graph provides {in_dim}")


def _segment_sum(values: np.ndarray, targets: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, values.shape[1]))
    np.add.at(out, targets, values)
    return out


def _mp(G: NeuralGraph, phi_m, phi_h, phi_e, u=None):
    h, e = G.node_feats, G.edge_feats
    src, dst = G.edges[:, 0], G.edges[:, 1]
    parts = [h[dst], h[src], e]
    if u is not None:
        parts.append(np.broadcast_to(u, (len(e), u.size)))
    x = np.concatenate(parts, axis=1) if len(e) else np.zeros((0, sum(p.shape[1] for p in parts)))
    _need(phi_m, x.shape[1], "phi_m")
    _need(phi_e, x.shape[1], "phi_e")
    m = phi_m(x) if len(e) else np.zeros((0, phi_m.out_dim))
    e_new = phi_e(x) if len(e) else np.zeros((0, phi_e.out_dim))
    agg = _segment_sum(m, dst, G.n_nodes)
    node_in = [h, agg]
    if u is not None:
        node_in.append(np.broadcast_to(u, (G.n_nodes, u.size)))
    y = np.concatenate(node_in, axis=1)
    _need(phi_h, y.shape[1], "phi_h")
    return phi_h(y), e_new


def ng_layer(G: NeuralGraph, params) -> NeuralGraph:
    """One NG update with ``params = (phi_m, phi_h, phi_e)``."""
    if G.variant != NG:
        raise VariantMismatch(f"ng_layer needs an NG graph, got {G.variant}")
    phi_m, phi_h, phi_e = params
    h_new, e_new = _mp(G, phi_m, phi_h, phi_e)
    return G.with_features(h_new, e_new)


def gmn_layer(G: NeuralGraph, params, u) -> tuple[NeuralGraph, np.ndarray]:
    """One GMN update with ``params = (phi_m, phi_h, phi_e, phi_u)``; returns (graph, u')."""
    if G.variant != GMN:
        raise VariantMismatch(f"gmn_layer needs a GMN graph, got {G.variant}")
    phi_m, phi_h, phi_e, phi_u = params
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    h_new, e_new = _mp(G, phi_m, phi_h, phi_e, u)
    # global update reads the features from before this layer
    g_in = np.concatenate([G.node_feats.sum(axis=0), G.edge_feats.sum(axis=0), u])
    _need(phi_u, g_in.size, "phi_u")
    return G.with_features(h_new, e_new), phi_u(g_in)
