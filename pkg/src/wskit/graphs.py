"""Parameter-graph encodings of MLPs (GMN with bias nodes, NG with node biases)
and edge-featured 1-WL color refinement.

Node ids are tuples: ``("n", l, i)`` for neuron ``i`` of layer ``l`` (both
0-based, layer 0 is the input) and ``("b", l)`` for the GMN bias node of layer
``l`` (1-based, matching the weight layer it feeds). Every undirected
connection is stored as two directed edges; the forward one points from the
lower layer to the upper layer (or from the bias node to its neuron).
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import GroupElement, WeightElement, validate
from .errors import VariantMismatch, WSKitError

GMN, NG = "GMN", "NG"


@dataclass(frozen=True, eq=False)
class NeuralGraph:
    variant: str
    node_ids: tuple
    node_feats: np.ndarray  # (N, d_h)
    edges: np.ndarray  # (E, 2) int, (src index, dst index)
    edge_feats: np.ndarray  # (E, d_e)
    edge_kinds: tuple = field(default=())  # per edge: (layer, row, col, is_bias, forward)

    @property
    def node_dim(self) -> int:
        return self.node_feats.shape[1]

    @property
    def edge_dim(self) -> int:
        return self.edge_feats.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index(self) -> dict:
        return {nid: k for k, nid in enumerate(self.node_ids)}

    def with_features(self, node_feats=None, edge_feats=None) -> "NeuralGraph":
        return NeuralGraph(
            self.variant,
            self.node_ids,
            self.node_feats if node_feats is None else np.asarray(node_feats, dtype=np.float64),
            self.edges,
            self.edge_feats if edge_feats is None else np.asarray(edge_feats, dtype=np.float64),
            self.edge_kinds,
        )

    def node_dict(self) -> dict:
        return {nid: self.node_feats[k] for k, nid in enumerate(self.node_ids)}

    def edge_dict(self) -> dict:
        ids = self.node_ids
        return {(ids[s], ids[t]): self.edge_feats[k] for k, (s, t) in enumerate(self.edges)}

    def has_all_reverse_edges(self) -> bool:
        pairs = {(int(s), int(t)) for s, t in self.edges}
        return all((t, s) in pairs for s, t in pairs)

    def to_json_dict(self) -> dict:
        ids = self.node_ids
        return {
            "variant": self.variant,
            "node_dim": self.node_dim,
            "edge_dim": self.edge_dim,
            "nodes": [{"id": list(nid), "h": self.node_feats[k].tolist()} for k, nid in enumerate(ids)],
            "edges": [
                {"src": list(ids[s]), "dst": list(ids[t]), "e": self.edge_feats[k].tolist()}
                for k, (s, t) in enumerate(self.edges)
            ],
        }

    def to_dot(self) -> str:
        """Plain edge list in DOT syntax; labels are the edge parameter channels."""
        name = lambda nid: "_".join(str(x) for x in nid)
        lines = [f"digraph {self.variant} {{"]
        for k, (s, t) in enumerate(self.edges):
            lab = ",".join(f"{x:g}" for x in self.edge_feats[k][: self._param_dim()])
            lines.append(f'  {name(self.node_ids[s])} -> {name(self.node_ids[t])} [label="{lab}"];')
        lines.append("}")
        return "\n".join(lines)

    def _param_dim(self) -> int:
        # parameter channels are the leading block of every edge feature
        extra = 4 if self.variant == GMN else 2
        L = max((nid[1] for nid in self.node_ids if nid[0] == "n"), default=0)
        return max(self.edge_dim - L - extra, 0)


def from_edges(node_feats, edge_list, edge_feats=None, variant: str = NG, node_ids=None) -> NeuralGraph:
    """Build an arbitrary featured graph (used for tests and ad-hoc WL runs)."""
    node_feats = np.atleast_2d(np.asarray(node_feats, dtype=np.float64))
    edges = np.asarray(edge_list, dtype=np.intp).reshape(-1, 2)
    if edge_feats is None:
        edge_feats = np.zeros((len(edges), 1))
    ids = tuple(node_ids) if node_ids is not None else tuple(("v", k) for k in range(len(node_feats)))
    return NeuralGraph(variant, ids, node_feats, edges, np.atleast_2d(np.asarray(edge_feats, dtype=np.float64)))


def _onehot(n: int, k: int) -> np.ndarray:
    e = np.zeros(n)
    e[k] = 1.0
    return e


def build_graph(v: WeightElement, variant: str = GMN) -> NeuralGraph:
    validate(v.arch, v)
    variant = variant.upper()
    if variant not in (GMN, NG):
        raise VariantMismatch(f"unknown variant {variant!r}")
    arch, c = v.arch, v.channels
    dims, L = arch.dims, arch.L
    d0, dL = dims[0], dims[-1]
    gmn = variant == GMN
    n_types = d0 + dL + (L if gmn else 0) + 1
    hidden_type = n_types - 1

    def ntype(l, i):
        if l == 0:
            return i
        if l == L:
            return d0 + i
        return hidden_type

    node_ids, node_feats = [], []
    for l in range(L + 1):
        for i in range(dims[l]):
            h = [_onehot(L + 1, l), _onehot(n_types, ntype(l, i))]
            if not gmn:
                h.append(np.zeros(c) if l == 0 else v.b[l - 1][i])
            node_ids.append(("n", l, i))
            node_feats.append(np.concatenate(h))
    if gmn:
        for l in range(1, L + 1):
            node_ids.append(("b", l))
            node_feats.append(np.concatenate([_onehot(L + 1, l), _onehot(n_types, d0 + dL + l - 1)]))
    idx = {nid: k for k, nid in enumerate(node_ids)}

    fwd, bwd = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    wtype, btype = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    edges, feats, kinds = [], [], []

    def add(src, dst, parts, kind):
        edges.append((idx[src], idx[dst]))
        feats.append(np.concatenate(parts))
        kinds.append(kind)

    for l in range(1, L + 1):
        lay = _onehot(L, l - 1)
        for i in range(dims[l]):
            for j in range(dims[l - 1]):
                p = v.W[l - 1][i, j]
                tail = [wtype] if gmn else []
                add(("n", l - 1, j), ("n", l, i), [p, lay, fwd, *tail], (l, i, j, 0, 1))
                add(("n", l, i), ("n", l - 1, j), [p, lay, bwd, *tail], (l, i, j, 0, 0))
    if gmn:
        for l in range(1, L + 1):
            lay = _onehot(L, l - 1)
            for i in range(dims[l]):
                p = v.b[l - 1][i]
                add(("b", l), ("n", l, i), [p, lay, fwd, btype], (l, i, -1, 1, 1))
                add(("n", l, i), ("b", l), [p, lay, bwd, btype], (l, i, -1, 1, 0))

    return NeuralGraph(
        variant,
        tuple(node_ids),
        np.array(node_feats),
        np.array(edges, dtype=np.intp),
        np.array(feats),
        tuple(kinds),
    )


def relabel(G: NeuralGraph, g: GroupElement) -> NeuralGraph:
    """Rename hidden neuron nodes by ``g``; features and edge order are kept."""
    perms = g.perms

    def rename(nid):
        if nid[0] == "n" and 1 <= nid[1] <= len(perms):
            return ("n", nid[1], perms[nid[1] - 1][nid[2]])
        return nid

    return NeuralGraph(
        G.variant,
        tuple(rename(n) for n in G.node_ids),
        G.node_feats,
        G.edges,
        G.edge_feats,
        G.edge_kinds,
    )


def graphs_equal(G1: NeuralGraph, G2: NeuralGraph, tol: float = 0.0) -> bool:
    """Equality as featured graphs keyed by node id (order-free)."""
    n1, n2 = G1.node_dict(), G2.node_dict()
    e1, e2 = G1.edge_dict(), G2.edge_dict()
    if n1.keys() != n2.keys() or e1.keys() != e2.keys():
        return False

    def close(a, b):
        return a.shape == b.shape and (np.array_equal(a, b) if tol == 0 else np.allclose(a, b, rtol=tol, atol=tol))

    return all(close(n1[k], n2[k]) for k in n1) and all(close(e1[k], e2[k]) for k in e1)


# --------------------------------------------------------------------------
# 1-WL


def _h64(*chunks: bytes) -> int:
    h = hashlib.blake2b(digest_size=8)
    for c in chunks:
        h.update(len(c).to_bytes(4, "little"))
        h.update(c)
    return int.from_bytes(h.digest(), "little")


def feature_hash(x) -> int:
    """64-bit BLAKE2b of the little-endian float64 bytes (with -0.0 folded into 0.0)."""
    a = np.ascontiguousarray(np.asarray(x, dtype="<f8") + 0.0)
    return _h64(b"feat", a.tobytes())


@dataclass(frozen=True)
class WLColoring:
    colors: dict
    rounds_to_stabilize: int
    histogram: tuple

    @property
    def n_classes(self) -> int:
        return len(self.histogram)


def _histogram(colors) -> tuple:
    return tuple(sorted(Counter(colors).items()))


def _refine(feats, edges, edge_feats, max_rounds, use_edge_features=True, groups=None):
    """Run refinement on one (possibly disjoint-union) graph.

    Returns the per-round color lists. Stops once the number of classes stops
    growing, or after ``max_rounds`` refinement rounds.
    """
    n = len(feats)
    colors = [feature_hash(f) for f in feats]
    ehash = [feature_hash(e) if use_edge_features else 0 for e in edge_feats]
    incoming = [[] for _ in range(n)]
    for k, (s, t) in enumerate(edges):
        incoming[t].append((s, ehash[k]))
    history = [colors]
    n_classes = len(set(colors))
    for _ in range(max_rounds):
        new = []
        for v in range(n):
            msgs = sorted((colors[s], eh) for s, eh in incoming[v])
            packed = np.array(msgs, dtype=np.uint64).tobytes()
            new.append(_h64(b"wl", colors[v].to_bytes(8, "little"), packed))
        colors = new
        history.append(colors)
        k = len(set(colors))
        if k == n_classes:
            break
        n_classes = k
    return history


def wl_refine(G: NeuralGraph, max_rounds: int | None = None, use_edge_features: bool = True) -> WLColoring:
    if max_rounds is None:
        max_rounds = G.n_nodes
    if max_rounds < 0:
        raise WSKitError("max_rounds must be non-negative")
    history = _refine(G.node_feats, G.edges, G.edge_feats, max_rounds, use_edge_features)
    final = history[-1]
    return WLColoring(
        {nid: final[k] for k, nid in enumerate(G.node_ids)},
        len(history) - 1,
        _histogram(final),
    )


def wl_class_counts(G: NeuralGraph, max_rounds: int | None = None, use_edge_features: bool = True) -> list[int]:
    """Number of color classes after each round (round 0 first)."""
    history = _refine(G.node_feats, G.edges, G.edge_feats, G.n_nodes if max_rounds is None else max_rounds, use_edge_features)
    return [len(set(h)) for h in history]


def wl_distinguishable(G1: NeuralGraph, G2: NeuralGraph, use_edge_features: bool = True) -> bool:
    """Refine the disjoint union and compare the two halves' color histograms."""
    if G1.variant != G2.variant:
        raise VariantMismatch(f"{G1.variant} vs {G2.variant}")
    if G1.node_dim != G2.node_dim or G1.edge_dim != G2.edge_dim:
        return True
    n1 = G1.n_nodes
    feats = np.concatenate([G1.node_feats, G2.node_feats])
    edges = np.concatenate([G1.edges, G2.edges + n1]) if G2.n_edges else G1.edges
    efeats = np.concatenate([G1.edge_feats, G2.edge_feats])
    history = _refine(feats, edges, efeats, n1 + G2.n_nodes, use_edge_features)
    return any(_histogram(h[:n1]) != _histogram(h[n1:]) for h in history)


def graph_to_json(G: NeuralGraph, **kw) -> str:
    return json.dumps(G.to_json_dict(), **kw)
