"""Compile one NG message-passing layer into a DWS program and check it.

The compiled program has four stages, each a single ``Concat`` step:

``L1``  packs graph features into weight space. Weight entry ``W_l[i, j]``
        (the edge between source ``j`` in layer ``l-1`` and target ``i`` in
        layer ``l``) becomes ``[e_fwd, e_bwd, h_src, h_tgt]``; bias entry
        ``b_l[i]`` becomes ``[0, 0, 0, h]``.
``M2``  applies phi_m and phi_e to both edge directions, giving
        ``[m_fwd, e'_fwd, m_bwd, e'_bwd, h]``.
``L3``  sums incoming messages into the bias slots: forward messages by
        column pooling, backward messages from the layer above by row
        pooling. Result ``[e'_fwd, e'_bwd, h, s]``.
``M4``  applies phi_h on the bias entries: ``[e'_fwd, e'_bwd, h']``.

Input-layer neurons have no bias entry, so their updated node features are
not represented in weight space; they are excluded from the comparison.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass

import numpy as np

from .archzoo.dws import (
    BiasIdentity,
    ColPool,
    Concat,
    Constant,
    DWSProgram,
    LowerW2B,
    PointwiseAffine,
    RowPool,
    UpperW2B,
    WeightIdentity,
    constant_element,
    lift_mlp,
    select,
)
from .archzoo.mlp import MLPSpec, projection_mlp, random_mlp, zero_mlp
from .archzoo.mpnn import ng_layer
from .core import Architecture, WeightElement
from .errors import DimMismatch
from .graphs import NG, build_graph


@dataclass(frozen=True)
class NGDims:
    c: int
    L: int
    n_types: int
    d_e: int
    d_h: int
    d_msg: int
    d_e_out: int
    d_h_out: int

    @property
    def stage_channels(self) -> tuple[int, int, int, int, int]:
        c1 = 2 * self.d_e + 2 * self.d_h
        c2 = 2 * (self.d_e_out + self.d_msg) + self.d_h
        c3 = 2 * self.d_e_out + self.d_h + self.d_msg
        c4 = 2 * self.d_e_out + self.d_h_out
        return (self.c, c1, c2, c3, c4)


def ng_dims(arch: Architecture, c: int, params=None) -> NGDims:
    L = arch.L
    nt = arch.dims[0] + arch.dims[-1] + 1
    d_e, d_h = c + L + 2, (L + 1) + nt + c
    if params is None:
        return NGDims(c, L, nt, d_e, d_h, 0, d_e, d_h)
    phi_m, phi_h, phi_e = params
    x_in = 2 * d_h + d_e
    if phi_m.in_dim != x_in or phi_e.in_dim != x_in:
        raise DimMismatch(f"phi_m/phi_e must take {x_in} inputs (2 d_h + d_e)")
    if phi_h.in_dim != d_h + phi_m.out_dim:
        raise DimMismatch(f"phi_h must take {d_h + phi_m.out_dim} inputs (d_h + d_msg)")
    return NGDims(c, L, nt, d_e, d_h, phi_m.out_dim, phi_e.out_dim, phi_h.out_dim)


def _ntype(arch: Architecture, layer: int, i: int) -> int:
    if layer == 0:
        return i
    if layer == arch.L:
        return arch.dims[0] + i
    return arch.dims[0] + arch.dims[-1]


def _onehot(n, k):
    e = np.zeros(n)
    e[k] = 1.0
    return e


def _pack_stage(arch: Architecture, D: NGDims) -> Concat:
    L, nt = arch.L, D.n_types
    zero = lambda n: (lambda *_: np.zeros(n))

    def edge_const(direction):
        return constant_element(
            arch,
            lambda l, i, j: np.concatenate([_onehot(L, l - 1), direction]),
            zero(L + 2),
        )

    def node(l, i):
        return np.concatenate([_onehot(L + 1, l), _onehot(nt, _ntype(arch, l, i))])

    src_const = constant_element(arch, lambda l, i, j: node(l - 1, j), zero(L + 1 + nt))
    tgt_const = constant_element(arch, lambda l, i, j: node(l, i), lambda l, i: node(l, i))
    return Concat(
        [
            [WeightIdentity()],
            [Constant(edge_const(np.array([1.0, 0.0])))],
            [WeightIdentity()],
            [Constant(edge_const(np.array([0.0, 1.0])))],
            [Constant(src_const)],
            [LowerW2B(), WeightIdentity()],
            [Constant(tgt_const)],
            [UpperW2B()],
        ]
    )


def compile_ng_to_dws(params, arch: Architecture, c: int) -> DWSProgram:
    phi_m, phi_h, phi_e = params
    D = ng_dims(arch, c, params)
    c1 = D.stage_channels[1]
    EF, ER, HS, HT = 0, D.d_e, 2 * D.d_e, 2 * D.d_e + D.d_h
    rng_ = lambda a, n: list(range(a, a + n))
    fwd = rng_(HT, D.d_h) + rng_(HS, D.d_h) + rng_(EF, D.d_e)
    bwd = rng_(HS, D.d_h) + rng_(HT, D.d_h) + rng_(ER, D.d_e)

    m2 = Concat(
        [
            [select(c1, fwd), *lift_mlp(phi_m), WeightIdentity()],
            [select(c1, fwd), *lift_mlp(phi_e), WeightIdentity()],
            [select(c1, bwd), *lift_mlp(phi_m), WeightIdentity()],
            [select(c1, bwd), *lift_mlp(phi_e), WeightIdentity()],
            [select(c1, rng_(HT, D.d_h))],
        ]
    )

    c2 = D.stage_channels[2]
    MF, EFo = 0, D.d_msg
    MR, ERo = D.d_msg + D.d_e_out, 2 * D.d_msg + D.d_e_out
    H2 = 2 * (D.d_msg + D.d_e_out)
    pool = Concat([[select(c2, rng_(MF, D.d_msg)), ColPool()], [select(c2, rng_(MR, D.d_msg)), RowPool()]])
    add_halves = PointwiseAffine(np.vstack([np.eye(D.d_msg), np.eye(D.d_msg)]))
    l3 = Concat(
        [
            [select(c2, rng_(EFo, D.d_e_out)), WeightIdentity()],
            [select(c2, rng_(ERo, D.d_e_out)), WeightIdentity()],
            [select(c2, rng_(H2, D.d_h)), BiasIdentity()],
            [pool, add_halves],
        ]
    )

    c3 = D.stage_channels[3]
    m4 = Concat(
        [
            [select(c3, rng_(0, 2 * D.d_e_out)), WeightIdentity()],
            [select(c3, rng_(2 * D.d_e_out, D.d_h + D.d_msg)), *lift_mlp(phi_h), BiasIdentity()],
        ]
    )
    return DWSProgram([_pack_stage(arch, D), m2, l3, m4], in_channels=c)


def readback(out: WeightElement, d_e_out: int) -> tuple[dict, dict]:
    """Node features (layers 1..L) and directed edge features from the M4 output."""
    arch = out.arch
    nodes, edges = {}, {}
    for l in range(1, arch.L + 1):
        W, b = out.W[l - 1], out.b[l - 1]
        for i in range(arch.dims[l]):
            nodes[("n", l, i)] = b[i, 2 * d_e_out :]
            for j in range(arch.dims[l - 1]):
                edges[(("n", l - 1, j), ("n", l, i))] = W[i, j, :d_e_out]
                edges[(("n", l, i), ("n", l - 1, j))] = W[i, j, d_e_out : 2 * d_e_out]
    return nodes, edges


@dataclass(frozen=True)
class SimulationReport:
    arch: tuple
    channels: tuple
    max_abs_deviation: float
    n_nodes_compared: int
    n_edges_compared: int
    tol: float
    passed: bool

    def to_json_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)


def verify_simulation(params, v: WeightElement, tol: float = 1e-9, program: DWSProgram | None = None) -> SimulationReport:
    """Run the NG layer and the compiled program on ``v`` and compare."""
    D = ng_dims(v.arch, v.channels, params)
    prog = compile_ng_to_dws(params, v.arch, v.channels) if program is None else program
    out = prog.run(v)
    nodes, edges = readback(out, D.d_e_out)
    G = ng_layer(build_graph(v, NG), params)
    ref_nodes, ref_edges = G.node_dict(), G.edge_dict()
    dev = 0.0
    for k, x in nodes.items():
        dev = max(dev, float(np.max(np.abs(x - ref_nodes[k]), initial=0.0)))
    for k, x in edges.items():
        dev = max(dev, float(np.max(np.abs(x - ref_edges[k]), initial=0.0)))
    return SimulationReport(
        tuple(v.arch.dims),
        tuple(prog.channel_trace(v.channels)),
        dev,
        len(nodes),
        len(edges),
        tol,
        bool(dev <= tol),
    )


def random_ng_params(arch: Architecture, c: int, rng: np.random.Generator, hidden: int = 8, d_msg: int = 4, activation: str = "relu"):
    D = ng_dims(arch, c)
    x_in = 2 * D.d_h + D.d_e
    phi_m = random_mlp((x_in, hidden, d_msg), rng, activation)
    phi_e = random_mlp((x_in, hidden, D.d_e), rng, activation)
    phi_h = random_mlp((D.d_h + d_msg, hidden, D.d_h), rng, activation)
    return (phi_m, phi_h, phi_e)


def identity_ng_params(arch: Architecture, c: int, d_msg: int = 1):
    """phi_m = 0, phi_e and phi_h project onto the current edge/node feature."""
    D = ng_dims(arch, c)
    x_in = 2 * D.d_h + D.d_e
    return (
        zero_mlp(x_in, d_msg),
        projection_mlp(D.d_h + d_msg, 0, D.d_h),
        projection_mlp(x_in, 2 * D.d_h, D.d_e),
    )


def mutate_program(prog: DWSProgram, how: str = "swap_pool") -> DWSProgram:
    """Return a deliberately broken copy (used to show the check can fail)."""
    bad = copy.deepcopy(prog)
    if how == "swap_pool":
        pool = bad.steps[2].branches[3].steps[0]
        for br in pool.branches:
            br.steps[-1] = RowPool() if isinstance(br.steps[-1], ColPool) else ColPool()
    elif how == "perturb_constant":
        const = bad.steps[0].branches[1].steps[0]
        val = const.value
        const.value = WeightElement(val.arch, tuple(w * 2.0 for w in val.W), val.b)
    else:
        raise ValueError(f"unknown mutation {how!r}")
    return bad


__all__ = [
    "NGDims",
    "ng_dims",
    "compile_ng_to_dws",
    "readback",
    "SimulationReport",
    "verify_simulation",
    "random_ng_params",
    "identity_ng_params",
    "mutate_program",
    "MLPSpec",
]
