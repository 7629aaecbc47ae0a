"""The ten acceptance checks, runnable from tests and from ``wskit suite``."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .archzoo import dws
from .archzoo.mlp import random_mlp
from .archzoo.mpnn import gmn_layer, ng_layer
from .archzoo.nfn import nfn_positional_encoding
from .archzoo.nft import nft_block, nft_self_attention, random_nft_params
from .canonize import _tags, bias_ranks, canon
from .core import (
    Architecture,
    act,
    compose,
    enumerate_group,
    flatten,
    from_matrices,
    inverse,
    random_group_element,
    random_weights,
    realize,
    unflatten,
)
from .equivlab import (
    counterexample_scaling,
    counterexample_wl,
    exact_rank,
    functionally_equal,
    g_equivalence_search,
    nft_separation_trace,
    w1_sum_invariant,
)
from .errors import TiedBiases
from .graphs import GMN, NG, build_graph, relabel, wl_distinguishable, wl_refine
from .plregions import pl_equal, region_bound, regions_1d
from .simulate import compile_ng_to_dws, mutate_program, random_ng_params, verify_simulation

EQUIV_ARCHS = ((1, 3, 1), (2, 4, 3, 2), (1, 4, 4, 1))


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d}: {self.name} ({self.seconds:.3f} s)"

    def to_json_dict(self) -> dict:
        # wall time is left out so the JSON is reproducible
        return {"number": self.number, "name": self.name, "pass": self.passed, "details": self.details}


def _timed(number, name, fn, *args) -> CriterionResult:
    t0 = time.perf_counter()
    ok, details = fn(*args)
    return CriterionResult(number, name, bool(ok), time.perf_counter() - t0, details)


# ---------------------------------------------------------------- 1


def check_nft_separation(seed: int = 0):
    t0 = time.perf_counter()
    tr = nft_separation_trace()
    elapsed = time.perf_counter() - t0
    a, b = tr.outputs
    row1, row2 = tr.attention_w2[0][0], tr.attention_w2[1][0]
    e = np.e
    exact1 = np.array([e / (e + 1), e / (e + 1), 1 / (e + 1), 1 / (e + 1)])
    exact2 = np.array([e**2 / (e**2 + 1)] * 2 + [1 / (e**2 + 1)] * 2)
    printed1, printed2 = np.array([0.73, 0.73, 0.27, 0.27]), np.array([0.88, 0.88, 0.12, 0.12])
    checks = {
        "outputs": abs(a - 8 / 33) <= 1e-12 and abs(b - 16 / 33) <= 1e-12,
        "printed_pattern": bool(np.all(np.abs(row1 - printed1) <= 1e-2) and np.all(np.abs(row2 - printed2) <= 1e-2)),
        "computed_values": bool(
            np.all(np.abs(row1 - [0.73105, 0.73105, 0.26895, 0.26895]) <= 1e-4)
            and np.all(np.abs(row2 - [0.88080, 0.88080, 0.11920, 0.11920]) <= 1e-4)
            and np.allclose(row1, exact1, atol=1e-12)
            and np.allclose(row2, exact2, atol=1e-12)
        ),
        "runtime": elapsed < 0.1,
    }
    return all(checks.values()), {"outputs": [a, b], "row1": row1.tolist(), "row2": row2.tolist(), **checks}


# ---------------------------------------------------------------- 2


def check_wl_counterexample(seed: int = 0):
    t0 = time.perf_counter()
    v, w = counterexample_wl()
    ranks = (exact_rank(v.W[1][..., 0]), exact_rank(w.W[1][..., 0]))
    wl = {}
    for var in (GMN, NG):
        G1, G2 = build_graph(v, var), build_graph(w, var)
        wl[var] = {
            "edge_features": wl_distinguishable(G1, G2),
            "node_only": wl_distinguishable(G1, G2, use_edge_features=False),
            "same_stable_histogram": wl_refine(G1).histogram == wl_refine(G2).histogram,
        }
    search = g_equivalence_search(v, w)
    relu8 = from_matrices(Architecture((1, 1, 1)), [[[1.0]], [[8.0]]], [[0.0], [0.0]])
    p8 = regions_1d(relu8, (-10.0, 10.0))
    pl_ok = all(pl_equal(regions_1d(x, (-10.0, 10.0)), p8, 1e-12) for x in (v, w))
    elapsed = time.perf_counter() - t0
    checks = {
        "ranks": ranks == (3, 2),
        "wl_indistinguishable": all(
            not d["edge_features"] and not d["node_only"] and d["same_stable_histogram"] for d in wl.values()
        ),
        "no_g_witness": (not search.found) and search.searched == 576,
        "both_8relu": pl_ok and functionally_equal(v, w, domain=(-10.0, 10.0)),
        "runtime": elapsed < 1.0,
    }
    return all(checks.values()), {"ranks": list(ranks), "searched": search.searched, "wl": wl, **checks}


# ---------------------------------------------------------------- 3


def check_scaling_counterexample(seed: int = 0):
    t0 = time.perf_counter()
    v, w = counterexample_scaling(2.0)
    inv = (w1_sum_invariant(v), w1_sum_invariant(w))
    func = functionally_equal(v, w, domain=(-10.0, 10.0), exact=True)
    geq = g_equivalence_search(v, w).found
    elapsed = time.perf_counter() - t0
    checks = {"functionally_equal": func, "invariants": inv == (1.0, 2.0), "not_g_equivalent": not geq, "runtime": elapsed < 0.1}
    return all(checks.values()), {"w1_sum": list(inv), **checks}


# ---------------------------------------------------------------- 4


def _rel_violation(a_parts, b_parts) -> float:
    num = max(float(np.max(np.abs(x - y), initial=0.0)) for x, y in zip(a_parts, b_parts))
    scale = max(float(np.max(np.abs(x), initial=0.0)) for x in a_parts)
    return num / (1.0 + scale)


def _we_violation(x, y) -> float:
    return _rel_violation(list(x.W) + list(x.b), list(y.W) + list(y.b))


def _graph_violation(G1, G2) -> float:
    n1, n2 = G1.node_dict(), G2.node_dict()
    e1, e2 = G1.edge_dict(), G2.edge_dict()
    if n1.keys() != n2.keys() or e1.keys() != e2.keys():
        return float("inf")
    keys_n, keys_e = sorted(n1), sorted(e1)
    return _rel_violation([n1[k] for k in keys_n] + [e1[k] for k in keys_e], [n2[k] for k in keys_n] + [e2[k] for k in keys_e])


def _random_case(rng):
    arch = Architecture(EQUIV_ARCHS[rng.integers(len(EQUIV_ARCHS))])
    c = int(rng.integers(1, 4))
    v = random_weights(arch, c, int(rng.integers(2**31)))
    return arch, c, v, random_group_element(arch, rng)


def _dws_ops(arch, c, rng):
    L = arch.L
    return {
        "pointwise_affine": dws.PointwiseAffine(rng.normal(size=(c, c + 1)), rng.normal(size=c + 1)),
        "global_sum": dws.GlobalSum(),
        "bias_sum": dws.BiasSum(int(rng.integers(1, L + 1))),
        "lower_w2b": dws.LowerW2B(),
        "upper_w2b": dws.UpperW2B(),
        "first_layer_neuron": dws.FirstLayerNeuron(int(rng.integers(arch.dims[0]))),
        "last_layer_neuron": dws.LastLayerNeuron(int(rng.integers(arch.dims[-1]))),
        "col_pool": dws.ColPool(),
        "row_pool": dws.RowPool(),
    }


def equivariance_violations(n_cases: int = 100, seed: int = 0) -> dict:
    """Max relative equivariance violation per operation over random (arch, v, g)."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(name, val):
        worst[name] = max(worst.get(name, 0.0), val)

    for _ in range(n_cases):
        arch, c, v, g = _random_case(rng)
        gv = act(g, v)
        for name, op in _dws_ops(arch, c, rng).items():
            record(name, _we_violation(op(gv), act(g, op(v))))
        record("nfn_positional_encoding", _we_violation(nfn_positional_encoding(gv), act(g, nfn_positional_encoding(v))))

        params = random_nft_params(c, rng)
        params.use_layernorm = bool(rng.integers(2))
        record("nft_self_attention", _we_violation(nft_self_attention(gv, params), act(g, nft_self_attention(v, params))))
        record("nft_block", _we_violation(nft_block(gv, params), act(g, nft_block(v, params))))

        Gv, Ggv = build_graph(v, NG), build_graph(gv, NG)
        p = random_ng_params(arch, c, rng, hidden=6)
        record("ng_layer", _graph_violation(ng_layer(Ggv, p), relabel(ng_layer(Gv, p), g)))

        Hv, Hgv = build_graph(v, GMN), build_graph(gv, GMN)
        d_h, d_e, d_u = Hv.node_dim, Hv.edge_dim, 3
        x_in = 2 * d_h + d_e + d_u
        gp = (
            random_mlp((x_in, 6, 4), rng),
            random_mlp((d_h + 4 + d_u, 6, d_h), rng),
            random_mlp((x_in, 6, d_e), rng),
            random_mlp((d_h + d_e + d_u, 6, d_u), rng),
        )
        u = rng.normal(size=d_u)
        (A, ua), (B, ub) = gmn_layer(Hgv, gp, u), gmn_layer(Hv, gp, u)
        viol = _graph_violation(A, relabel(B, g))
        viol = max(viol, _rel_violation([ua], [ub]))
        record("gmn_layer", viol)
    return worst


def check_equivariance(seed: int = 0, n_cases: int = 100):
    t0 = time.perf_counter()
    worst = equivariance_violations(n_cases, seed)
    elapsed = time.perf_counter() - t0
    exact_ops = ("lower_w2b", "upper_w2b", "first_layer_neuron", "last_layer_neuron", "nfn_positional_encoding")
    checks = {
        "within_tol": all(x <= 1e-9 for x in worst.values()),
        "bit_exact_copies": all(worst[k] == 0.0 for k in exact_ops),
        "runtime": elapsed < 30.0,
    }
    return all(checks.values()), {"worst": worst, **checks}


# ---------------------------------------------------------------- 5


def check_realization_invariance(seed: int = 0, n: int = 1000):
    rng = np.random.default_rng(seed)
    archs = ((1, 3, 1), (2, 4, 3, 2), (1, 4, 4, 1), (3, 5, 4, 2), (2, 3, 3, 3, 1))
    worst = 0.0
    for _ in range(n):
        arch = Architecture(archs[rng.integers(len(archs))])
        v = random_weights(arch, 1, int(rng.integers(2**31)))
        g = random_group_element(arch, rng)
        x = rng.uniform(-3, 3, arch.dims[0])
        y = realize(v, x)
        worst = max(worst, float(np.max(np.abs(realize(act(g, v), x) - y) / (1 + np.abs(y)))))
    return worst <= 1e-9, {"worst_relative": worst}


# ---------------------------------------------------------------- 6


def check_canonization(seed: int = 0, n: int = 50):
    rng = np.random.default_rng(seed)
    arch = Architecture((1, 3, 3, 1))
    group = list(enumerate_group(arch))
    inv_ok = orbit_ok = cocycle_ok = True
    for _ in range(n):
        v = random_weights(arch, 1, int(rng.integers(2**31)))
        base = canon(v)
        orbit_ok &= act(inverse(base.g_v), base.representative).equal(v)
        for h in group:
            hv = act(h, v)
            r = canon(hv)
            inv_ok &= r.canon5.equal(base.canon5)
            cocycle_ok &= r.g_v == compose(base.g_v, inverse(h))
    tied = from_matrices(arch, [np.ones((3, 1)), np.ones((3, 3)), np.ones((1, 3))], [[0.1, 0.1, 0.3], [0, 1, 2], [0]])
    try:
        canon(tied)
        raised = False
    except TiedBiases:
        raised = True
    checks = {"invariance": bool(inv_ok), "orbit_membership": bool(orbit_ok), "cocycle": bool(cocycle_ok), "tied_raises": raised}
    return all(checks.values()), {"group_size": len(group), **checks}


# ---------------------------------------------------------------- 7

SIM_ARCHS = ((2, 3, 2), (1, 4, 4, 1), (3, 5, 4, 2), (1, 3, 1), (2, 2, 3, 1))


def check_simulation(seed: int = 0, n: int = 20):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, all_pass = 0.0, True
    for k in range(n):
        arch = Architecture(SIM_ARCHS[k % len(SIM_ARCHS)])
        c = int(rng.integers(1, 3))
        v = random_weights(arch, c, int(rng.integers(2**31)))
        params = random_ng_params(arch, c, rng, hidden=int(rng.integers(1, 9)), d_msg=int(rng.integers(1, 5)))
        rep = verify_simulation(params, v, 1e-9)
        worst = max(worst, rep.max_abs_deviation)
        all_pass &= rep.passed
    arch = Architecture((3, 5, 4, 2))
    v = random_weights(arch, 2, seed)
    params = random_ng_params(arch, 2, rng)
    prog = compile_ng_to_dws(params, arch, 2)
    mutants_fail = all(
        not verify_simulation(params, v, 1e-9, program=mutate_program(prog, how)).passed
        for how in ("swap_pool", "perturb_constant")
    )
    elapsed = time.perf_counter() - t0
    checks = {"exact": bool(all_pass), "mutation_detected": mutants_fail, "runtime": elapsed < 10.0}
    return all(checks.values()), {"worst_deviation": worst, **checks}


# ---------------------------------------------------------------- 8


def check_graph_encodings(seed: int = 0):
    v = random_weights(Architecture((1, 4, 4, 1)), 1, seed)
    G, H = build_graph(v, GMN), build_graph(v, NG)
    got = {
        "GMN": [G.n_nodes, G.n_edges, G.edge_dim, G.node_dim],
        "NG": [H.n_nodes, H.n_edges, H.edge_dim, H.node_dim],
    }
    checks = {
        "gmn_counts": got["GMN"] == [13, 66, 8, 10],
        "ng_counts": got["NG"] == [10, 48, 6, 8],
        "reverse_edges": G.has_all_reverse_edges() and H.has_all_reverse_edges(),
    }
    return all(checks.values()), {"counts": got, **checks}


# ---------------------------------------------------------------- 9


def check_pl_regions(seed: int = 0, n: int = 100):
    rng = np.random.default_rng(seed)
    count_ok = eval_ok = True
    worst = 0.0
    for _ in range(n):
        k = int(rng.integers(1, 17))
        arch = Architecture((1, k, 1))
        v = random_weights(arch, 1, int(rng.integers(2**31)))
        p = regions_1d(v, (-3.0, 3.0))
        count_ok &= p.n_regions <= k + 1 <= region_bound(arch)
        xs = np.linspace(-3.0, 3.0, 1000)
        dev = float(np.max(np.abs(p(xs)[:, 0] - realize(v, xs[:, None])[:, 0])))
        worst = max(worst, dev)
    eval_ok = worst <= 1e-9
    c8 = [regions_1d(x, (-10.0, 10.0)) for x in counterexample_wl()]
    c8_ok = all(q.n_regions == 2 and abs(q.breakpoints[0]) <= 1e-12 for q in c8)
    checks = {"count_bound": bool(count_ok), "evaluation": bool(eval_ok), "counterexample_regions": c8_ok}
    return all(checks.values()), {"worst_eval_deviation": worst, **checks}


# ---------------------------------------------------------------- 10


def check_tags_and_flatten(seed: int = 0, n: int = 100):
    rng = np.random.default_rng(seed)
    archs = ((1, 3, 1), (2, 4, 3, 2), (1, 4, 4, 1), (3, 5, 4, 2), (2, 2, 3, 2, 1))
    unique = roundtrip = True
    for k in range(n):
        arch = Architecture(archs[k % len(archs)])
        v = random_weights(arch, 1, int(rng.integers(2**31)))
        tags = _tags(v, bias_ranks(v))
        unique &= len({tuple(t) for t in tags.tolist()}) == len(tags)
        vc = random_weights(arch, int(rng.integers(1, 4)), int(rng.integers(2**31)))
        f = flatten(vc)
        roundtrip &= unflatten(f).equal(vc) and np.array_equal(flatten(unflatten(f)).values, f.values)
    m33 = Architecture((1, 4, 4, 1)).n_params == 33
    checks = {"unique_tags": bool(unique), "roundtrip": bool(roundtrip), "M_33": m33}
    return all(checks.values()), checks


CRITERIA = (
    (1, "NFT separation 8/33 vs 16/33", check_nft_separation),
    (2, "WL counterexample", check_wl_counterexample),
    (3, "scaling counterexample", check_scaling_counterexample),
    (4, "equivariance suite", check_equivariance),
    (5, "realization invariance", check_realization_invariance),
    (6, "canonization", check_canonization),
    (7, "NG layer via DWS program", check_simulation),
    (8, "graph encodings", check_graph_encodings),
    (9, "PL regions", check_pl_regions),
    (10, "pe tags and flatten round-trip", check_tags_and_flatten),
)


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    for k, name, fn in CRITERIA:
        if k == number:
            return _timed(k, name, fn, seed)
    raise KeyError(number)


def run_all(seed: int = 0) -> list[CriterionResult]:
    return [_timed(k, name, fn, seed) for k, name, fn in CRITERIA]
