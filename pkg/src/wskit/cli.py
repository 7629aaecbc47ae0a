"""``wskit`` command line: every subcommand prints one JSON report on stdout.

Report fields: ``command``, ``inputs_digest`` (SHA-256 of the canonical JSON
of the inputs), ``results`` and ``pass``. Wall time goes to stderr so stdout
is byte-stable for fixed inputs.

Exit codes: 0 pass, 1 check failed, 2 usage or invalid input, 3 unreadable JSON.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from .canonize import bias_ranks, canon
from .core import Architecture, GroupElement, act, from_json_dict, identity, is_general_position, random_weights, realize
from .equivlab import (
    WitnessReport,
    exact_rank,
    functional_deviation,
    functionally_equal,
    g_equivalence_search,
    nft_separation_trace,
    w1_sum_invariant,
    witness_scaling,
    witness_wl,
)
from .errors import WSKitError
from .graphs import build_graph, wl_distinguishable, wl_refine
from .plregions import region_bound_info, regions_1d

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_JSON = 0, 1, 2, 3

PERM_HELP = (
    'hidden-layer permutations as "layer:image;layer:image", e.g. "1:1,0;2:2,0,1". '
    "Layers are numbered from 1; image[i] is where neuron i moves. Omitted layers stay fixed."
)


class InputJSONError(Exception):
    pass


def default_seed() -> int:
    return int(os.environ.get("WSKIT_SEED", "0"))


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise InputJSONError(f"{path}: {e}") from e


def _load(path: str):
    return from_json_dict(_read_json(path))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise WSKitError(f"cannot parse number list {text!r}") from e


def parse_perm(spec: str, arch: Architecture) -> GroupElement:
    perms = [list(p) for p in identity(arch).perms]
    for chunk in filter(None, (s.strip() for s in spec.split(";"))):
        layer, _, image = chunk.partition(":")
        try:
            l = int(layer)
            img = [int(x) for x in image.split(",")]
        except ValueError as e:
            raise WSKitError(f"bad permutation chunk {chunk!r}") from e
        if not 1 <= l <= len(perms):
            raise WSKitError(f"layer {l} is not a hidden layer (1..{len(perms)})")
        perms[l - 1] = img
    return GroupElement(tuple(tuple(p) for p in perms))


def _digest(inputs: dict) -> str:
    return hashlib.sha256(json.dumps(inputs, sort_keys=True).encode()).hexdigest()


# --------------------------------------------------------------------------
# subcommands; each returns (inputs, results, passed)


def cmd_forward(a):
    v = _load(a.weights)
    x = np.array(_floats(a.x))
    y = realize(v, x)
    return {"weights": v.to_json_dict(), "x": x.tolist()}, {"output": y.tolist()}, True


def cmd_act(a):
    v = _load(a.weights)
    g = parse_perm(a.perm, v.arch)
    return {"weights": v.to_json_dict(), "perm": [list(p) for p in g.perms]}, {"weights": act(g, v).to_json_dict()}, True


def cmd_canonize(a):
    v = _load(a.weights)
    r = canon(v)
    res = {
        "ranks": [list(x) for x in bias_ranks(v).ranks],
        "g_v": [list(p) for p in r.g_v.perms],
        "representative": r.representative.to_json_dict(),
        "orbit_check": act(r.g_v, v).equal(r.representative),
    }
    return {"weights": v.to_json_dict()}, res, res["orbit_check"]


def cmd_gp_check(a):
    v = _load(a.weights)
    ok = is_general_position(v, a.tol)
    return {"weights": v.to_json_dict(), "tol": a.tol}, {"general_position": ok}, ok


def cmd_graph(a):
    v = _load(a.weights)
    G = build_graph(v, a.variant)
    res = {"graph": G.to_json_dict(), "n_nodes": G.n_nodes, "n_edges": G.n_edges}
    if a.dot:
        res["dot"] = G.to_dot()
    if a.wl:
        col = wl_refine(G)
        res["wl"] = {
            "rounds_to_stabilize": col.rounds_to_stabilize,
            "n_classes": col.n_classes,
            "histogram": [[str(c), n] for c, n in col.histogram],
        }
    return {"weights": v.to_json_dict(), "variant": a.variant, "wl": a.wl}, res, True


def cmd_counterexample(a):
    inputs = {"which": a.which, "lam": a.lam}
    if a.which == "scaling":
        rep = witness_scaling(a.lam)
        ok = rep.functionally_equal and not rep.g_equivalent and rep.invariant_left != rep.invariant_right
        return inputs, rep.to_json_dict(), ok
    if a.which == "wl":
        rep = witness_wl()
        res = rep.to_json_dict()
        res["ranks"] = [rep.rank_left, rep.rank_right]
        ok = res["ranks"] == [3, 2] and not rep.wl_distinguishable and not rep.g_equivalent and rep.functionally_equal
        return inputs, res, ok
    tr = nft_separation_trace()
    a1, a2 = tr.outputs
    res = {
        "outputs": [a1, a2],
        "expected": ["8/33", "16/33"],
        "attention_w2": [m.tolist() for m in tr.attention_w2],
        "thresholded_w2": [m.tolist() for m in tr.thresholded_w2],
    }
    ok = abs(a1 - 8 / 33) <= 1e-12 and abs(a2 - 16 / 33) <= 1e-12
    return inputs, res, ok


def cmd_equiv_test(a):
    v, w = _load(a.a), _load(a.b)
    search = g_equivalence_search(v, w, tol=a.tol)
    if a.exact_1d:
        func = functionally_equal(v, w, domain=(a.lo, a.hi), exact=True, tol=max(a.tol, 1e-9))
    else:
        func = functional_deviation(v, w, domain=(a.lo, a.hi), seed=a.seed) <= max(a.tol, 1e-9)
    rep = WitnessReport(
        "equiv-test",
        g_equivalent=search.found,
        functionally_equal=func,
        wl_distinguishable=wl_distinguishable(build_graph(v, "GMN"), build_graph(w, "GMN")),
        invariant_left=w1_sum_invariant(v),
        invariant_right=w1_sum_invariant(w),
    )
    res = rep.to_json_dict()
    res["witness"] = [list(p) for p in search.witness.perms] if search.found else None
    res["searched"] = search.searched
    if v.arch.L >= 2:
        res["ranks_w2"] = [exact_rank(v.W[1][..., 0]), exact_rank(w.W[1][..., 0])]
    return {"a": v.to_json_dict(), "b": w.to_json_dict(), "exact_1d": a.exact_1d}, res, func


def cmd_simulate(a):
    from .simulate import random_ng_params, verify_simulation

    arch = Architecture(tuple(int(x) for x in a.arch.split(",")))
    rng = np.random.default_rng(a.seed)
    v = random_weights(arch, a.channels, a.seed)
    params = random_ng_params(arch, a.channels, rng, hidden=a.hidden)
    rep = verify_simulation(params, v, a.tol)
    inputs = {"arch": list(arch.dims), "seed": a.seed, "channels": a.channels, "hidden": a.hidden, "tol": a.tol}
    return inputs, rep.to_json_dict(), rep.passed


def cmd_regions(a):
    v = _load(a.weights)
    lo, hi = _floats(a.interval)
    p = regions_1d(v, (lo, hi))
    bound, saturated = region_bound_info(v.arch)
    res = {"pl": p.to_json_dict(), "n_regions": p.n_regions, "region_bound": bound, "bound_saturated": saturated}
    return {"weights": v.to_json_dict(), "interval": [lo, hi]}, res, p.n_regions <= bound


def cmd_suite(a):
    from .suite import run_all

    results = run_all(a.seed)
    for r in results:
        print(r.line(), file=sys.stderr)
    res = {"criteria": [r.to_json_dict() for r in results]}
    return {"seed": a.seed}, res, all(r.passed for r in results)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS, help="indent the JSON report")

    p = argparse.ArgumentParser(prog="wskit", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter, parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("forward", parents=[common], help="evaluate the network at one input")
    s.add_argument("weights")
    s.add_argument("--x", required=True, help="comma-separated input vector")
    s.set_defaults(fn=cmd_forward)

    s = sub.add_parser("act", parents=[common], help="apply a hidden-neuron permutation", description=PERM_HELP)
    s.add_argument("weights")
    s.add_argument("--perm", required=True, help=PERM_HELP)
    s.set_defaults(fn=cmd_act)

    s = sub.add_parser("canonize", parents=[common], help="sort hidden neurons by bias")
    s.add_argument("weights")
    s.set_defaults(fn=cmd_canonize)

    s = sub.add_parser("gp-check", parents=[common], help="check that hidden biases are pairwise distinct")
    s.add_argument("weights")
    s.add_argument("--tol", type=float, default=0.0)
    s.set_defaults(fn=cmd_gp_check)

    s = sub.add_parser("graph", parents=[common], help="build the GMN or NG parameter graph")
    s.add_argument("weights")
    s.add_argument("--variant", choices=["gmn", "ng"], default="gmn")
    s.add_argument("--wl", action="store_true", help="include 1-WL refinement results")
    s.add_argument("--dot", action="store_true", help="include a DOT rendering")
    s.set_defaults(fn=cmd_graph)

    s = sub.add_parser("counterexample", parents=[common], help="run one of the built-in counterexamples")
    s.add_argument("which", choices=["scaling", "wl", "nft"])
    s.add_argument("--lam", type=float, default=2.0, help="scale factor for the scaling pair")
    s.set_defaults(fn=cmd_counterexample)

    s = sub.add_parser("equiv-test", parents=[common], help="compare two weight files; passes iff functionally equal")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--exact-1d", action="store_true", help="exact piecewise-linear comparison (d_0 = 1, relu)")
    s.add_argument("--tol", type=float, default=0.0)
    s.add_argument("--lo", type=float, default=-1.0)
    s.add_argument("--hi", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=cmd_equiv_test)

    s = sub.add_parser("simulate-ng-dws", parents=[common], help="compile a random NG layer to DWS and compare")
    s.add_argument("--arch", required=True, help="comma-separated widths, e.g. 2,3,2")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--channels", type=int, default=1)
    s.add_argument("--hidden", type=int, default=8)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("regions", parents=[common], help="exact linear regions of a 1-D input relu net")
    s.add_argument("weights")
    s.add_argument("--interval", required=True, help="a,b")
    s.set_defaults(fn=cmd_regions)

    s = sub.add_parser("suite", parents=[common], help="run all acceptance checks")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    t0 = time.perf_counter()
    try:
        if getattr(a, "seed", 0) is None:
            a.seed = default_seed()
        inputs, results, passed = a.fn(a)
    except InputJSONError as e:
        print(f"wskit: invalid JSON: {e}", file=sys.stderr)
        return EXIT_JSON
    except (ValueError, OSError, KeyError, TypeError) as e:
        print(f"wskit: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    report = {"command": a.command, "inputs_digest": _digest(inputs), "results": results, "pass": bool(passed)}
    print(json.dumps(report, sort_keys=True, indent=2 if getattr(a, "pretty", False) else None))
    print(f"wskit: {a.command} took {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
