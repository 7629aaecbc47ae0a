"""Executable witnesses for how the equivalence notions on weight space differ.

Covers functional equality (sampled or exact piecewise-linear), brute-force
permutation equivalence, exact integer rank, the scaling and WL
counterexample pairs, a G-invariant linear separator, the NFT separation
pipeline and a grid check for epsilon-approximation of function sets.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from .archzoo.nft import AttentionSummand, NFTParams, nft_block, nft_pool, threshold_mlp, uniform_pool
from .core import (
    Architecture,
    GroupElement,
    WeightElement,
    act,
    enumerate_group,
    from_matrices,
    realize,
)
from .errors import ArchMismatch, BadLambda, BudgetExceeded, EmptySet, UnsupportedChannels
from .graphs import GMN, NG, build_graph, wl_distinguishable
from .plregions import pl_equal, regions_1d

DEFAULT_BUDGET = 10**7


# --------------------------------------------------------------------------
# functional equality


def _same_arch(v: WeightElement, w: WeightElement):
    if v.arch != w.arch:
        raise ArchMismatch(f"{v.arch} vs {w.arch}")
    if v.channels != 1 or w.channels != 1:
        raise UnsupportedChannels("functional comparison needs c = 1")


def halton_points(d: int, n: int, lo, hi, seed: int = 0) -> np.ndarray:
    sampler = qmc.Halton(d=d, scramble=True, seed=seed)
    return qmc.scale(sampler.random(n), np.broadcast_to(lo, (d,)), np.broadcast_to(hi, (d,)))


def functional_deviation(v, w, domain=(-1.0, 1.0), n_samples: int = 4096, seed: int = 0) -> float:
    """max |f_v - f_w| over a scrambled Halton sample of the box ``domain``."""
    _same_arch(v, w)
    lo, hi = domain
    X = halton_points(v.arch.dims[0], n_samples, lo, hi, seed)
    return float(np.max(np.abs(realize(v, X) - realize(w, X))))


def exact_mode_available(v: WeightElement) -> bool:
    return v.arch.dims[0] == 1 and v.arch.activation == "relu"


def functionally_equal(
    v: WeightElement,
    w: WeightElement,
    domain=(-1.0, 1.0),
    n_samples: int = 4096,
    tol: float = 1e-9,
    exact: bool | None = None,
    seed: int = 0,
) -> bool:
    """Compare f_v and f_w on a box.

    ``exact=None`` picks the exact piecewise-linear comparison whenever the
    input is 1-D and the activation is ReLU, and sampling otherwise.
    """
    _same_arch(v, w)
    if exact is None:
        exact = exact_mode_available(v)
    if exact:
        lo, hi = (float(np.min(domain[0])), float(np.max(domain[1])))
        return pl_equal(regions_1d(v, (lo, hi)), regions_1d(w, (lo, hi)), tol)
    return functional_deviation(v, w, domain, n_samples, seed) <= tol


# --------------------------------------------------------------------------
# permutation equivalence


@dataclass(frozen=True)
class SearchResult:
    found: bool
    witness: GroupElement | None
    searched: int


def _close(a: WeightElement, b: WeightElement, tol: float) -> bool:
    return a.equal(b) if tol == 0 else a.max_abs_diff(b) <= tol


def g_equivalence_search(v: WeightElement, w: WeightElement, tol: float = 0.0, budget: int = DEFAULT_BUDGET) -> SearchResult:
    """Exhaustive search in lexicographic order; the first witness found is the smallest."""
    if v.arch != w.arch or v.channels != w.channels:
        raise ArchMismatch(f"{v.arch} vs {w.arch}")
    order = v.arch.group_order()
    if order > budget:
        raise BudgetExceeded(f"|G| = {order} exceeds the budget {budget}")
    n = 0
    for g in enumerate_group(v.arch):
        n += 1
        if _close(act(g, v), w, tol):
            return SearchResult(True, g, n)
    return SearchResult(False, None, n)


def g_equivalent(v: WeightElement, w: WeightElement, tol: float = 0.0, budget: int = DEFAULT_BUDGET):
    """(True, g) with act(g, v) == w if such g exists, else (False, None)."""
    r = g_equivalence_search(v, w, tol, budget)
    return r.found, r.witness


# --------------------------------------------------------------------------
# exact rank


def _bareiss_rank(M: list[list[int]]) -> int:
    A = [row[:] for row in M]
    m, n = len(A), len(A[0]) if A else 0
    rank, prev, r = 0, 1, 0
    for col in range(n):
        piv = next((i for i in range(r, m) if A[i][col] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        for i in range(r + 1, m):
            for j in range(col + 1, n):
                A[i][j] = (A[r][col] * A[i][j] - A[i][col] * A[r][j]) // prev
            A[i][col] = 0
        prev = A[r][col]
        r += 1
        rank += 1
        if r == m:
            break
    return rank


def _fraction_rank(M: list[list[Fraction]]) -> int:
    A = [row[:] for row in M]
    m, n = len(A), len(A[0]) if A else 0
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, m) if A[i][col] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        for i in range(r + 1, m):
            f = A[i][col] / A[r][col]
            if f:
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        r += 1
        if r == m:
            break
    return r


def exact_rank(M) -> int:
    """Rank over the rationals; floats are converted exactly (no rounding)."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("exact_rank needs a matrix")
    if M.size == 0:
        return 0
    if np.all(M == np.round(M)):
        return _bareiss_rank([[int(x) for x in row] for row in M])
    return _fraction_rank([[Fraction(float(x)) for x in row] for row in M])


# --------------------------------------------------------------------------
# counterexamples and invariants


def counterexample_scaling(lam: float = 2.0) -> tuple[WeightElement, WeightElement]:
    """Arch (1,2,1): rescaling a ReLU unit by lam and its outgoing weight by 1/lam."""
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0 or lam == 1:
        raise BadLambda(f"lambda must be positive and different from 1, got {lam}")
    arch = Architecture((1, 2, 1))
    v = from_matrices(arch, [[[1.0], [0.0]], [[1.0, 0.0]]], [[0.0, 0.0], [0.0]])
    w = from_matrices(arch, [[[lam], [0.0]], [[1.0 / lam, 0.0]]], [[0.0, 0.0], [0.0]])
    return v, w


WL_W2_CYCLE = [[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 1]]
WL_W2_BLOCK = [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]]


def counterexample_wl() -> tuple[WeightElement, WeightElement]:
    """Arch (1,4,4,1) binary pair; middle layers have rank 3 and rank 2."""
    arch = Architecture((1, 4, 4, 1))
    W1, W3 = np.ones((4, 1)), np.ones((1, 4))
    zb = [np.zeros(4), np.zeros(4), np.zeros(1)]
    return (
        from_matrices(arch, [W1, np.array(WL_W2_CYCLE, float), W3], zb),
        from_matrices(arch, [W1, np.array(WL_W2_BLOCK, float), W3], zb),
    )


def w1_sum_invariant(v: WeightElement) -> float:
    """Sum of all first-layer weights; linear and unchanged by hidden permutations."""
    if v.channels != 1:
        raise UnsupportedChannels("w1_sum_invariant needs c = 1")
    return float(np.sum(v.W[0]))


# --------------------------------------------------------------------------
# NFT separation


def separation_block1() -> NFTParams:
    """Row attention on W_2 with identity projections, written in place of W_2."""
    I = np.eye(1)
    row = AttentionSummand("KV1", I, I, I, parts=("rows",), layers=(2,), targets=("weights",))
    return NFTParams([row], mlp=None, use_layernorm=False, attn_residual=False)


def separation_block2() -> NFTParams:
    """No attention; the threshold MLP replaces every entry."""
    return NFTParams([], mlp=threshold_mlp(), use_layernorm=False, mlp_residual=False)


@dataclass(frozen=True, eq=False)
class SeparationTrace:
    outputs: tuple[float, float]
    attention_w2: tuple[np.ndarray, np.ndarray]
    thresholded_w2: tuple[np.ndarray, np.ndarray]


def nft_separation_trace(pair=None) -> SeparationTrace:
    v1, v2 = counterexample_wl() if pair is None else pair
    b1, b2, pool = separation_block1(), separation_block2(), uniform_pool(1)
    outs, att, thr = [], [], []
    for v in (v1, v2):
        z = nft_block(v, b1)
        y = nft_block(z, b2)
        att.append(z.W[1][..., 0].copy())
        thr.append(y.W[1][..., 0].copy())
        outs.append(float(nft_pool(y, pool)[0]))
    return SeparationTrace(tuple(outs), tuple(att), tuple(thr))


def nft_separation_demo(pair=None) -> tuple[float, float]:
    return nft_separation_trace(pair).outputs


# --------------------------------------------------------------------------
# epsilon-approximation of function sets


def _sample(f, grid: np.ndarray) -> np.ndarray:
    if isinstance(f, WeightElement):
        return np.asarray(realize(f, grid), dtype=np.float64).reshape(len(grid), -1)
    if callable(f):
        return np.asarray(f(grid), dtype=np.float64).reshape(len(grid), -1)
    return np.asarray(f, dtype=np.float64).reshape(len(grid), -1)


def hausdorff_sup(A, B, grid) -> float:
    """Symmetric Hausdorff distance between two function sets under the grid sup-norm."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[:, None]
    if len(A) == 0 or len(B) == 0:
        raise EmptySet("both sets must be nonempty")
    SA = np.array([_sample(f, grid) for f in A])
    SB = np.array([_sample(f, grid) for f in B])
    D = np.max(np.abs(SA[:, None] - SB[None, :]), axis=(2, 3))
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def eps_approx_check(A, B, grid, eps: float) -> bool:
    return hausdorff_sup(A, B, grid) < eps


# --------------------------------------------------------------------------
# reports


@dataclass
class WitnessReport:
    name: str
    g_equivalent: bool | None = None
    functionally_equal: bool | None = None
    wl_distinguishable: bool | None = None
    rank_left: int | None = None
    rank_right: int | None = None
    invariant_left: float | None = None
    invariant_right: float | None = None
    notes: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {k: x for k, x in asdict(self).items() if x is not None}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)


def witness_wl() -> WitnessReport:
    v, w = counterexample_wl()
    r = g_equivalence_search(v, w)
    wl = {var: wl_distinguishable(build_graph(v, var), build_graph(w, var)) for var in (GMN, NG)}
    rep = WitnessReport(
        "wl",
        g_equivalent=r.found,
        functionally_equal=functionally_equal(v, w, domain=(-10.0, 10.0)),
        wl_distinguishable=wl[GMN] or wl[NG],
        rank_left=exact_rank(v.W[1][..., 0]),
        rank_right=exact_rank(w.W[1][..., 0]),
    )
    rep.notes.append(f"searched {r.searched} group elements")
    rep.notes.append("WL checked on GMN and NG encodings")
    return rep


def witness_scaling(lam: float = 2.0) -> WitnessReport:
    v, w = counterexample_scaling(lam)
    return WitnessReport(
        "scaling",
        g_equivalent=g_equivalent(v, w)[0],
        functionally_equal=functionally_equal(v, w, domain=(-10.0, 10.0)),
        invariant_left=w1_sum_invariant(v),
        invariant_right=w1_sum_invariant(w),
        notes=[f"lambda = {lam}"],
    )


__all__ = [
    "halton_points",
    "functional_deviation",
    "functionally_equal",
    "SearchResult",
    "g_equivalence_search",
    "g_equivalent",
    "exact_rank",
    "counterexample_scaling",
    "counterexample_wl",
    "w1_sum_invariant",
    "separation_block1",
    "separation_block2",
    "SeparationTrace",
    "nft_separation_trace",
    "nft_separation_demo",
    "hausdorff_sup",
    "eps_approx_check",
    "WitnessReport",
    "witness_wl",
    "witness_scaling",
]
