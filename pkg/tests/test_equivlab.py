import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wskit import Architecture, act, from_matrices, random_group_element, random_weights
from wskit.equivlab import (
    counterexample_scaling,
    counterexample_wl,
    eps_approx_check,
    exact_rank,
    functional_deviation,
    functionally_equal,
    g_equivalence_search,
    g_equivalent,
    halton_points,
    hausdorff_sup,
    w1_sum_invariant,
    witness_scaling,
    witness_wl,
)
from wskit.errors import ArchMismatch, BadLambda, BudgetExceeded, EmptySet


class TestFunctionalEquality:
    def test_halton_in_box(self):
        X = halton_points(3, 256, -2.0, 5.0)
        assert X.shape == (256, 3) and X.min() >= -2.0 and X.max() <= 5.0

    def test_permuted_network(self, rng):
        arch = Architecture((3, 5, 2), "tanh")
        v = random_weights(arch, seed=0)
        w = act(random_group_element(arch, rng), v)
        assert functional_deviation(v, w) <= 1e-12
        assert functionally_equal(v, w)

    def test_different_networks(self):
        arch = Architecture((2, 3, 1))
        assert not functionally_equal(random_weights(arch, seed=0), random_weights(arch, seed=1))

    def test_exact_and_sampled_agree(self):
        v, w = counterexample_scaling(3.0)
        assert functionally_equal(v, w, exact=True)
        assert functionally_equal(v, w, exact=False)

    def test_arch_mismatch(self):
        with pytest.raises(ArchMismatch):
            functionally_equal(random_weights(Architecture((1, 2, 1))), random_weights(Architecture((1, 3, 1))))


class TestGroupSearch:
    def test_finds_witness(self, rng):
        arch = Architecture((1, 3, 3, 1))
        v = random_weights(arch, seed=4)
        g = random_group_element(arch, rng)
        found, witness = g_equivalent(v, act(g, v))
        assert found and act(witness, v).equal(act(g, v))

    def test_first_witness_is_lexicographically_smallest(self):
        arch = Architecture((1, 3, 1))
        v = from_matrices(arch, [np.ones((3, 1)), np.ones((1, 3))], [[0.0, 0.0, 0.0], [0.0]])
        r = g_equivalence_search(v, v)
        assert r.found and r.witness.is_identity and r.searched == 1

    def test_not_equivalent(self):
        v, w = counterexample_wl()
        r = g_equivalence_search(v, w)
        assert not r.found and r.searched == 576

    def test_budget(self):
        v = random_weights(Architecture((1, 5, 5, 1)))
        with pytest.raises(BudgetExceeded):
            g_equivalent(v, v, budget=100)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_equivalence_relation(self, seed):
        arch = Architecture((1, 3, 2, 1))
        rng = np.random.default_rng(seed)
        u = random_weights(arch, seed=seed)
        v = act(random_group_element(arch, rng), u)
        w = act(random_group_element(arch, rng), v)
        assert g_equivalent(u, u)[0]
        assert g_equivalent(v, u)[0] and g_equivalent(u, v)[0]
        assert g_equivalent(u, w)[0]


class TestExactRank:
    @pytest.mark.parametrize(
        "M, r",
        [
            ([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 1]], 3),
            ([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]], 2),
            ([[0, 0], [0, 0]], 0),
            ([[0.1, 0.2], [0.2, 0.4]], 1),
            ([[0.1, 0.2], [0.3, 0.5]], 2),
        ],
    )
    def test_values(self, M, r):
        assert exact_rank(M) == r

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.integers(-3, 3), min_size=4, max_size=4), min_size=1, max_size=5))
    def test_matches_numpy_on_small_integers(self, rows):
        M = np.array(rows, dtype=float)
        assert exact_rank(M) == np.linalg.matrix_rank(M)


class TestCounterexamples:
    def test_scaling_pair(self):
        v, w = counterexample_scaling(2.0)
        assert functionally_equal(v, w, domain=(-10.0, 10.0))
        assert not g_equivalent(v, w)[0]
        assert (w1_sum_invariant(v), w1_sum_invariant(w)) == (1.0, 2.0)

    @pytest.mark.parametrize("lam", [0.0, -1.0, 1.0, float("inf"), float("nan")])
    def test_bad_lambda(self, lam):
        with pytest.raises(BadLambda):
            counterexample_scaling(lam)

    def test_wl_pair(self):
        v, w = counterexample_wl()
        assert functionally_equal(v, w, domain=(-10.0, 10.0))
        assert (exact_rank(v.W[1][..., 0]), exact_rank(w.W[1][..., 0])) == (3, 2)

    def test_reports(self):
        rep = witness_wl()
        assert rep.functionally_equal and not rep.g_equivalent and not rep.wl_distinguishable
        s = witness_scaling(0.5)
        assert s.functionally_equal and not s.g_equivalent
        assert "rank_left" not in s.to_json_dict()


class TestEpsApprox:
    def test_identical_sets(self):
        grid = np.linspace(-1, 1, 11)
        fs = [np.sin, np.cos]
        assert hausdorff_sup(fs, fs[::-1], grid) == 0.0

    def test_shifted_set(self):
        grid = np.linspace(-1, 1, 11)
        A = [lambda x: x, lambda x: 2 * x]
        B = [lambda x: x + 0.1]
        assert hausdorff_sup(A, B, grid) == pytest.approx(1.1)
        assert eps_approx_check(A[:1], B, grid, 0.2)
        assert not eps_approx_check(A, B, grid, 0.2)

    def test_networks_as_members(self, rng):
        arch = Architecture((1, 3, 1))
        v = random_weights(arch, seed=0)
        grid = np.linspace(-1, 1, 21)[:, None]
        orbit = [act(random_group_element(arch, rng), v) for _ in range(3)]
        assert hausdorff_sup([v], orbit, grid) <= 1e-12

    def test_empty(self):
        with pytest.raises(EmptySet):
            hausdorff_sup([], [np.sin], np.zeros(3))
