import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wskit import Architecture, act, random_group_element, random_weights
from wskit.archzoo.nft import (
    AttentionSummand,
    NFTParams,
    PoolParams,
    all_tokens,
    attention_weights,
    layernorm,
    nft_attention,
    nft_block,
    nft_pool,
    nft_self_attention,
    random_nft_params,
    softmax,
    threshold_mlp,
    uniform_pool,
)
from wskit.equivlab import counterexample_wl, nft_separation_demo, nft_separation_trace
from wskit.errors import DimMismatch, EmptyKV, WSKitError

SIG1 = 1.0 / (1.0 + np.exp(-1.0))  # softmax([1, 0])[0]


class TestAttentionMath:
    def test_single_pair_returns_value(self):
        np.testing.assert_allclose(nft_attention([3.0, -1.0], [([0.2, 0.4], [7.0, 8.0])]), [7.0, 8.0])

    def test_equal_scores_give_mean(self):
        out = nft_attention([0.0], [([1.0], [2.0]), ([5.0], [4.0]), ([-3.0], [9.0])])
        np.testing.assert_allclose(out, [5.0])

    def test_two_keys_by_hand(self):
        w = attention_weights([1.0], [[1.0], [0.0]])
        np.testing.assert_allclose(w, [SIG1, 1 - SIG1])
        assert w[0] == pytest.approx(0.7311, abs=1e-4)

    @settings(max_examples=50, deadline=None)
    @given(
        q=st.lists(st.floats(-5, 5), min_size=2, max_size=2),
        keys=st.lists(st.lists(st.floats(-5, 5), min_size=2, max_size=2), min_size=1, max_size=6),
    )
    def test_output_is_convex_combination(self, q, keys):
        vals = np.arange(len(keys), dtype=float)[:, None]
        out = nft_attention(q, list(zip(keys, vals)))
        assert vals.min() - 1e-12 <= out[0] <= vals.max() + 1e-12
        w = attention_weights(q, keys)
        assert w.sum() == pytest.approx(1.0) and np.all(w >= 0)

    def test_softmax_is_stable(self):
        np.testing.assert_allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])

    def test_empty(self):
        with pytest.raises(EmptyKV):
            nft_attention([1.0], [])

    def test_layernorm(self):
        y = layernorm(np.array([[1.0, 2.0, 3.0]]), eps=0.0)
        np.testing.assert_allclose(y.mean(), 0.0, atol=1e-15)
        np.testing.assert_allclose((y**2).mean(), 1.0)


class TestSummands:
    def test_zero_values(self):
        v = random_weights(Architecture((2, 3, 2)), c=2, seed=0)
        I, Z = np.eye(2), np.zeros((2, 2))
        params = NFTParams([AttentionSummand(k, I, I, Z) for k in ("KV1", "KV2", "KV3")])
        assert nft_self_attention(v, params).max_abs() == 0.0

    def test_kv3_uniform_is_global_mean(self):
        v = random_weights(Architecture((2, 3, 2)), c=2, seed=0)
        Z, I = np.zeros((2, 2)), np.eye(2)
        out = nft_self_attention(v, NFTParams([AttentionSummand("KV3", Z, Z, I)]))
        mean = all_tokens(v).mean(axis=0)
        for arr in out.W + out.b:
            np.testing.assert_allclose(arr.reshape(-1, 2), np.broadcast_to(mean, (arr.size // 2, 2)))

    def test_kv1_rows_uniform_is_row_mean(self):
        v = random_weights(Architecture((1, 3, 2)), seed=1)
        Z, I = np.zeros((1, 1)), np.eye(1)
        s = AttentionSummand("KV1", Z, Z, I, parts=("rows",), layers=(2,), targets=("weights",))
        out = nft_self_attention(v, NFTParams([s]))
        W2 = v.W[1][..., 0]
        # each target reads coordinate j of the mean row
        np.testing.assert_allclose(out.W[1][..., 0], np.broadcast_to(W2.mean(axis=0), W2.shape))
        assert out.W[0].max() == 0.0 and np.all(out.b[1] == 0)

    def test_kv2_bias_query(self):
        v = random_weights(Architecture((1, 3, 2)), seed=1)
        Z, I = np.zeros((1, 1)), np.eye(1)
        s = AttentionSummand("KV2", Z, Z, I, parts=("bias",), layers=(1,), targets=("biases",))
        out = nft_self_attention(v, NFTParams([s]))
        np.testing.assert_allclose(out.b[0][:, 0], v.b[0][:, 0])

    def test_bad_parts_and_dims(self):
        I = np.eye(1)
        with pytest.raises(WSKitError):
            AttentionSummand("KV1", I, I, I, parts=("cols",))
        with pytest.raises(DimMismatch):
            AttentionSummand("KV3", I, np.eye(2), I)
        v = random_weights(Architecture((1, 2, 1)), c=2, seed=0)
        with pytest.raises(DimMismatch):
            nft_self_attention(v, NFTParams([AttentionSummand("KV3", I, I, I)]))


class TestBlockEquivariance:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_random_block(self, seed):
        rng = np.random.default_rng(seed)
        arch = Architecture((2, 3, 4, 2))
        v = random_weights(arch, c=2, seed=seed)
        params = random_nft_params(2, rng)
        g = random_group_element(arch, rng)
        out = nft_block(v, params)
        assert nft_block(act(g, v), params).max_abs_diff(act(g, out)) <= 1e-12 * max(1.0, out.max_abs())

    def test_pool_invariance(self, rng):
        arch = Architecture((1, 4, 3, 1))
        v = random_weights(arch, c=3, seed=0)
        pool = PoolParams(rng.normal(size=3), rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
        base = nft_pool(v, pool)
        for _ in range(5):
            g = random_group_element(arch, rng)
            np.testing.assert_allclose(nft_pool(act(g, v), pool), base, rtol=1e-12, atol=1e-12)

    def test_uniform_pool_is_mean(self):
        v = random_weights(Architecture((2, 3, 1)), c=2, seed=0)
        np.testing.assert_allclose(nft_pool(v, uniform_pool(2)), all_tokens(v).mean(axis=0))


class TestSeparation:
    def test_threshold_mlp(self):
        f = threshold_mlp()
        np.testing.assert_allclose(f(np.array([[0.0], [0.8], [0.825], [0.85], [1.0]]))[:, 0], [0, 0, 0.5, 1, 1])

    def test_outputs(self):
        a, b = nft_separation_demo()
        assert a == pytest.approx(8 / 33, abs=1e-12)
        assert b == pytest.approx(16 / 33, abs=1e-12)

    def test_attention_rows(self):
        tr = nft_separation_trace()
        np.testing.assert_allclose(tr.attention_w2[0][0], [SIG1, SIG1, 1 - SIG1, 1 - SIG1])
        # W_1 and W_3 contribute 8 ones to both; only the block pattern survives in W_2
        assert tr.thresholded_w2[0].sum() == 0.0
        assert tr.thresholded_w2[1].sum() == 8.0

    def test_pair_is_the_wl_pair(self):
        v, w = counterexample_wl()
        assert nft_separation_demo((v, w)) == nft_separation_demo()
