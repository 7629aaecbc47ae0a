import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wskit import Architecture, act, from_matrices, random_group_element, random_weights, zeros
from wskit.archzoo.dws import (
    BiasIdentity,
    BiasSum,
    ColPool,
    Concat,
    Constant,
    DWSProgram,
    FirstLayerNeuron,
    GlobalSum,
    LastLayerNeuron,
    LowerW2B,
    PointwiseAffine,
    PointwiseMLP,
    PointwiseNonlinearity,
    RowPool,
    UpperW2B,
    WeightIdentity,
    constant_element,
    lift_mlp,
    program_from_json,
    select,
)
from wskit.archzoo.mlp import random_mlp
from wskit.errors import ChannelMismatch, IndexOutOfRange, NotInvariant, WSKitError

ARCH = Architecture((2, 3, 2))


@pytest.fixture
def ones():
    return from_matrices(ARCH, [np.ones((3, 2)), np.ones((2, 3))], [np.full(3, 0.5), np.full(2, 0.5)])


def ops(c, rng):
    return [
        GlobalSum(),
        BiasSum(1),
        BiasSum(2),
        LowerW2B(),
        UpperW2B(),
        FirstLayerNeuron(0),
        LastLayerNeuron(1),
        ColPool(),
        RowPool(),
        WeightIdentity(),
        BiasIdentity(),
        PointwiseAffine(rng.normal(size=(c, 2)), rng.normal(size=2)),
        PointwiseNonlinearity("tanh"),
        PointwiseMLP(random_mlp((c, 4, 3), rng)),
    ]


class TestPrimitivesByHand:
    def test_global_sum(self, ones):
        # 6 + 6 weights of 1 and 5 biases of 0.5
        out = GlobalSum()(ones)
        assert np.all(out.W[0] == 14.5) and np.all(out.b[1] == 14.5)

    def test_global_sum_small(self):
        arch = Architecture((1, 1, 1))
        v = from_matrices(arch, [[[1.0]], [[1.0]]], [[1.0], [1.0]])
        assert GlobalSum()(v).W[0][0, 0, 0] == 4.0

    def test_bias_sum(self, ones):
        out = BiasSum(2)(ones)
        np.testing.assert_array_equal(out.b[1][:, 0], [1.0, 1.0])
        assert not out.b[0].any() and not out.W[0].any()
        one_bias = from_matrices(Architecture((1, 1)), [[[3.0]]], [[0.5]])
        assert BiasSum(1)(one_bias).b[0][0, 0] == 0.5

    def test_bias_sum_range(self, ones):
        with pytest.raises(IndexOutOfRange):
            BiasSum(3)(ones)

    def test_w2b_and_pools(self):
        v = random_weights(ARCH, seed=2)
        W1, W2 = v.W[0][..., 0], v.W[1][..., 0]
        b1, b2 = v.b[0][:, 0], v.b[1][:, 0]
        up = UpperW2B()(v)
        np.testing.assert_array_equal(up.W[1][..., 0], np.repeat(b2[:, None], 3, axis=1))
        low = LowerW2B()(v)
        np.testing.assert_array_equal(low.W[1][..., 0], np.repeat(b1[None, :], 2, axis=0))
        assert not low.W[0].any()
        col = ColPool()(v)
        np.testing.assert_allclose(col.b[0][:, 0], [sum(W1[i, j] for j in range(2)) for i in range(3)])
        np.testing.assert_allclose(col.b[1][:, 0], [sum(W2[i, j] for j in range(3)) for i in range(2)])
        row = RowPool()(v)
        np.testing.assert_allclose(row.b[0][:, 0], [sum(W2[k, j] for k in range(2)) for j in range(3)])
        assert not row.b[1].any()

    def test_neuron_selectors(self):
        v = random_weights(ARCH, seed=4)
        f = FirstLayerNeuron(1)(v)
        np.testing.assert_array_equal(f.W[0][:, 1], v.W[0][:, 1])
        assert not f.W[0][:, 0].any() and not f.b[0].any()
        last = LastLayerNeuron(0)(v)
        assert last.b[1][0, 0] == v.b[1][0, 0] and last.b[1][1, 0] == 0.0
        with pytest.raises(IndexOutOfRange):
            FirstLayerNeuron(2)(v)

    def test_select(self):
        v = random_weights(ARCH, c=3, seed=0)
        out = select(3, [2, 0])(v)
        np.testing.assert_array_equal(out.W[1], v.W[1][..., [2, 0]])
        with pytest.raises(IndexOutOfRange):
            select(3, [3])


class TestEquivariance:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), c=st.integers(1, 2))
    def test_all_primitives(self, seed, c):
        rng = np.random.default_rng(seed)
        v = random_weights(ARCH, c=c, seed=seed)
        g = random_group_element(ARCH, rng)
        for op in ops(c, rng):
            lhs, rhs = op(act(g, v)), act(g, op(v))
            assert lhs.max_abs_diff(rhs) <= 1e-12 * max(1.0, rhs.max_abs()), op.kind

    def test_deep_arch(self, rng):
        arch = Architecture((2, 4, 4, 2))
        v = random_weights(arch, c=2, seed=9)
        for _ in range(5):
            g = random_group_element(arch, rng)
            for op in ops(2, rng):
                assert op(act(g, v)).max_abs_diff(act(g, op(v))) <= 1e-12


class TestComposition:
    def test_lift_mlp_matches_pointwise(self, rng):
        mlp = random_mlp((2, 5, 3), rng)
        v = random_weights(ARCH, c=2, seed=1)
        lifted = DWSProgram(lift_mlp(mlp), in_channels=2).run(v)
        direct = PointwiseMLP(mlp)(v)
        assert lifted.max_abs_diff(direct) <= 1e-12

    def test_concat_channels(self):
        v = random_weights(ARCH, c=2, seed=1)
        prog = DWSProgram([Concat([[ColPool()], [select(2, [0])], [GlobalSum()]])], in_channels=2)
        assert prog.channel_trace() == [2, 5]
        out = prog.run(v)
        assert out.channels == 5
        np.testing.assert_array_equal(out.b[0][:, 2], v.b[0][:, 0])

    def test_channel_mismatch(self):
        v = random_weights(ARCH, c=2, seed=1)
        with pytest.raises(ChannelMismatch):
            DWSProgram([PointwiseAffine(np.eye(3))]).run(v)

    def test_json_round_trip(self, rng):
        const = constant_element(ARCH, lambda l, i, j: [float(l)], lambda l, i: [0.5 * l])
        prog = DWSProgram(
            [
                Concat([[ColPool(), BiasSum(1)], [Constant(const)], [LowerW2B(), UpperW2B(), RowPool()]]),
                PointwiseMLP(random_mlp((3, 4, 2), rng)),
                PointwiseNonlinearity("relu"),
                Concat([[FirstLayerNeuron(1)], [LastLayerNeuron(0)], [WeightIdentity()], [BiasIdentity()], [GlobalSum()]]),
                PointwiseAffine(rng.normal(size=(10, 1))),
            ],
            in_channels=1,
        )
        back = program_from_json(prog.to_json())
        assert back.to_dict() == prog.to_dict()
        v = random_weights(ARCH, seed=5)
        assert back.run(v).equal(prog.run(v))


class TestConstant:
    def test_invariant_constant_accepted(self):
        const = constant_element(ARCH, lambda l, i, j: [l + 0.1 * j] if l == 1 else [l + 0.1 * i], lambda l, i: [l])
        out = Constant(const)(random_weights(ARCH, seed=0))
        assert out.equal(const)

    def test_rejects_hidden_dependence(self):
        bad = constant_element(ARCH, lambda l, i, j: [1.0], lambda l, i: [float(i) if l == 1 else 0.0])
        with pytest.raises(NotInvariant):
            Constant(bad)

    def test_rejects_wrong_arch(self):
        with pytest.raises(WSKitError):
            Constant(zeros(ARCH))(random_weights(Architecture((1, 3, 2)), seed=0))
