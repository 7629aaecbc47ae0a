"""Restricted set of equivariant weight-space layers and an executable program type.

Index convention follows :mod:`wskit.core`: ``W[l][i, j]`` connects source
neuron ``j`` of layer ``l-1`` to target neuron ``i`` of layer ``l``.

Besides the affine primitives the module provides pointwise nonlinearities,
pointwise MLPs, channel concatenation of sub-programs, column/row pooling,
the two "keep weights"/"keep biases" projections and G-invariant constants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import ACTIVATIONS, Architecture, WeightElement, from_json_dict, validate, zeros
from ..errors import ChannelMismatch, IndexOutOfRange, NotInvariant, WSKitError
from .mlp import MLPSpec, mlp_from_layers


def _like(v: WeightElement, W, b) -> WeightElement:
    return WeightElement(v.arch, tuple(W), tuple(b))


class Primitive:
    """Base class. ``in_channels`` of None means any channel count is accepted."""

    kind = "primitive"
    in_channels: int | None = None

    def out_channels(self, c_in: int) -> int:
        return c_in

    def check(self, v: WeightElement):
        if self.in_channels is not None and v.channels != self.in_channels:
            raise ChannelMismatch(f"{self.kind} expects {self.in_channels} channels, got {v.channels}")

    def __call__(self, v: WeightElement) -> WeightElement:
        self.check(v)
        return self.apply(v)

    def apply(self, v: WeightElement) -> WeightElement:  # pragma: no cover
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self):
        return f"{type(self).__name__}()"


@dataclass(repr=False)
class PointwiseAffine(Primitive):
    A: np.ndarray
    u: np.ndarray | None = None
    kind = "pointwise_affine"

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.u = np.zeros(self.A.shape[1]) if self.u is None else np.asarray(self.u, dtype=np.float64).reshape(-1)
        if self.u.shape != (self.A.shape[1],):
            raise ChannelMismatch(f"bias u has length {self.u.size}, expected {self.A.shape[1]}")

    @property
    def in_channels(self):
        return self.A.shape[0]

    def out_channels(self, c_in):
        return self.A.shape[1]

    def apply(self, v):
        return v.map_entries(lambda x: x @ self.A + self.u)

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "u": self.u.tolist()}


def select(c_in: int, idx: Sequence[int]) -> PointwiseAffine:
    """Channel selection (and reordering) as a 0/1 pointwise affine map."""
    idx = list(idx)
    if any(k < 0 or k >= c_in for k in idx):
        raise IndexOutOfRange(f"channel index out of range for c = {c_in}: {idx}")
    A = np.zeros((c_in, len(idx)))
    A[idx, np.arange(len(idx))] = 1.0
    return PointwiseAffine(A)


class GlobalSum(Primitive):
    kind = "global_sum"

    def apply(self, v):
        s = sum(w.reshape(-1, v.channels).sum(axis=0) for w in v.W)
        s = s + sum(x.sum(axis=0) for x in v.b)
        return v.map_entries(lambda x: np.broadcast_to(s, x.shape))


@dataclass(repr=False)
class BiasSum(Primitive):
    layer: int  # 1-based
    kind = "bias_sum"

    def apply(self, v):
        L = v.arch.L
        if not 1 <= self.layer <= L:
            raise IndexOutOfRange(f"bias_sum layer {self.layer} not in 1..{L}")
        out = zeros(v.arch, v.channels)
        b = list(out.b)
        x = v.b[self.layer - 1]
        b[self.layer - 1] = np.broadcast_to(x.sum(axis=0), x.shape)
        return _like(v, out.W, b)

    def to_dict(self):
        return {"kind": self.kind, "layer": self.layer}


class LowerW2B(Primitive):
    """W_l[i, j] <- b_{l-1}[j]; first layer has no lower bias and is zero-filled."""

    kind = "lower_w2b"

    def apply(self, v):
        W = [np.zeros_like(v.W[0])]
        for l in range(1, v.arch.L):
            W.append(np.broadcast_to(v.b[l - 1][None, :, :], v.W[l].shape))
        return _like(v, W, v.b)


class UpperW2B(Primitive):
    """W_l[i, j] <- b_l[i]."""

    kind = "upper_w2b"

    def apply(self, v):
        W = [np.broadcast_to(x[:, None, :], w.shape) for w, x in zip(v.W, v.b)]
        return _like(v, W, v.b)


@dataclass(repr=False)
class FirstLayerNeuron(Primitive):
    """Keep the first-layer weights leaving input neuron ``index`` (0-based); zero the rest."""

    index: int
    kind = "first_layer_neuron"

    def apply(self, v):
        if not 0 <= self.index < v.arch.dims[0]:
            raise IndexOutOfRange(f"input neuron {self.index} not in 0..{v.arch.dims[0] - 1}")
        out = zeros(v.arch, v.channels)
        W = list(out.W)
        w = np.zeros_like(v.W[0])
        w[:, self.index] = v.W[0][:, self.index]
        W[0] = w
        return _like(v, W, out.b)

    def to_dict(self):
        return {"kind": self.kind, "index": self.index}


@dataclass(repr=False)
class LastLayerNeuron(Primitive):
    """Keep b_L[index] (0-based); zero everything else."""

    index: int
    kind = "last_layer_neuron"

    def apply(self, v):
        if not 0 <= self.index < v.arch.dims[-1]:
            raise IndexOutOfRange(f"output neuron {self.index} not in 0..{v.arch.dims[-1] - 1}")
        out = zeros(v.arch, v.channels)
        b = list(out.b)
        x = np.zeros_like(v.b[-1])
        x[self.index] = v.b[-1][self.index]
        b[-1] = x
        return _like(v, out.W, b)

    def to_dict(self):
        return {"kind": self.kind, "index": self.index}


class ColPool(Primitive):
    """b_l[i] <- sum_j W_l[i, j]; weights zeroed. Pools each neuron's incoming edges."""

    kind = "col_pool"

    def apply(self, v):
        W = [np.zeros_like(w) for w in v.W]
        b = [w.sum(axis=1) for w in v.W]
        return _like(v, W, b)


class RowPool(Primitive):
    """b_l[j] <- sum_k W_{l+1}[k, j]; b_L and weights zeroed. Pools outgoing edges."""

    kind = "row_pool"

    def apply(self, v):
        W = [np.zeros_like(w) for w in v.W]
        b = [v.W[l + 1].sum(axis=0) for l in range(v.arch.L - 1)]
        b.append(np.zeros_like(v.b[-1]))
        return _like(v, W, b)


class WeightIdentity(Primitive):
    """Keep weights, zero biases."""

    kind = "weight_identity"

    def apply(self, v):
        return _like(v, v.W, [np.zeros_like(x) for x in v.b])


class BiasIdentity(Primitive):
    """Keep biases, zero weights."""

    kind = "bias_identity"

    def apply(self, v):
        return _like(v, [np.zeros_like(w) for w in v.W], v.b)


def check_invariant(C: WeightElement) -> None:
    """Raise NotInvariant unless C is constant along every hidden-neuron axis."""
    L = C.arch.L
    for l in range(L):
        w, x = C.W[l], C.b[l]
        if l < L - 1:  # rows index a hidden layer
            if not (np.array_equal(w, np.broadcast_to(w[:1], w.shape)) and np.array_equal(x, np.broadcast_to(x[:1], x.shape))):
                raise NotInvariant(f"constant varies across hidden neurons of layer {l + 1}")
        if l > 0 and not np.array_equal(w, np.broadcast_to(w[:, :1], w.shape)):
            raise NotInvariant(f"constant W_{l + 1} varies across hidden neurons of layer {l}")


@dataclass(repr=False)
class Constant(Primitive):
    """Output a fixed G-invariant element regardless of the input."""

    value: WeightElement
    kind = "constant"

    def __post_init__(self):
        validate(self.value.arch, self.value)
        check_invariant(self.value)

    def out_channels(self, c_in):
        return self.value.channels

    def apply(self, v):
        if v.arch != self.value.arch:
            raise WSKitError(f"constant built for {self.value.arch}, got {v.arch}")
        return self.value

    def to_dict(self):
        return {"kind": self.kind, "value": self.value.to_json_dict()}


@dataclass(repr=False)
class PointwiseNonlinearity(Primitive):
    activation: str = "relu"
    kind = "pointwise_nonlinearity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise WSKitError(f"unsupported activation {self.activation!r}")

    def apply(self, v):
        f = ACTIVATIONS[self.activation]
        return v.map_entries(f)

    def to_dict(self):
        return {"kind": self.kind, "activation": self.activation}


@dataclass(repr=False)
class PointwiseMLP(Primitive):
    mlp: MLPSpec
    kind = "pointwise_mlp"

    @property
    def in_channels(self):
        return self.mlp.in_dim

    def out_channels(self, c_in):
        return self.mlp.out_dim

    def apply(self, v):
        return v.map_entries(self.mlp)

    def to_dict(self):
        return {"kind": self.kind, "mlp": self.mlp.to_json_dict()}


def lift_mlp(mlp: MLPSpec) -> list[Primitive]:
    """Express a pointwise MLP as alternating pointwise affine maps and nonlinearities."""
    steps: list[Primitive] = []
    layers = mlp.layers()
    for k, (w, x) in enumerate(layers):
        steps.append(PointwiseAffine(w.T, x))
        if k < len(layers) - 1:
            steps.append(PointwiseNonlinearity(mlp.activation))
    return steps


@dataclass(repr=False)
class Concat(Primitive):
    """Run each branch on the same input and stack their outputs along channels."""

    branches: list
    kind = "concat"

    def __post_init__(self):
        self.branches = [b if isinstance(b, DWSProgram) else DWSProgram(list(b) if isinstance(b, (list, tuple)) else [b]) for b in self.branches]
        if not self.branches:
            raise WSKitError("concat needs at least one branch")

    def out_channels(self, c_in):
        return sum(b.out_channels(c_in) for b in self.branches)

    def check(self, v):
        for b in self.branches:
            b.out_channels(v.channels)

    def apply(self, v):
        outs = [b.run(v) for b in self.branches]
        W = [np.concatenate([o.W[l] for o in outs], axis=-1) for l in range(v.arch.L)]
        b = [np.concatenate([o.b[l] for o in outs], axis=-1) for l in range(v.arch.L)]
        return _like(v, W, b)

    def to_dict(self):
        return {"kind": self.kind, "branches": [b.to_dict() for b in self.branches]}


@dataclass
class DWSProgram:
    steps: list = field(default_factory=list)
    in_channels: int | None = None

    def out_channels(self, c_in: int | None = None) -> int:
        c = self.in_channels if c_in is None else c_in
        if c is None:
            raise ChannelMismatch("program input channel count is unknown")
        if self.in_channels is not None and c != self.in_channels:
            raise ChannelMismatch(f"program expects {self.in_channels} channels, got {c}")
        for k, p in enumerate(self.steps):
            if p.in_channels is not None and p.in_channels != c:
                raise ChannelMismatch(f"step {k} ({p.kind}) expects {p.in_channels} channels, got {c}")
            c = p.out_channels(c)
        return c

    def channel_trace(self, c_in: int | None = None) -> list[int]:
        c = self.in_channels if c_in is None else c_in
        trace = [c]
        for p in self.steps:
            c = p.out_channels(c)
            trace.append(c)
        return trace

    def run(self, v: WeightElement) -> WeightElement:
        self.out_channels(v.channels)
        for p in self.steps:
            v = p(v)
        return v

    __call__ = run

    def to_dict(self) -> dict:
        return {"in_channels": self.in_channels, "steps": [p.to_dict() for p in self.steps]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def dws_apply(p: Primitive, v: WeightElement) -> WeightElement:
    return p(v)


def dws_run(prog: DWSProgram, v: WeightElement) -> WeightElement:
    return prog.run(v)


_SIMPLE = {
    cls.kind: cls
    for cls in (GlobalSum, LowerW2B, UpperW2B, ColPool, RowPool, WeightIdentity, BiasIdentity)
}


def primitive_from_dict(d: dict) -> Primitive:
    kind = d["kind"]
    if kind in _SIMPLE:
        return _SIMPLE[kind]()
    if kind == "pointwise_affine":
        return PointwiseAffine(np.asarray(d["A"], dtype=np.float64).reshape(len(d["A"]), -1), d["u"])
    if kind == "bias_sum":
        return BiasSum(int(d["layer"]))
    if kind == "first_layer_neuron":
        return FirstLayerNeuron(int(d["index"]))
    if kind == "last_layer_neuron":
        return LastLayerNeuron(int(d["index"]))
    if kind == "constant":
        return Constant(from_json_dict(d["value"]))
    if kind == "pointwise_nonlinearity":
        return PointwiseNonlinearity(d["activation"])
    if kind == "pointwise_mlp":
        return PointwiseMLP(MLPSpec.from_json_dict(d["mlp"]))
    if kind == "concat":
        return Concat([program_from_dict(b) for b in d["branches"]])
    raise WSKitError(f"unknown primitive kind {kind!r}")


def program_from_dict(d: dict) -> DWSProgram:
    return DWSProgram([primitive_from_dict(s) for s in d["steps"]], d.get("in_channels"))


def program_from_json(s: str) -> DWSProgram:
    return program_from_dict(json.loads(s))


def constant_element(arch: Architecture, weight_fn, bias_fn) -> WeightElement:
    """Build a constant from per-entry callbacks ``weight_fn(l, i, j)`` and ``bias_fn(l, i)``.

    ``l`` is the 1-based layer; callbacks return feature vectors of equal length.
    """
    W, b = [], []
    for l in range(1, arch.L + 1):
        W.append(np.array([[weight_fn(l, i, j) for j in range(arch.dims[l - 1])] for i in range(arch.dims[l])], dtype=np.float64))
        b.append(np.array([bias_fn(l, i) for i in range(arch.dims[l])], dtype=np.float64))
    return WeightElement(arch, tuple(W), tuple(b))


__all__ = [
    "Primitive",
    "PointwiseAffine",
    "select",
    "GlobalSum",
    "BiasSum",
    "LowerW2B",
    "UpperW2B",
    "FirstLayerNeuron",
    "LastLayerNeuron",
    "ColPool",
    "RowPool",
    "WeightIdentity",
    "BiasIdentity",
    "Constant",
    "check_invariant",
    "constant_element",
    "PointwiseNonlinearity",
    "PointwiseMLP",
    "lift_mlp",
    "Concat",
    "DWSProgram",
    "dws_apply",
    "dws_run",
    "primitive_from_dict",
    "program_from_dict",
    "program_from_json",
    "mlp_from_layers",
]
