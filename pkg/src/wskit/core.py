"""MLP weight spaces, the hidden-neuron permutation group and its action.

Conventions used throughout the package:

* ``W[l]`` has shape ``(d_l, d_{l-1}, c)``: rows index the target neuron in
  layer ``l``, columns the source neuron in layer ``l-1``.
* ``b[l]`` has shape ``(d_l, c)``.
* Python lists are 0-based, so ``W[0]`` is the first layer. Anything that is
  reported to a user (error messages, JSON ``layer`` fields, one-hot layer
  codes) uses the 1-based layer number.
* A permutation is an image array: ``perm[i]`` is the position neuron ``i``
  moves to. The permutation matrix ``P`` has ``P[i, perm[i]] = 1``, so
  ``P.T @ W`` is the row gather ``W[inverse(perm)]``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ArchMismatch,
    DimensionMismatch,
    LengthMismatch,
    NonFiniteEntry,
    ShapeMismatch,
    UnsupportedChannels,
    WSKitError,
)

ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
    "identity": lambda x: x,
}


@dataclass(frozen=True)
class Architecture:
    dims: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 2:
            raise WSKitError(f"need at least one layer, got dims={dims}")
        if any(d < 1 for d in dims):
            raise WSKitError(f"layer widths must be positive, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise WSKitError(f"unsupported activation {self.activation!r}")

    @property
    def L(self) -> int:
        return len(self.dims) - 1

    @property
    def hidden_dims(self) -> tuple[int, ...]:
        return self.dims[1:-1]

    @property
    def n_params(self) -> int:
        """M = sum over layers of d_l * (1 + d_{l-1})."""
        return sum(self.dims[l] * (1 + self.dims[l - 1]) for l in range(1, self.L + 1))

    def weight_shape(self, l: int, c: int = 1) -> tuple[int, int, int]:
        return (self.dims[l + 1], self.dims[l], c)

    def bias_shape(self, l: int, c: int = 1) -> tuple[int, int]:
        return (self.dims[l + 1], c)

    def group_order(self) -> int:
        return math.prod(math.factorial(d) for d in self.hidden_dims)

    def __str__(self):
        return f"({','.join(map(str, self.dims))}; {self.activation})"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightElement:
    """An element of the weight space with ``c`` feature channels.

    Arrays are copied to float64 and made read-only on construction. Shapes
    are not checked here; call :func:`validate` for that.
    """

    arch: Architecture
    W: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "W", tuple(_frozen(w) for w in self.W))
        object.__setattr__(self, "b", tuple(_frozen(x) for x in self.b))

    @property
    def channels(self) -> int:
        return int(self.W[0].shape[-1]) if self.W[0].ndim == 3 else 1

    def channel(self, r: int) -> "WeightElement":
        """Slice out feature channel ``r`` (0-based) as a c=1 element."""
        return WeightElement(
            self.arch,
            tuple(w[..., r : r + 1] for w in self.W),
            tuple(x[..., r : r + 1] for x in self.b),
        )

    def map_entries(self, fn) -> "WeightElement":
        """Apply ``fn`` to every (..., c) block, weights and biases alike."""
        return WeightElement(
            self.arch, tuple(fn(w) for w in self.W), tuple(fn(x) for x in self.b)
        )

    def equal(self, other: "WeightElement") -> bool:
        """Bit-exact equality, including architecture."""
        return (
            self.arch == other.arch
            and all(np.array_equal(a, b) for a, b in zip(self.W, other.W))
            and all(np.array_equal(a, b) for a, b in zip(self.b, other.b))
        )

    def max_abs_diff(self, other: "WeightElement") -> float:
        diffs = [np.max(np.abs(a - b), initial=0.0) for a, b in zip(self.W, other.W)]
        diffs += [np.max(np.abs(a - b), initial=0.0) for a, b in zip(self.b, other.b)]
        return float(max(diffs))

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(a), initial=0.0) for a in self.W + self.b))

    def to_json_dict(self) -> dict:
        c = self.channels
        layers = []
        for w, x in zip(self.W, self.b):
            if c == 1:
                layers.append({"W": w[..., 0].tolist(), "b": x[..., 0].tolist()})
            else:
                layers.append({"W": w.tolist(), "b": x.tolist()})
        return {
            "dims": list(self.arch.dims),
            "activation": self.arch.activation,
            "channels": c,
            "layers": layers,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)


def zeros(arch: Architecture, c: int = 1) -> WeightElement:
    return WeightElement(
        arch,
        tuple(np.zeros(arch.weight_shape(l, c)) for l in range(arch.L)),
        tuple(np.zeros(arch.bias_shape(l, c)) for l in range(arch.L)),
    )


def from_matrices(arch: Architecture, Ws: Sequence, bs: Sequence) -> WeightElement:
    """Build a c=1 element from plain matrices/vectors and validate it."""
    W = tuple(np.asarray(w, dtype=np.float64)[..., None] for w in Ws)
    b = tuple(np.asarray(x, dtype=np.float64).reshape(-1)[:, None] for x in bs)
    v = WeightElement(arch, W, b)
    validate(arch, v)
    return v


def validate(arch: Architecture, v: WeightElement) -> None:
    if len(v.W) != arch.L or len(v.b) != arch.L:
        raise ShapeMismatch(0, (arch.L,), (len(v.W),), what="layers")
    c = v.channels
    if c < 1:
        raise ShapeMismatch(1, arch.weight_shape(0, 1), v.W[0].shape)
    for l in range(arch.L):
        if v.W[l].shape != arch.weight_shape(l, c):
            raise ShapeMismatch(l + 1, arch.weight_shape(l, c), v.W[l].shape, "W")
        if v.b[l].shape != arch.bias_shape(l, c):
            raise ShapeMismatch(l + 1, arch.bias_shape(l, c), v.b[l].shape, "b")
    for l in range(arch.L):
        for name, arr in (("W", v.W[l]), ("b", v.b[l])):
            bad = np.argwhere(~np.isfinite(arr))
            if len(bad):
                raise NonFiniteEntry(f"{name}_{l + 1}{list(map(int, bad[0]))}")


def from_json_dict(d: dict) -> WeightElement:
    arch = Architecture(tuple(d["dims"]), d.get("activation", "relu"))
    c = int(d.get("channels", 1))
    layers = d["layers"]
    if len(layers) != arch.L:
        raise ShapeMismatch(0, (arch.L,), (len(layers),), what="layers")
    Ws, bs = [], []
    for l, layer in enumerate(layers):
        w = np.asarray(layer["W"], dtype=np.float64)
        x = np.asarray(layer["b"], dtype=np.float64)
        if c == 1:
            w = w.reshape(w.shape + (1,)) if w.ndim == 2 else w
            x = x.reshape(x.shape + (1,)) if x.ndim == 1 else x
        if w.ndim != 3:
            raise ShapeMismatch(l + 1, arch.weight_shape(l, c), w.shape, "W")
        if x.ndim != 2:
            raise ShapeMismatch(l + 1, arch.bias_shape(l, c), x.shape, "b")
        Ws.append(w)
        bs.append(x)
    v = WeightElement(arch, tuple(Ws), tuple(bs))
    validate(arch, v)
    return v


def load_weights(path) -> WeightElement:
    with open(path) as fh:
        return from_json_dict(json.load(fh))


def save_weights(v: WeightElement, path) -> None:
    with open(path, "w") as fh:
        json.dump(v.to_json_dict(), fh)


# --------------------------------------------------------------------------
# group


@dataclass(frozen=True)
class GroupElement:
    perms: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        perms = tuple(tuple(int(i) for i in p) for p in self.perms)
        for l, p in enumerate(perms):
            if sorted(p) != list(range(len(p))):
                raise WSKitError(f"perms[{l}] = {p} is not a permutation")
        object.__setattr__(self, "perms", perms)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.perms)

    def is_identity(self) -> bool:
        return all(p == tuple(range(len(p))) for p in self.perms)


def identity(arch: Architecture) -> GroupElement:
    return GroupElement(tuple(tuple(range(d)) for d in arch.hidden_dims))


def _check_group(g: GroupElement, arch: Architecture):
    if g.sizes != arch.hidden_dims:
        raise ArchMismatch(
            f"group element sizes {g.sizes} do not match hidden widths {arch.hidden_dims}"
        )


def compose(g2: GroupElement, g1: GroupElement) -> GroupElement:
    """``compose(g2, g1)`` acts like g1 first, then g2."""
    if g1.sizes != g2.sizes:
        raise ArchMismatch(f"cannot compose groups of sizes {g2.sizes} and {g1.sizes}")
    return GroupElement(
        tuple(tuple(p2[p1[i]] for i in range(len(p1))) for p2, p1 in zip(g2.perms, g1.perms))
    )


def inverse(g: GroupElement) -> GroupElement:
    out = []
    for p in g.perms:
        inv = [0] * len(p)
        for i, j in enumerate(p):
            inv[j] = i
        out.append(tuple(inv))
    return GroupElement(tuple(out))


def enumerate_group(arch: Architecture) -> Iterator[GroupElement]:
    """All of G in lexicographic order of (perms[0], perms[1], ...)."""
    for combo in itertools.product(*(itertools.permutations(range(d)) for d in arch.hidden_dims)):
        yield GroupElement(combo)


def random_group_element(arch: Architecture, rng: np.random.Generator) -> GroupElement:
    return GroupElement(tuple(tuple(rng.permutation(d).tolist()) for d in arch.hidden_dims))


def act(g: GroupElement, v: WeightElement) -> WeightElement:
    """Apply the neuron permutation ``g`` to ``v``.

    Pure index gathering: the output entries are the input entries moved
    around, with no arithmetic.
    """
    arch = v.arch
    _check_group(g, arch)
    L = arch.L
    # gather index for layer l (1..L-1) is the inverse permutation; layers 0 and L are fixed
    gather = [np.arange(arch.dims[0])]
    gather += [np.array(p, dtype=np.intp) for p in inverse(g).perms]
    gather.append(np.arange(arch.dims[L]))
    W = tuple(v.W[l][gather[l + 1]][:, gather[l]] for l in range(L))
    b = tuple(v.b[l][gather[l + 1]] for l in range(L))
    return WeightElement(arch, W, b)


def is_general_position(v: WeightElement, tol: float = 0.0) -> bool:
    """True iff hidden biases in every hidden layer are pairwise more than ``tol`` apart."""
    if v.channels != 1:
        raise UnsupportedChannels("general position is defined for c = 1")
    for l in range(v.arch.L - 1):
        x = np.sort(v.b[l][:, 0])
        if len(x) > 1 and not np.all(np.diff(x) > tol):
            return False
    return True


# --------------------------------------------------------------------------
# realization


def realize(v: WeightElement, x) -> np.ndarray:
    """Evaluate f_v at a single input vector (or a batch of shape (n, d_0))."""
    if v.channels != 1:
        raise UnsupportedChannels("realize needs c = 1")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[-1] != v.arch.dims[0]:
        raise DimensionMismatch(f"input has length {h.shape[-1]}, expected {v.arch.dims[0]}")
    sigma = ACTIVATIONS[v.arch.activation]
    L = v.arch.L
    for l in range(L):
        h = h @ v.W[l][..., 0].T + v.b[l][:, 0]
        if l < L - 1:
            h = sigma(h)
    return h[0] if single else h


# --------------------------------------------------------------------------
# flattening


@dataclass(frozen=True, eq=False)
class FlatVector:
    """Row ``k`` of ``values.reshape(M, c)`` is the k-th entry in layout order.

    Layout: layer-major; within a layer the weight block (row-major) comes
    before the bias block; channels innermost.
    """

    values: np.ndarray
    arch: Architecture
    channels: int

    def as_matrix(self) -> np.ndarray:
        return self.values.reshape(self.arch.n_params, self.channels)


def flatten(v: WeightElement) -> FlatVector:
    c = v.channels
    parts = []
    for w, x in zip(v.W, v.b):
        parts.append(w.reshape(-1, c))
        parts.append(x.reshape(-1, c))
    values = np.concatenate(parts, axis=0).reshape(-1)
    return FlatVector(_frozen(values), v.arch, c)


def unflatten(f, arch: Architecture | None = None, c: int | None = None) -> WeightElement:
    if isinstance(f, FlatVector):
        arch = arch or f.arch
        c = c or f.channels
        values = f.values
    else:
        values = np.asarray(f, dtype=np.float64).reshape(-1)
        if arch is None or c is None:
            raise WSKitError("unflatten of a raw array needs arch and c")
    if values.size != arch.n_params * c:
        raise LengthMismatch(f"got {values.size} values, expected {arch.n_params} * {c}")
    rows = values.reshape(arch.n_params, c)
    W, b, k = [], [], 0
    for l in range(arch.L):
        n_w = arch.dims[l + 1] * arch.dims[l]
        W.append(rows[k : k + n_w].reshape(arch.weight_shape(l, c)))
        k += n_w
        b.append(rows[k : k + arch.dims[l + 1]].reshape(arch.bias_shape(l, c)))
        k += arch.dims[l + 1]
    return WeightElement(arch, tuple(W), tuple(b))


def entry_index(arch: Architecture):
    """Describe each flat row as ``(layer, is_bias, row, col)``; col is -1 for biases."""
    out = []
    for l in range(arch.L):
        for i in range(arch.dims[l + 1]):
            for j in range(arch.dims[l]):
                out.append((l + 1, 0, i, j))
        for i in range(arch.dims[l + 1]):
            out.append((l + 1, 1, i, -1))
    return out


# --------------------------------------------------------------------------
# sampling


def random_weights(
    arch: Architecture,
    c: int = 1,
    seed: int = 0,
    dist: tuple = ("uniform", -1.0, 1.0),
) -> WeightElement:
    """Draw weights from ``numpy.random.default_rng(seed)`` (PCG64).

    ``dist`` is ``("uniform", a, b)`` or ``("normal", mu, sigma)``. Entries are
    drawn layer by layer, weights before biases. For c = 1 the draw is
    repeated with a spawned child seed in the (probability zero) event that
    two hidden biases tie.
    """
    kind, p0, p1 = dist
    ss = np.random.SeedSequence(seed)
    while True:
        rng = np.random.default_rng(ss)
        if kind == "uniform":
            draw = lambda shape: rng.uniform(p0, p1, size=shape)
        elif kind == "normal":
            draw = lambda shape: rng.normal(p0, p1, size=shape)
        else:
            raise WSKitError(f"unknown distribution {kind!r}")
        W, b = [], []
        for l in range(arch.L):
            W.append(draw(arch.weight_shape(l, c)))
            b.append(draw(arch.bias_shape(l, c)))
        v = WeightElement(arch, tuple(W), tuple(b))
        if c > 1 or is_general_position(v):
            return v
        ss = ss.spawn(1)[0]
