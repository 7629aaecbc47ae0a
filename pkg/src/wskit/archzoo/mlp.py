"""Small MLPs used as message/update functions and pointwise feature maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Architecture, WeightElement, from_json_dict, from_matrices, realize
from ..errors import DimMismatch


@dataclass(frozen=True, eq=False)
class MLPSpec:
    """An MLP stored as a c=1 weight element (same JSON format as weight files)."""

    weights: WeightElement

    @property
    def arch(self) -> Architecture:
        return self.weights.arch

    @property
    def in_dim(self) -> int:
        return self.arch.dims[0]

    @property
    def out_dim(self) -> int:
        return self.arch.dims[-1]

    @property
    def activation(self) -> str:
        return self.arch.activation

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(w[..., 0], x[:, 0]) for w, x in zip(self.weights.W, self.weights.b)]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise DimMismatch(f"MLP expects input dim {self.in_dim}, got {x.shape[-1]}")
        lead = x.shape[:-1]
        out = realize(self.weights, x.reshape(-1, self.in_dim))
        return out.reshape(lead + (self.out_dim,))

    def to_json_dict(self) -> dict:
        return self.weights.to_json_dict()

    @classmethod
    def from_json_dict(cls, d: dict) -> "MLPSpec":
        return cls(from_json_dict(d))


def mlp_from_layers(layers, activation: str = "relu") -> MLPSpec:
    """``layers`` is a list of (W, b) with W shaped (out, in)."""
    Ws = [np.atleast_2d(np.asarray(w, dtype=np.float64)) for w, _ in layers]
    dims = [Ws[0].shape[1]] + [w.shape[0] for w in Ws]
    return MLPSpec(from_matrices(Architecture(tuple(dims), activation), Ws, [b for _, b in layers]))


def linear_mlp(A, u=None) -> MLPSpec:
    """Single affine layer x -> A x + u."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    u = np.zeros(A.shape[0]) if u is None else u
    return mlp_from_layers([(A, u)], "identity")


def random_mlp(dims, rng: np.random.Generator, activation: str = "relu", scale: float = 1.0) -> MLPSpec:
    dims = tuple(dims)
    layers = []
    for l in range(1, len(dims)):
        s = scale / np.sqrt(dims[l - 1])
        layers.append((rng.uniform(-s, s, (dims[l], dims[l - 1])), rng.uniform(-s, s, dims[l])))
    return mlp_from_layers(layers, activation)


def projection_mlp(in_dim: int, start: int, width: int) -> MLPSpec:
    """Linear map picking coordinates ``start:start+width`` of the input."""
    A = np.zeros((width, in_dim))
    A[np.arange(width), start + np.arange(width)] = 1.0
    return linear_mlp(A)


def zero_mlp(in_dim: int, out_dim: int) -> MLPSpec:
    return linear_mlp(np.zeros((out_dim, in_dim)))
