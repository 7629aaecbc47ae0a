"""Exact piecewise-affine descriptions of 1-D input ReLU networks."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import Architecture, WeightElement, validate
from .errors import IntervalMismatch, UnsupportedArch, WSKitError

DEDUP_TOL = 1e-12
CAP_LOG2 = 62


@dataclass(frozen=True, eq=False)
class PL1D:
    """Continuous piecewise-affine map on ``[a, b]``.

    ``slopes`` and ``intercepts`` have shape ``(k + 1, d_out)``; segment ``s``
    covers ``[t_s, t_{s+1}]`` with ``t_0 = a`` and ``t_{k+1} = b``.
    """

    interval: tuple[float, float]
    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    @property
    def n_regions(self) -> int:
        return len(self.slopes)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[self.interval[0]], self.breakpoints, [self.interval[1]]])

    def segment_of(self, x) -> np.ndarray:
        return np.searchsorted(self.breakpoints, np.asarray(x, dtype=np.float64), side="right")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        s = self.segment_of(x)
        return self.slopes[s] * x[..., None] + self.intercepts[s]

    def to_json_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "breakpoints": self.breakpoints.tolist(),
            "segments": [
                {"slope": self.slopes[k].tolist(), "intercept": self.intercepts[k].tolist()}
                for k in range(self.n_regions)
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)


def _check(v: WeightElement):
    validate(v.arch, v)
    if v.arch.dims[0] != 1:
        raise UnsupportedArch(f"exact enumeration needs d_0 = 1, got {v.arch.dims[0]}")
    if v.arch.activation != "relu":
        raise UnsupportedArch(f"exact enumeration needs relu, got {v.arch.activation}")
    if v.channels != 1:
        raise UnsupportedArch("exact enumeration needs c = 1")


def _crossings(slope, icpt, lo, hi) -> list[float]:
    pts = []
    for s, t in zip(slope, icpt):
        if s != 0.0:
            x = -t / s
            if lo + DEDUP_TOL < x < hi - DEDUP_TOL:
                pts.append(float(x))
    pts.sort()
    out = []
    for x in pts:
        if not out or x - out[-1] > DEDUP_TOL:
            out.append(x)
    return out


def _merge(cuts, slopes, icpts, tol):
    """Drop breakpoints whose neighbouring pieces coincide."""
    keep_s, keep_t, keep_b = [slopes[0]], [icpts[0]], []
    for k in range(1, len(slopes)):
        s, t = slopes[k], icpts[k]
        scale = 1.0 + max(np.max(np.abs(s)), np.max(np.abs(t)), np.max(np.abs(keep_s[-1])), np.max(np.abs(keep_t[-1])))
        if np.all(np.abs(s - keep_s[-1]) <= tol * scale) and np.all(np.abs(t - keep_t[-1]) <= tol * scale):
            continue
        keep_b.append(cuts[k - 1])
        keep_s.append(s)
        keep_t.append(t)
    return np.array(keep_b, dtype=np.float64), np.array(keep_s), np.array(keep_t)


def regions_1d(v: WeightElement, interval=(-1.0, 1.0), merge_tol: float = 1e-12) -> PL1D:
    """Propagate segment lists layer by layer, splitting where a ReLU input changes sign."""
    _check(v)
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise WSKitError(f"empty interval [{a}, {b}]")
    L = v.arch.L
    # each segment: (lo, hi, slope vector, intercept vector) of the current layer's outputs
    segs = [(a, b, np.ones(1), np.zeros(1))]
    for l in range(L):
        W, bias = v.W[l][..., 0], v.b[l][:, 0]
        new = []
        for lo, hi, s, t in segs:
            zs, zt = W @ s, W @ t + bias
            if l == L - 1:
                new.append((lo, hi, zs, zt))
                continue
            cuts = [lo] + _crossings(zs, zt, lo, hi) + [hi]
            for p, q in zip(cuts[:-1], cuts[1:]):
                mid = 0.5 * (p + q)
                on = (zs * mid + zt) > 0
                new.append((p, q, np.where(on, zs, 0.0), np.where(on, zt, 0.0)))
        segs = new
    cuts = [seg[1] for seg in segs[:-1]]
    bps, slopes, icpts = _merge(cuts, [seg[2] for seg in segs], [seg[3] for seg in segs], merge_tol)
    return PL1D((a, b), bps, slopes, icpts)


def region_bound_info(arch: Architecture) -> tuple[int, bool]:
    """(M_A, saturated) for M_0 = 1, M_l = M_{l-1}^{d_{l-1}} * 2^{d_l}, l = 1..L-1.

    The value saturates at 2**62; the flag reports whether that happened.
    """
    if arch.activation != "relu":
        raise UnsupportedArch("the region bound is stated for relu networks")
    log2m = 0.0
    m = 1
    for l in range(1, arch.L):
        log2m = log2m * arch.dims[l - 1] + arch.dims[l]
        if log2m > CAP_LOG2:
            return 2**CAP_LOG2, True
        m = m ** arch.dims[l - 1] * 2 ** arch.dims[l]
    return m, False


def region_bound(arch: Architecture) -> int:
    return region_bound_info(arch)[0]


def pl_equal(p: PL1D, q: PL1D, tol: float = 1e-9) -> bool:
    """Compare two PL maps cell by cell on the union of their breakpoints."""
    if p.interval != q.interval:
        raise IntervalMismatch(f"{p.interval} vs {q.interval}")
    if p.slopes.shape[1] != q.slopes.shape[1]:
        return False
    pts = np.sort(np.concatenate([p.breakpoints, q.breakpoints]))
    cuts = [p.interval[0]]
    for x in pts:
        if x - cuts[-1] > tol:
            cuts.append(float(x))
    cuts.append(p.interval[1])
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        i, j = p.segment_of(mid), q.segment_of(mid)
        if np.any(np.abs(p.slopes[i] - q.slopes[j]) > tol) or np.any(np.abs(p.intercepts[i] - q.intercepts[j]) > tol):
            return False
    return True


def is_essential(p: PL1D, tol: float = 1e-12) -> bool:
    return all(
        not (np.allclose(p.slopes[k], p.slopes[k + 1], rtol=0, atol=tol) and np.allclose(p.intercepts[k], p.intercepts[k + 1], rtol=0, atol=tol))
        for k in range(p.n_regions - 1)
    )


def pl_from_json_dict(d: dict) -> PL1D:
    segs = d["segments"]
    return PL1D(
        tuple(d["interval"]),
        np.asarray(d["breakpoints"], dtype=np.float64),
        np.array([s["slope"] for s in segs], dtype=np.float64),
        np.array([s["intercept"] for s in segs], dtype=np.float64),
    )


__all__ = [
    "PL1D",
    "regions_1d",
    "region_bound",
    "region_bound_info",
    "pl_equal",
    "is_essential",
    "pl_from_json_dict",
]
