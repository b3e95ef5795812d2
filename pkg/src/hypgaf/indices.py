"""Multi-index layers: all alpha in N^n with |alpha| = m, in descending lex order."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ResourceCapError

__all__ = ["layer_count", "enumerate_layer", "LayerIndex", "layer_layout"]

DEFAULT_INDEX_CAP = 5_000_000


def layer_count(n, m):
    """N(n, m) = Gamma(n+m) / (m! Gamma(n)) = binomial(m+n-1, n-1)."""
    return math.comb(m + n - 1, n - 1)


@lru_cache(maxsize=4096)
def _layer_tuple(n, m):
    if n == 1:
        return ((m,),)
    rows = []
    for k in range(m, -1, -1):
        rows.extend((k,) + rest for rest in _layer_tuple(n - 1, m - k))
    return tuple(rows)


def enumerate_layer(n, m, cap=DEFAULT_INDEX_CAP):
    """Exponent table of shape (N(n,m), n), rows in descending lex order."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    count = layer_count(n, m)
    if count > cap:
        raise ResourceCapError(f"layer (n={n}, m={m}) has {count} indices (cap {cap})")
    return np.array(_layer_tuple(n, m), dtype=np.int64).reshape(count, n)


@dataclass(frozen=True)
class LayerIndex:
    """One total-degree layer of multi-indices."""

    n: int
    m: int
    indices: np.ndarray
    count: int

    @classmethod
    def build(cls, n, m, cap=DEFAULT_INDEX_CAP):
        idx = enumerate_layer(n, m, cap=cap)
        return cls(n=n, m=m, indices=idx, count=idx.shape[0])


@dataclass(frozen=True)
class LayerLayout:
    """All layers 0..M stacked; coefficient vectors use this fixed ordering."""

    n: int
    max_degree: int
    exponents: np.ndarray      # (K, n) int64, layers concatenated in degree order
    offsets: np.ndarray        # (M+2,) start offset of each layer; offsets[-1] = K

    @property
    def size(self):
        return self.exponents.shape[0]

    def layer_slice(self, m):
        return slice(int(self.offsets[m]), int(self.offsets[m + 1]))

    def degrees(self):
        return np.repeat(np.arange(self.max_degree + 1), np.diff(self.offsets))


@lru_cache(maxsize=256)
def _layout_cached(n, max_degree, cap):
    blocks = [enumerate_layer(n, m, cap=cap) for m in range(max_degree + 1)]
    sizes = [b.shape[0] for b in blocks]
    total = int(np.sum(sizes))
    if total > cap:
        raise ResourceCapError(f"layout (n={n}, M={max_degree}) has {total} indices (cap {cap})")
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return LayerLayout(n=n, max_degree=max_degree,
                       exponents=np.concatenate(blocks, axis=0), offsets=offsets)


def layer_layout(n, max_degree, cap=DEFAULT_INDEX_CAP):
    return _layout_cached(int(n), int(max_degree), int(cap))
