import math

import numpy as np
import pytest

from hypgaf.errors import ResourceCapError
from hypgaf.indices import LayerIndex, enumerate_layer, layer_count, layer_layout


def test_two_dim_degree_two():
    idx = enumerate_layer(2, 2)
    assert idx.tolist() == [[2, 0], [1, 1], [0, 2]]
    assert layer_count(2, 2) == 3


def test_one_dim():
    for m in (0, 1, 7, 40):
        idx = enumerate_layer(1, m)
        assert idx.tolist() == [[m]]
        assert layer_count(1, m) == 1


def test_three_dim_degree_four_count():
    idx = enumerate_layer(3, 4)
    assert idx.shape[0] == 15 == math.comb(6, 2) == layer_count(3, 4)
    # rows sum to the degree, descending lex, no duplicates
    assert np.all(idx.sum(axis=1) == 4)
    rows = [tuple(r) for r in idx]
    assert rows == sorted(rows, reverse=True)
    assert len(set(rows)) == 15


def test_cap():
    with pytest.raises(ResourceCapError):
        enumerate_layer(4, 400, cap=1000)


def test_layer_index_dataclass():
    li = LayerIndex.build(2, 3)
    assert li.count == 4
    assert li.indices.shape == (4, 2)


def test_layout_slices():
    lay = layer_layout(2, 5)
    total = sum(layer_count(2, m) for m in range(6))
    assert lay.size == total
    for m in range(6):
        sl = lay.layer_slice(m)
        block = lay.exponents[sl]
        assert np.all(block.sum(axis=1) == m)
    degs = lay.degrees()
    assert degs.shape == (total,)
    assert degs[0] == 0 and degs[-1] == 5
