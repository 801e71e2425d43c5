import numpy as np
import pytest
from hypothesis import given, strategies as st

from topocbt.gf2 import gf2_matmul, gf2_rank, gf2_row_echelon


def test_rank_identity():
    assert gf2_rank(np.eye(4, dtype=np.uint8)) == 4


def test_rank_zero_and_empty():
    assert gf2_rank(np.zeros((3, 5), dtype=np.uint8)) == 0
    assert gf2_rank(np.zeros((0, 0), dtype=np.uint8)) == 0
    assert gf2_rank(np.zeros((0, 4), dtype=np.uint8)) == 0


def test_rank_dependent_rows_mod2():
    # row3 = row1 XOR row2, so rank drops to 2
    m = np.array([[1, 0, 1], [0, 1, 1], [1, 1, 0]], dtype=np.uint8)
    assert gf2_rank(m) == 2


def test_rank_char2_differs_from_rationals():
    # invertible over Q, singular over GF(2)
    m = np.array([[1, 1], [1, 1]], dtype=np.uint8)
    assert gf2_rank(m) == 1


def test_echelon_pivots_deterministic():
    m = np.array([[0, 1, 1], [1, 1, 0], [1, 0, 1]], dtype=np.uint8)
    r1, p1 = gf2_row_echelon(m)
    r2, p2 = gf2_row_echelon(m)
    assert np.array_equal(r1, r2)
    assert p1 == p2 == [0, 1]


def test_matmul_mod2():
    a = np.array([[1, 1], [0, 1]], dtype=np.uint8)
    b = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    assert gf2_matmul(a, b).tolist() == [[0, 1], [1, 1]]


@given(st.integers(0, 2**30))
def test_rank_bounds_random(seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(0, 2, size=(rng.integers(1, 8), rng.integers(1, 8))).astype(np.uint8)
    r = gf2_rank(m)
    assert 0 <= r <= min(m.shape)
    # rank is invariant under row shuffles
    perm = rng.permutation(m.shape[0])
    assert gf2_rank(m[perm]) == r
