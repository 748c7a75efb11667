from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from spencerkit.exact import (Echelon, LinearMap, ShapeError, block, direct_sum, format_rational, kernel, kron,
                              q, rank, vectors_independent)

small = st.integers(-4, 4)


def matrices(rows=st.integers(0, 5), cols=st.integers(0, 5)):
    return st.tuples(rows, cols).flatmap(
        lambda rc: st.lists(st.lists(small, min_size=rc[1], max_size=rc[1]), min_size=rc[0], max_size=rc[0])
        .map(lambda m, rc=rc: (rc, m)))


def to_map(rc, m, den=1):
    r, c = rc
    return LinearMap.from_entries(r, c, {(i, j): Fraction(m[i][j], den) for i in range(r) for j in range(c)})


def dense_rank(m):
    rows = [list(map(Fraction, r)) for r in m]
    rk, col, ncols = 0, 0, len(rows[0]) if rows else 0
    for col in range(ncols):
        piv = next((i for i in range(rk, len(rows)) if rows[i][col]), None)
        if piv is None:
            continue
        rows[rk], rows[piv] = rows[piv], rows[rk]
        for i in range(len(rows)):
            if i != rk and rows[i][col]:
                f = rows[i][col] / rows[rk][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rk])]
        rk += 1
    return rk


def test_q_rejects_floats():
    assert q("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        q(0.5)


def test_format_rational():
    assert format_rational(Fraction(-3, 6)) == "-1/2"
    assert format_rational(4) == "4"


@given(matrices())
@settings(max_examples=60, deadline=None)
def test_rank_matches_dense_elimination(data):
    rc, m = data
    assert rank(to_map(rc, m)) == dense_rank(m)


@given(matrices())
@settings(max_examples=60, deadline=None)
def test_kernel_is_kernel_and_rank_nullity(data):
    rc, m = data
    A = to_map(rc, m, den=3)
    ker = kernel(A)
    assert len(ker) + rank(A) == A.cols
    for v in ker:
        assert not A.apply(v)
    assert vectors_independent(ker)


@given(matrices(st.just(3), st.just(4)), matrices(st.just(4), st.just(2)))
@settings(max_examples=40, deadline=None)
def test_composition_matches_dense_product(a, b):
    A, B = to_map(*a, den=2), to_map(*b)
    AB = A @ B
    for i in range(3):
        for j in range(2):
            assert AB.entry(i, j) == sum(A.entry(i, k) * B.entry(k, j) for k in range(4))


def test_composition_shape_error():
    with pytest.raises(ShapeError):
        LinearMap.identity(2) @ LinearMap.identity(3)


def test_kron_and_block():
    a = LinearMap.from_entries(2, 2, {(0, 1): 1, (1, 0): Fraction(1, 2)})
    b = LinearMap.identity(3)
    k = kron(a, b)
    assert k.shape == (6, 6)
    assert k.entry(0, 3) == 1 and k.entry(5, 2) == Fraction(1, 2)
    s = direct_sum([a, b])
    assert s.shape == (5, 5) and s.entry(4, 4) == 1
    blk = block([[a, None], [None, b]], [2, 3], [2, 3])
    assert blk == s


def test_echelon_tracks_combinations():
    ech = Echelon(track=True)
    assert ech.insert({0: 1, 1: 2}, {0: 1}) == 0
    assert ech.insert({0: 2, 1: 4}, {1: 1}) is None
    assert ech.insert({0: 1, 2: 1}, {2: 1}) is not None
    res, tag = ech.reduce({1: 2, 2: -1}, {})
    assert not res


def test_zero_and_identity():
    z = LinearMap.zero(3, 2)
    assert z.is_zero() and rank(z) == 0
    assert rank(LinearMap.identity(5)) == 5
    assert (-LinearMap.identity(2) + LinearMap.identity(2)).is_zero()
