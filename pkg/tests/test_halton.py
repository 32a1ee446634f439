import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from uncage.errors import ContractViolation
from uncage.halton import halton_order, radical_inverse


@pytest.mark.parametrize("i,b,want", [
    (0, 2, 0.0), (1, 2, 0.5), (2, 2, 0.25), (3, 2, 0.75),
    (1, 3, 1 / 3), (2, 3, 2 / 3), (3, 3, 1 / 9),
])
def test_radical_inverse_examples(i, b, want):
    assert radical_inverse(i, b) == pytest.approx(want, abs=1e-15)


def test_radical_inverse_bad_base():
    with pytest.raises(ContractViolation):
        radical_inverse(3, 1)


@given(st.integers(0, 10**9), st.integers(2, 11))
def test_radical_inverse_oracle(i, b):
    want = oracles.radical_inverse(i, b)
    assert 0 <= want < 1
    assert radical_inverse(i, b) == float(want)


def test_small_orders():
    assert halton_order(1, 1).as_tuples() == [(0, 0)]
    assert halton_order(2, 2).as_tuples() == [(0, 1), (1, 0), (0, 0), (1, 1)]


def test_64_prefix_coverage():
    o = halton_order(64, 64).order
    assert len(o) == 4096
    assert len(set(o[:64, 0].tolist())) >= 14 and len(set(o[:64, 1].tolist())) >= 14


def test_order_is_read_only():
    o = halton_order(4, 4).order
    with pytest.raises(ValueError):
        o[0, 0] = 3


@given(st.integers(1, 128), st.integers(1, 128))
def test_permutation(h, w):
    o = halton_order(h, w).order
    cells = {tuple(p) for p in o.tolist()}
    assert len(o) == h * w == len(cells)
    assert cells == {(r, c) for r in range(h) for c in range(w)}


@given(st.integers(1, 24), st.integers(1, 24))
def test_matches_fraction_oracle(h, w):
    assert halton_order(h, w).as_tuples() == oracles.halton_order(h, w)


def test_deterministic():
    a = halton_order.__wrapped__(33, 17).order
    b = halton_order.__wrapped__(33, 17).order
    assert np.array_equal(a, b)


@pytest.mark.parametrize("n", [4, 8, 16, 32, 48, 64, 100, 128])
def test_prefix_spread(n):
    prefix = halton_order(n, n).order[:n]
    blocks = Counter(map(tuple, (prefix * 4 // n).tolist()))
    assert max(blocks.values()) <= math.ceil(n / 4)
