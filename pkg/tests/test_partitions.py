import math
from itertools import accumulate, product

import pytest
from hypothesis import given, strategies as st

from pbalance.partitions import (
    CoverTag,
    IntegerPartition,
    OrderResult,
    SetPartition,
    covers,
    dominance_compare,
    enumerate_integer_partitions,
    enumerate_set_partitions,
    gini_simpson_index,
    one_step_downshifts,
    restricted_growth_strings,
    set_partition_shape_counts,
    shannon_index,
    shape_multiplicity,
)

BELL = [1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]


def _bell_by_triangle(n):
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


@st.composite
def partitions(draw, n_max=14):
    n = draw(st.integers(1, n_max))
    parts = []
    left = n
    while left:
        p = draw(st.integers(1, left))
        parts.append(p)
        left -= p
    return IntegerPartition.from_sizes(parts)


def test_integer_partition_validation():
    with pytest.raises(ValueError):
        IntegerPartition((1, 2))
    with pytest.raises(ValueError):
        IntegerPartition((3, 0))
    with pytest.raises(ValueError):
        IntegerPartition(())
    p = IntegerPartition.from_sizes([1, 3, 2, 3])
    assert p.parts == (3, 3, 2, 1)
    assert (p.n, p.k) == (9, 4)
    assert p.multiplicities() == {3: 2, 2: 1, 1: 1}
    assert p.label() == "3-3-2-1"


def test_partition_counts():
    # p(7) = 15, p(10) = 42
    assert len(enumerate_integer_partitions(7)) == 15
    assert len(enumerate_integer_partitions(10)) == 42
    assert [p.parts for p in enumerate_integer_partitions(4)] == [(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)]


def test_exact_k_listing():
    got = [p.parts for p in enumerate_integer_partitions(10, 3)]
    assert got == [(8, 1, 1), (7, 2, 1), (6, 3, 1), (6, 2, 2), (5, 4, 1), (5, 3, 2), (4, 4, 2), (4, 3, 3)]
    with pytest.raises(ValueError):
        enumerate_integer_partitions(3, 4)


@pytest.mark.parametrize("n", range(1, 11))
def test_bell_numbers(n):
    assert sum(1 for _ in restricted_growth_strings(n)) == BELL[n - 1] == _bell_by_triangle(n)


def test_set_partition_guard():
    with pytest.raises(ValueError):
        next(restricted_growth_strings(14))


def test_set_partitions_are_distinct_and_canonical():
    seen = set()
    for sp in enumerate_set_partitions(6):
        assert SetPartition.from_labels(sp.labels) == sp
        seen.add(frozenset(frozenset(b) for b in sp.blocks))
    assert len(seen) == BELL[5]


def test_set_partition_constructors():
    sp = SetPartition.from_labels([7, 7, 2, 9, 2])
    assert sp.labels == (0, 0, 1, 2, 1)
    assert sp.blocks == [(0, 1), (2, 4), (3,)]
    assert sp.shape().parts == (2, 2, 1)
    assert SetPartition.from_blocks([[3], [0, 1], [2, 4]]).labels == (0, 0, 1, 2, 1)
    with pytest.raises(ValueError):
        SetPartition((1, 0))
    with pytest.raises(ValueError):
        SetPartition.from_blocks([[0, 1], [1]])


@pytest.mark.parametrize("n", range(1, 9))
def test_shape_multiplicity_matches_enumeration(n):
    counts = set_partition_shape_counts(n)
    for shape in enumerate_integer_partitions(n):
        assert counts[shape] == shape_multiplicity(shape)


def test_diversity_indices():
    a, b = IntegerPartition((6, 3, 1)), IntegerPartition((6, 2, 2))
    assert shannon_index(a) == pytest.approx(-(0.6 * math.log(0.6) + 0.3 * math.log(0.3) + 0.1 * math.log(0.1)))
    assert shannon_index(a) == pytest.approx(0.8979457248567797)
    assert gini_simpson_index(a) == pytest.approx(0.54)
    assert gini_simpson_index(b) == pytest.approx(0.56)
    assert shannon_index(IntegerPartition((5,))) == 0


def test_dominance_examples():
    a, b = IntegerPartition((8, 1, 1)), IntegerPartition((4, 3, 3))
    assert dominance_compare(a, b) is OrderResult.LESS
    assert dominance_compare(b, a) is OrderResult.GREATER
    assert dominance_compare(a, a) is OrderResult.EQUAL
    # (6,1,1,1,1) vs (5,4,1,0..) is not defined; use a genuinely incomparable pair in I_12^4
    c, d = IntegerPartition((6, 2, 2, 2)), IntegerPartition((5, 5, 1, 1))
    assert dominance_compare(c, d) is OrderResult.INCOMPARABLE
    with pytest.raises(ValueError):
        dominance_compare(IntegerPartition((2, 1)), IntegerPartition((1, 1, 1)))


def test_downshifts():
    got = [p.parts for p in one_step_downshifts(IntegerPartition((6, 3, 1)))]
    assert got == [(6, 2, 2), (5, 4, 1), (5, 3, 2)]
    assert one_step_downshifts(IntegerPartition((3, 3, 3))) == []


def test_cover_examples():
    c = covers(IntegerPartition((6, 3, 1)), IntegerPartition((6, 2, 2)))
    assert c and c.tag in (CoverTag.STARSTAR, CoverTag.BOTH) and c.s == 2
    c = covers(IntegerPartition((4, 4, 2)), IntegerPartition((4, 3, 3)))
    assert c and c.tag in (CoverTag.STARSTAR, CoverTag.BOTH) and c.s == 3
    c = covers(IntegerPartition((7, 2, 1)), IntegerPartition((6, 3, 1)))
    assert c and c.tag is CoverTag.STAR
    assert not covers(IntegerPartition((8, 1, 1)), IntegerPartition((6, 3, 1)))


def _le(a, b):
    return all(x >= y for x, y in zip(accumulate(a.parts), accumulate(b.parts)))


@pytest.mark.parametrize("n,k", [(8, 3), (10, 3), (10, 4), (12, 5)])
def test_covers_are_hasse_edges(n, k):
    """b covers a exactly when a < b with nothing strictly in between."""
    shapes = enumerate_integer_partitions(n, k)
    for a, b in product(shapes, shapes):
        if a == b or not _le(a, b):
            assert not covers(a, b)
            continue
        between = any(c != a and c != b and _le(a, c) and _le(c, b) for c in shapes)
        assert bool(covers(a, b)) == (not between)


@given(partitions())
def test_downshifts_are_more_balanced(p):
    for q in one_step_downshifts(p):
        assert dominance_compare(p, q) is OrderResult.LESS
        assert shannon_index(q) > shannon_index(p)
        assert gini_simpson_index(q) > gini_simpson_index(p)


@given(partitions(), partitions())
def test_order_antisymmetry(a, b):
    if (a.n, a.k) != (b.n, b.k):
        return
    assert dominance_compare(a, b) is dominance_compare(b, a).flipped()


@given(st.lists(st.integers(0, 5), min_size=1, max_size=12))
def test_from_labels_shape(labels):
    sp = SetPartition.from_labels(labels)
    assert sp.n == len(labels)
    assert sp.k == len(set(labels))
    assert sorted(sp.shape().parts) == sorted(labels.count(v) for v in set(labels))
