import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frontmarch import book as bk
from frontmarch.book import Book, TopologyError


def square():
    pos = {1: (0.0, 0.0), 2: (1.0, 0.0), 3: (1.0, 1.0), 4: (0.0, 1.0), 5: (1.1, 0.1)}
    return Book.from_cycles([[1, 2, 3, 4]]), pos


def seg_set(book):
    return sorted(book.segments())


def test_replace_node_relabels_both_segments():
    b, _ = square()
    bk.replace_node(b, 2, 5)
    assert (1, 5) in b.segments() and (3, 5) in b.segments()
    assert 2 not in b


def test_replace_is_an_involution():
    b, _ = square()
    before = seg_set(b)
    bk.replace_node(b, 2, 5)
    bk.replace_node(b, 5, 2)
    assert seg_set(b) == before


def test_replace_errors():
    b, _ = square()
    with pytest.raises(KeyError):
        bk.replace_node(b, 9, 10)
    b.add_segment(1, 3)
    with pytest.raises(TopologyError):
        bk.replace_node(b, 1, 10)


def test_drop_node_stitches_the_gap():
    b, pos = square()
    bk.drop_node(b, 2, pos)
    assert seg_set(b) == [(1, 3), (1, 4), (3, 4)]


def test_dropping_from_a_triangle_empties_the_band():
    pos = {1: (0, 0), 2: (1, 0), 3: (0, 1)}
    b = Book.from_cycles([[1, 2, 3]])
    bk.drop_node(b, 3, pos)
    assert sorted(b.segments()) == [(1, 2), (1, 2)]
    removed = bk.clean(b, pos)
    assert sorted(removed) == [1, 2] and len(b) == 0


def test_drop_absent_node():
    b, pos = square()
    with pytest.raises(KeyError):
        bk.drop_node(b, 42, pos)


def test_stitch_two_and_zero_hanging_nodes():
    b = Book()
    for n in (1, 2, 3):
        b.add_node(n)
    b.add_segment(1, 2)
    b.add_segment(2, 3)
    pos = {1: (0, 0), 2: (1, 0), 3: (2, 0)}
    assert bk.stitch_hanging_nodes(b, pos) == [(1, 3)]
    assert bk.stitch_hanging_nodes(b, pos) == []


def test_stitch_joins_the_nearest_pair_first():
    pos = {1: (0.0, 0.0), 2: (0.3, 0.0), 3: (5.0, 0.0), 4: (9.0, 1.0)}
    b = Book()
    for n in pos:
        b.add_node(n)
    b.add_node(10)
    b.add_node(11)
    pos.update({10: (0, 5), 11: (5, 5)})
    # 1, 2, 3, 4 hang off two chains 1-10-3 and 2-11-4
    for a, c in ((1, 10), (10, 3), (2, 11), (11, 4)):
        b.add_segment(a, c)
    added = bk.stitch_hanging_nodes(b, pos)
    dist = {p: math.dist(pos[p[0]], pos[p[1]]) for p in combinations([1, 2, 3, 4], 2)}
    assert added[0] == min(dist, key=dist.get)


def test_odd_hanging_count_is_an_error():
    b = Book()
    for n in (1, 2, 3):
        b.add_node(n)
    b.add_segment(1, 2)
    b.add_segment(2, 3)
    b.add_segment(3, 3)
    with pytest.raises(TopologyError):
        bk.stitch_hanging_nodes(b, {1: (0, 0), 2: (1, 0), 3: (2, 0)})


def test_multiplicity_reduces_a_four_way_node_to_two():
    # two triangles sharing node 0 (figure-eight pinch)
    pos = {0: (0, 0), 1: (-1, 0.5), 2: (-1, -0.5), 3: (1, 0.6), 4: (1, -0.6)}
    b = Book()
    for n in pos:
        b.add_node(n)
    for a, c in ((0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)):
        b.add_segment(a, c)
    bk.check_multiplicity(b, pos)
    assert b.degree(0) == 2
    assert all(b.degree(n) == 2 for n in b.nodes)


def test_loops_remove_self_loops_and_duplicates():
    pos = {1: (0, 0), 2: (1, 0), 3: (1, 1), 4: (0, 1)}
    b = Book.from_cycles([[1, 2, 3, 4]])
    b.add_segment(1, 1)
    bk.check_loops(b, pos)
    assert not bk.violations(b, pos)["loops"]
    b2 = Book.from_cycles([[1, 2, 3, 4]])
    b2.add_segment(1, 2)
    b2.remove_segment(2, 3)
    b2.remove_segment(4, 1)
    bk.clean(b2, pos)
    assert not any(bk.violations(b2, pos).values())


def test_bowtie_is_untangled():
    pos = {1: (0, 0), 2: (1, 1), 3: (1, 0), 4: (0, 1)}
    b = Book.from_cycles([[1, 2, 3, 4]])
    assert bk.violations(b, pos)["crossings"]
    bk.clean(b, pos)
    assert not bk.violations(b, pos)["crossings"]
    assert all(b.degree(n) == 2 for n in b.nodes)


@pytest.mark.parametrize("angle,removed", [(0.1 * math.pi, True), (0.5 * math.pi, False)])
def test_spike_threshold(angle, removed):
    pos = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (math.cos(angle), math.sin(angle)),
           3: (3.0, 3.0), 4: (-2.0, 2.5)}
    b = Book.from_cycles([[0, 1, 3, 4, 2]])
    out = bk.check_spikes(b, pos, nodes=[0])
    assert (0 in out) is removed


def test_segments_cross_predicates():
    assert bk.segments_cross((0, 0), (1, 1), (0, 1), (1, 0))
    assert not bk.segments_cross((0, 0), (1, 0), (0, 1), (1, 1))
    # touching at an interior point counts
    assert bk.segments_cross((0, 0), (2, 0), (1, 0), (1, 1))
    # collinear and disjoint
    assert not bk.segments_cross((0, 0), (1, 0), (2, 0), (3, 0))


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=3, max_size=14,
                unique=True),
       st.randoms(use_true_random=False))
def test_clean_restores_all_invariants(points, rnd):
    pos = {i: p for i, p in enumerate(points)}
    order = list(pos)
    rnd.shuffle(order)
    b = Book.from_cycles([order])
    before = len(b) + len(b.segments())
    bk.clean(b, pos)
    while bk.check_spikes(b, pos):
        bk.clean(b, pos)
    bad = bk.violations(b, pos)
    assert not any(bad.values()), bad
    assert len(b.segments()) == len(b)
    assert len(b) + len(b.segments()) <= before


def test_cycles_lists_each_polygon():
    b = Book.from_cycles([[1, 2, 3], [4, 5, 6, 7]])
    assert sorted(len(c) for c in b.cycles()) == [3, 4]
