from fractions import Fraction
from itertools import combinations, product

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from dlqi.boundary import (
    INFINITY,
    BoundaryPoint,
    Clone,
    CloneSet,
    clone_distance,
    hull,
    measure,
    parse_clone,
    parse_clone_set,
    qn_distance,
    refine,
    relation,
    separation,
    shadow,
)
from dlqi.errors import ContainmentError, ParameterError


def tree_distance(x, y, lo=-6, hi=6):
    """Meeting height of two rays in an explicitly built piece of T_{n+1}."""
    n = x.n
    g = nx.DiGraph()
    for p in (x, y):
        for h in range(lo, hi):
            g.add_edge((h, p.window(h)), (h + 1, p.window(h + 1)))
    if x == y:
        return Fraction(0)
    ray_x = [(h, x.window(h)) for h in range(lo, hi + 1)]
    ray_y = {(h, y.window(h)) for h in range(lo, hi + 1)}
    meet = next(v for v in ray_x if v in ray_y)
    assert nx.has_path(g, (lo, y.window(lo)), meet)
    return Fraction(n) ** meet[0]


points = st.builds(
    lambda n, d: BoundaryPoint.from_digits(n, {i: v % n for i, v in d.items()}),
    st.just(3),
    st.dictionaries(st.integers(-5, 4), st.integers(0, 2), max_size=5),
)


def test_distance_examples():
    z = BoundaryPoint.zero(2)
    assert qn_distance(z, z) == 0
    assert qn_distance(z, BoundaryPoint.from_digits(2, {0: 1})) == 2
    z3 = BoundaryPoint.zero(3)
    assert qn_distance(z3, BoundaryPoint.from_digits(3, {-2: 2})) == Fraction(1, 3)


def test_distance_examples_against_tree():
    z = BoundaryPoint.zero(2)
    y = BoundaryPoint.from_digits(2, {0: 1})
    assert tree_distance(z, y, -4, 4) == 2
    z3 = BoundaryPoint.zero(3)
    y3 = BoundaryPoint.from_digits(3, {-2: 2})
    assert tree_distance(z3, y3, -4, 4) == Fraction(1, 3)


@given(points, points)
def test_distance_matches_tree_oracle(x, y):
    assert qn_distance(x, y) == tree_distance(x, y)


@given(points, points, points)
def test_ultrametric(x, y, z):
    assert qn_distance(x, z) <= max(qn_distance(x, y), qn_distance(y, z))
    assert qn_distance(x, y) == qn_distance(y, x)
    assert (qn_distance(x, y) == 0) == (x == y)


def test_mismatched_n():
    with pytest.raises(ParameterError):
        qn_distance(BoundaryPoint.zero(2), BoundaryPoint.zero(3))


def test_shadow_measures():
    assert shadow(3, 0).measure == 1
    assert shadow(3, -2, (2, 1)).measure == Fraction(1, 9)
    assert shadow(2, 1, (0, 0)).measure == 2
    with pytest.raises(ParameterError):
        shadow(2, 0, (2,))


def test_measure_examples():
    assert measure(CloneSet()) == 0
    unit = Clone(2, 0)
    assert CloneSet(unit.children()).measure == 1
    assert CloneSet(refine(Clone(3, 0), 2)[:3]).measure == Fraction(1, 3)


def test_refine_examples():
    c = Clone(3, 0)
    assert refine(c, 0) == [c]
    r = refine(c, 2)
    assert len(r) == 9 and all(x.measure == Fraction(1, 9) for x in r)
    half = Clone(2, -1, (1,))
    r = refine(half, 3)
    assert len(r) == 8 and sum(x.measure for x in r) == half.measure
    assert all(x.measure == Fraction(1, 16) for x in r)


@pytest.mark.parametrize("depth", range(7))
def test_refinement_conservation(depth):
    c = Clone(2, 1, (1, 0, 1))
    parts = refine(c, depth)
    assert sum(p.measure for p in parts) == c.measure
    assert all(c.contains_clone(p) for p in parts)
    assert all(a.disjoint(b) for a, b in combinations(parts, 2))


clones = st.builds(
    lambda h, pre: Clone(2, h, tuple(pre)),
    st.integers(-3, 2),
    st.lists(st.integers(0, 1), max_size=4),
)


@given(clones, clones)
def test_clone_dichotomy(a, b):
    rel = relation(a, b)
    pa, pb = a.representative(), b.representative()
    if rel == "disjoint":
        assert not a.contains(pb) and not b.contains(pa)
        assert qn_distance(pa, pb) == clone_distance(a, b)
    elif rel == "subset":
        assert b.contains(pa)
    elif rel == "superset":
        assert a.contains(pb)
    else:
        assert a == b


@given(clones)
def test_measure_is_diameter(c):
    assert c.measure == Fraction(2) ** c.height
    pts = [c.point(below) for below in product(range(2), repeat=3)]
    assert max(qn_distance(p, q) for p in pts for q in pts) == c.measure


@given(st.lists(clones, max_size=6), st.randoms())
def test_canonical_form(cs, rnd):
    disjoint = []
    for c in cs:
        if all(c.disjoint(d) for d in disjoint):
            disjoint.append(c)
    s = CloneSet(disjoint)
    shuffled = list(disjoint)
    rnd.shuffle(shuffled)
    assert CloneSet(shuffled) == s
    assert CloneSet(s) == s
    assert s.measure == sum((c.measure for c in disjoint), Fraction(0))


def test_sibling_merge():
    assert CloneSet(refine(Clone(3, 1, (2,)), 2)).members == (Clone(3, 1, (2,)),)


def test_overlap_rejected():
    with pytest.raises(ParameterError):
        CloneSet([Clone(2, 0), Clone(2, -1)])


def exhaustive_sep(b, ambient, depth):
    cells = refine(ambient, depth)
    inside = [c for c in cells if b.contains_clone(c)]
    outside = [c for c in cells if not b.contains_clone(c)]
    if not outside:
        return INFINITY
    return min(qn_distance(p.representative(), q.representative()) for p in inside for q in outside)


def test_separation_examples():
    unit = Clone(3, 0)
    assert separation(CloneSet([unit]), unit).sep == INFINITY
    b = CloneSet([refine(unit, 2)[4]])
    s = separation(b, unit)
    assert s.sep == Fraction(1, 3) == exhaustive_sep(b, unit, 4)
    assert s.is_clone_union
    two = Clone(2, 1)
    b = CloneSet(refine(two, 2)[:2])
    assert separation(b, two).sep == exhaustive_sep(b, two, 4)
    b = CloneSet(refine(two, 1))
    assert separation(b, two).sep == INFINITY


@settings(max_examples=60)
@given(st.sets(st.integers(0, 15), min_size=1, max_size=8), st.integers(0, 1))
def test_separation_matches_exhaustive(idx, coarse):
    ambient = Clone(2, 1)
    cells = refine(ambient, 4)
    members = [cells[i] for i in sorted(idx)]
    if coarse:
        members = [c for c in members if c.prefix[:1] != (1,)] + [Clone(2, -2, (1, 1, 1))]
        members = [c for i, c in enumerate(members) if all(c.disjoint(d) for d in members[:i])]
    b = CloneSet(members)
    assert separation(b, ambient).sep == exhaustive_sep(b, ambient, 5)


def test_separation_containment():
    with pytest.raises(ContainmentError):
        separation(CloneSet([Clone(2, 2)]), Clone(2, 0))


def test_literals():
    c = parse_clone("3@-2:21")
    assert (c.n, c.height, c.prefix) == (3, -2, (2, 1))
    assert str(c) == "3@-2:21"
    assert parse_clone("2@1:000") == Clone(2, 1)
    assert parse_clone("12@0:[11]b").prefix == (11, 11)
    s = parse_clone_set("{2@-1:1, 2@-1:0}")
    assert s == CloneSet([Clone(2, 0)])
    assert parse_clone_set("{}") == CloneSet()
    with pytest.raises(ParameterError):
        parse_clone("3@x:1")


@given(clones)
def test_literal_roundtrip(c):
    assert parse_clone(str(c)) == c


def test_hull():
    assert hull([Clone(2, -2, (1, 0)), Clone(2, -2, (0, 1))]) == Clone(2, 0)
    assert hull([Clone(2, -1, (1,))]) == Clone(2, -1, (1,))
