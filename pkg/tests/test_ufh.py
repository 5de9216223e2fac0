from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dlqi.boundary import Clone
from dlqi.dlgraph import DLVertex, box_boundary_size, build_box, dl_distance
from dlqi.errors import ParameterError
from dlqi.lift import (
    VertexMap,
    build_psi,
    clone_box,
    psi_on_box,
    psi_preimage_vertices,
    up_interior_levels,
    up_vertex_map,
    zero_descendant,
)
from dlqi.qmaps import make_rng, shift_map
from dlqi.ufh import (
    CONSISTENT,
    INCONCLUSIVE,
    OBSTRUCTED,
    EdgeChain,
    UFChain,
    ball,
    boundary,
    bounded_matching,
    growth_verdict,
    pushforward,
    whyte_scan,
)


def test_boundary_examples():
    box = build_box(2, 2)
    x, y = box.vertex(0), box.vertex(5)
    c = boundary(EdgeChain({(x, y): 1}))
    assert c.coefficients == {y: 1, x: -1}
    assert boundary(EdgeChain({})).is_zero()
    v0 = box.vertex(0)
    v1 = box.neighbors(v0)[0]
    v2 = [w for w in box.neighbors(v1) if w != v0 and w.t == v0.t][0]
    v3 = [w for w in box.neighbors(v2) if w != v1 and v0 in box.neighbors(w)][0]
    cycle = EdgeChain({(v0, v1): 1, (v1, v2): 1, (v2, v3): 1, (v3, v0): 1})
    assert boundary(cycle).is_zero()


def test_chain_bounds():
    box = build_box(2, 2)
    with pytest.raises(ParameterError):
        UFChain({box.vertex(0): 3}, bound=2)
    far = (box.vertex(0), box.vertex(len(box) - 1))
    with pytest.raises(ParameterError, match="radius"):
        EdgeChain({far: 1}, radius=1)
    assert EdgeChain({far: 2}).radius == dl_distance(*far)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_boundary_kills_sums(seed):
    rng = make_rng(seed)
    box = build_box(2, 3)
    coeffs = {}
    for _ in range(int(rng.integers(1, 20))):
        i = int(rng.integers(len(box)))
        nbrs = box.neighbor_ids(i)
        j = nbrs[int(rng.integers(len(nbrs)))]
        coeffs[(box.vertex(i), box.vertex(j))] = int(rng.integers(-3, 4))
    assert boundary(EdgeChain(coeffs)).total() == 0


def test_pushforward_identity():
    box = build_box(3, 2)
    f = VertexMap({v: v for v in box}, box, box)
    assert pushforward(f, 1).is_zero()
    assert pushforward(f, 0).total() == len(box)


def test_pushforward_up_interior():
    box = build_box(2, 6)
    f = up_vertex_map(box, 2)
    interior = [box.vertex(i) for t in up_interior_levels(box, 2) for i in box.level_ids(t)]
    assert pushforward(f, 2, support=interior).is_zero()


def test_pushforward_mass():
    for lam_u in (1, -1):
        box, psi = psi_on_box(shift_map(Clone(2, 10), 1), shift_map(Clone(2, 10), lam_u), 6)
        raw = pushforward(psi, 0)
        assert raw.total() == len(psi)


def test_pushforward_psi_sum():
    box, psi = psi_on_box(shift_map(Clone(2, 10), 1), shift_map(Clone(2, 10), 0), 8)
    a = pushforward(psi, 1)
    # -|S|/2 in the bulk, corrected by the top layer
    assert a.total() == -8 * 2 ** 7
    inner = [v for v in box if box.a + 1 <= v.t <= box.b - 1]
    assert a.total(inner) == -len(inner) // 2


def test_growth_verdict():
    F = Fraction
    assert growth_verdict([F(1), F(2)]) == INCONCLUSIVE
    assert growth_verdict([F(1), F(3, 2), F(2)]) == OBSTRUCTED
    assert growth_verdict([F(1), F(3, 2), F(19, 10)]) == CONSISTENT
    assert growth_verdict([F(1), F(2), F(1), F(2)]) == CONSISTENT
    assert growth_verdict([F(0)] * 5) == CONSISTENT
    assert growth_verdict([F(0), F(1), F(2), F(3)]) == OBSTRUCTED


def test_whyte_identity():
    def family(H):
        box = build_box(2, H)
        return box, pushforward(VertexMap({v: v for v in box}, box, box), 1)

    rep = whyte_scan(family, [2, 3, 4, 5], 1)
    assert [row.sum_a for row in rep.rows] == [0, 0, 0, 0]
    assert rep.verdict == CONSISTENT


def psi_family(n, j_l, j_u, k, window=14):
    phi_l, phi_u = shift_map(Clone(n, window), j_l), shift_map(Clone(n, window), j_u)

    def family(H):
        box, psi = psi_on_box(phi_l, phi_u, H)
        return box, pushforward(psi, k, support=box)

    return family


def test_whyte_obstructed():
    rep = whyte_scan(psi_family(2, 1, 0, 1), range(4, 11), 1)
    assert rep.verdict == OBSTRUCTED
    assert [row.ratio for row in rep.rows] == [Fraction(H, 12) for H in range(4, 11)]
    assert rep.slope > 0


def test_whyte_consistent_when_product_is_one():
    rep = whyte_scan(psi_family(2, 1, -1, 1), range(4, 11), 1)
    assert rep.verdict == CONSISTENT
    assert {row.ratio for row in rep.rows} == {Fraction(1, 6)}
    box, chain = psi_family(2, 1, -1, 1)(8)
    inner = [v for v in box if box.a + 1 <= v.t <= box.b - 1]
    assert chain.total(inner) == 0


def step_up(w):
    return DLVertex(w.t + 1, w.x.parent(), w.y.child(0))


def step_down(w):
    return DLVertex(w.t - 1, w.x.child(0), w.y.parent())


@pytest.mark.parametrize("step", [step_up, step_down])
def test_bounded_distance_invariance(step):
    """g = step . psi stays within distance 1 of psi; on boxes taller than
    4 the verdicts agree and box sums differ by at most |d_1 S|."""
    phi_l, phi_u = shift_map(Clone(2, 14), 1), shift_map(Clone(2, 14), 0)
    maps = {}

    def both(H):
        if H not in maps:
            box = clone_box(zero_descendant(phi_l.range, H - H // 2), zero_descendant(phi_u.range, H // 2))
            # sources whose image lies one step outside S can still land in S under g
            src = psi_preimage_vertices(phi_l, phi_u, box.ancestor_box(1))
            f = build_psi(phi_l, phi_u, src, coverage="point", target=box)
            g = VertexMap({v: step(w) for v, w in f.table.items()}, None, box)
            assert all(dl_distance(f(v), g(v)) == 1 for v in src)
            maps[H] = box, f, g
        return maps[H]

    Hs = range(5, 11)
    a = whyte_scan(lambda H: (both(H)[0], pushforward(both(H)[1], 1)), Hs, 1)
    b = whyte_scan(lambda H: (both(H)[0], pushforward(both(H)[2], 1)), Hs, 1)
    assert a.verdict == b.verdict == OBSTRUCTED
    for ra, rb in zip(a.rows, b.rows):
        assert abs(ra.sum_a - rb.sum_a) <= box_boundary_size(2, ra.H, 1)


@pytest.mark.parametrize("n,k", [(2, 1), (2, 2), (3, 1), (3, 2)])
def test_obstruction_family(n, k):
    Hs = range(4, 11) if n == 2 else range(2, 7)
    for j_l, j_u in [(1, 0), (0, 0), (1, -1), (-1, 0), (0, 1)]:
        rep = whyte_scan(psi_family(n, j_l, j_u, k), Hs, 1)
        expect = CONSISTENT if Fraction(n) ** (-j_l - j_u) == k else OBSTRUCTED
        assert rep.verdict == expect, (n, k, j_l, j_u)


def test_matching_identity():
    box = build_box(2, 3)
    f = VertexMap({v: v for v in box}, box, box)
    rep = bounded_matching(f, 0)
    assert rep.perfect and rep.deficiency == 0
    assert rep.matching == f.table
    whyte = whyte_scan(lambda H: (build_box(2, H), pushforward(
        VertexMap({v: v for v in build_box(2, H)}, build_box(2, H), build_box(2, H)), 1)), [2, 3, 4], 1)
    assert whyte.verdict == CONSISTENT


@pytest.mark.parametrize("R", [1, 2, 3])
def test_matching_up_into_sublattice(R):
    box = build_box(2, 6)
    f = up_vertex_map(box, 2)
    targets = [v for v in box if v.t % 2 == 0]
    rep = bounded_matching(f, R, targets)
    interior = [v for v in box if v.t >= 1]
    assert not rep.perfect
    assert rep.deficiency >= len(interior) // 2
    assert len(rep.deficient_set) - rep.deficient_neighbourhood == rep.deficiency


def test_matching_control_boundary_only():
    box, psi = psi_on_box(shift_map(Clone(2, 10), 1), shift_map(Clone(2, 10), -1), 8)
    for R in (2, 3):
        rep = bounded_matching(psi, R)
        assert rep.deficiency <= box_boundary_size(2, 8, R)
        assert rep.deficiency >= len(psi) - len(box)
        assert all(dl_distance(psi(v), w) <= R for v, w in rep.matching.items())


def test_matching_certificate_is_hall_violation():
    box, psi = psi_on_box(shift_map(Clone(2, 10), 0), shift_map(Clone(2, 10), -1), 4)
    rep = bounded_matching(psi, 1)
    assert rep.deficiency > 0
    nbhd = set()
    for v in rep.deficient_set:
        nbhd |= {w for w in ball(psi(v), 1) if w in box}
    assert len(rep.deficient_set) - len(nbhd) == rep.deficiency


def test_matching_csv(tmp_path):
    box = build_box(2, 2)
    f = VertexMap({v: v for v in box}, box, box)
    bounded_matching(f, 0).write_csv(tmp_path / "m.csv", tmp_path / "w.csv", box, box)
    assert (tmp_path / "m.csv").read_text().splitlines()[1].startswith("1,0,")
    assert len((tmp_path / "w.csv").read_text().splitlines()) == 1 + len(box)
