"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line with its wall time and the time
limit it must respect.  Run ``pytest tests/test_acceptance.py -v`` to see
them inline, or ``python tests/test_acceptance.py`` for just the lines.
"""
import math
import sys
import time
from contextlib import contextmanager
from fractions import Fraction

from dlqi.boundary import Clone, CloneSet, refine
from dlqi.cli import ExperimentConfig, run_obstruction
from dlqi.dlgraph import box_boundary_size, build_box, folner_scan
from dlqi.lift import pi, pi_bar, preimage_audit, psi_on_box, up_interior_levels, up_vertex_map
from dlqi.qmaps import (
    bilipschitz_bound,
    check_prime_support,
    image,
    make_rng,
    measure_linear_report,
    random_measure_linear_map,
    random_piecewise_map,
    random_point,
    search_measure_linear_maps,
    shift_map,
    zoom_limit,
    zoom_step,
)


@contextmanager
def criterion(capsys, label, limit):
    """Time the block, print a verdict line, and fail on errors or overruns."""
    start = time.perf_counter()
    ok, err = False, None
    try:
        yield
        ok = True
    except AssertionError as exc:
        err = exc
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'} {label} ({elapsed:.1f}s, limit {limit}s)"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    if err is not None:
        raise err
    assert elapsed < limit, f"{label}: {elapsed:.1f}s exceeds {limit}s"


def test_1_box_census(capsys):
    with criterion(capsys, "1 box census", 30):
        for n, top in ((2, 10), (3, 8)):
            for H in range(top + 1):
                box = build_box(n, H)
                assert len(box) == (H + 1) * n ** H
                per_level = {t: 0 for t in box.levels}
                for v in box:
                    per_level[v.t] += 1
                assert set(per_level.values()) == {n ** H}, (n, H)


def test_2_folner_decay(capsys):
    with criterion(capsys, "2 Folner decay", 30):
        rows = folner_scan(2, range(2, 11), 1, "band")
        ratios = [row.ratio for row in rows]
        assert all(a >= b for a, b in zip(ratios, ratios[1:]))
        scaled = [row.ratio * (row.H + 1) for row in rows]
        assert max(scaled) <= 2 * min(scaled)


def test_3_up_fiber_law(capsys):
    with criterion(capsys, "3 up fiber law", 60):
        for n, k in ((3, 2), (2, 3)):
            box = build_box(n, 3 * k)
            counts = up_vertex_map(box, k).counts()
            interior = [box.vertex(i) for t in up_interior_levels(box, k) for i in box.level_ids(t)]
            assert interior
            bad = [v for v in interior if counts.get(v, 0) != k]
            assert not bad, (n, k, len(bad))


def test_4_prime_support(capsys):
    with criterion(capsys, "4 prime support", 300):
        rng = make_rng(4)
        for i in range(500):
            n = (2, 3, 6)[i % 3]
            m = random_measure_linear_map(rng, n, max_depth=3)
            rep = measure_linear_report(m)
            assert rep.global_lambda is not None
            assert check_prime_support(rep, n), (n, rep.global_lambda)
        window = [Clone(2, 1), Clone(2, 0, (0, 1))]
        assert search_measure_linear_maps(Clone(2, 0), window, 3, 3) == []


def test_5_zoom_stabilization(capsys):
    with criterion(capsys, "5 zoom stabilization", 60):
        rng = make_rng(5)
        for _ in range(20):
            m = random_piecewise_map(rng, 2, max_depth=4, exponents=(-2, -1, 0, 1, 2))
            assert m.max_depth() <= 4
            x = random_point(rng, m.domain, 12)
            z = zoom_limit(m, x)
            assert z.stabilization_depth <= m.max_depth()
            assert z.lam == m.piece_for(x).ratio
            conj = zoom_step(m, x, z.stabilization_depth)
            for c in refine(Clone(2, 0), 3):
                assert image(conj, c) == CloneSet([z.similarity.image(c)])


def test_6_preimage_sandwich(capsys):
    with criterion(capsys, "6 preimage sandwich", 120):
        for j_u in (0, -1):
            phi_l, phi_u = shift_map(Clone(2, 12), 1), shift_map(Clone(2, 12), j_u)
            K = max(bilipschitz_bound(phi_l).K, bilipschitz_bound(phi_u).K)
            box, psi = psi_on_box(phi_l, phi_u, 8)
            audit = preimage_audit(psi, box, K)
            assert audit.r == max(1, math.ceil(math.log2(K)))
            assert audit.in_sandwich, (j_u, audit.total, audit.lower, audit.upper)
            assert all(row.in_sandwich for row in audit.levels)


def test_7_obstruction(tmp_path, capsys):
    with criterion(capsys, "7 obstruction reproduction", 300):
        out = str(tmp_path)
        flagship = run_obstruction(ExperimentConfig(
            n=2, k=1, H_list=list(range(4, 11)), r=1, lambda_l=Fraction(2), lambda_u=Fraction(1),
            out=out + "/flagship"))
        ratios = {H: q for H, _, _, q in flagship["whyte"]}
        assert ratios[10] >= 2 * ratios[4] > 0
        assert all(ratios[H] < ratios[H + 1] for H in range(4, 10))
        assert flagship["verdict"] == "OBSTRUCTED"

        control = run_obstruction(ExperimentConfig(
            n=2, k=1, H_list=list(range(4, 11)), r=1, lambda_l=Fraction(2),
            lambda_u=Fraction(1, 2), R=2, match_H=8, out=out + "/control"))
        assert max(q for *_, q in control["whyte"]) <= 1
        assert control["verdict"] == "CONSISTENT"
        assert control["matching"]["deficiency"] <= box_boundary_size(2, 8, 2)


def test_8_round_trip_and_duality(capsys):
    with criterion(capsys, "8 round trip and duality", 30):
        for n, top in ((2, 6), (3, 6)):
            for H in range(top + 1):
                for v in build_box(n, H, a=-(H // 2)):
                    assert pi(pi_bar(v)) == v
                    assert v.x.measure * v.y.measure == 1


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            try:
                if name == "test_7_obstruction":
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d), None)
                else:
                    fn(None)
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
