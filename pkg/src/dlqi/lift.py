"""Coordinates on DL(n, n) by boundary points, and maps lifted from the boundary.

A point of ``Q_n x Q_n x R`` determines a vertex: round the height down
and take the two shadows.  Going back we pick the zero-tail point of each
shadow.  A pair of boundary maps then lifts to a vertex map ``psi`` by
conjugating through these two coordinate changes.
"""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .boundary import BoundaryPoint, Clone, CloneSet, qn_distance, refine
from .dlgraph import DLVertex, Box, box_boundary_size, dl_distance
from .errors import (
    CloneBoxHypothesisError,
    CoverageError,
    MetricError,
    ParameterError,
    WindowError,
)
from .qmaps import PiecewiseMap, preimage


@dataclass(frozen=True)
class SolPoint:
    x: BoundaryPoint
    y: BoundaryPoint
    t: Fraction

    def __post_init__(self):
        if self.x.n != self.y.n:
            raise ParameterError("x and y must live in the same Q_n")
        object.__setattr__(self, "t", Fraction(self.t))

    @property
    def n(self) -> int:
        return self.x.n


def pi(p: SolPoint) -> DLVertex:
    t = math.floor(p.t)
    return DLVertex(t, p.x.clone_at(t), p.y.clone_at(-t))


def pi_bar(v: DLVertex) -> SolPoint:
    return SolPoint(v.x.representative(), v.y.representative(), Fraction(v.t))


def sol_distance_same_level(p: SolPoint, q: SolPoint) -> Fraction:
    """``n^-t d(x, x') + n^t d(y, y')`` for two points at the same integer height."""
    if p.t != q.t:
        raise MetricError("points at different heights: use the graph metric")
    if p.t.denominator != 1:
        raise MetricError("the same-level formula is only provided at integer heights")
    scale = Fraction(p.n) ** int(p.t)
    return qn_distance(p.x, q.x) / scale + qn_distance(p.y, q.y) * scale


def clone_box(c_l: Clone, c_u: Clone) -> Box:
    """The box spanned by the vertices whose shadows lie in ``c_l`` and ``c_u``."""
    if c_l.n != c_u.n:
        raise ParameterError("clones from different Q_n")
    if c_l.height + c_u.height < 1:
        raise CloneBoxHypothesisError(
            f"mu({c_l}) * mu({c_u}) = {c_l.measure * c_u.measure} is not > 1"
        )
    return Box(c_l, c_u)


@dataclass
class VertexMap:
    table: dict[DLVertex, DLVertex]
    source: Box | None = None
    target: Box | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, v: DLVertex) -> DLVertex:
        return self.table[v]

    def __len__(self) -> int:
        return len(self.table)

    def counts(self) -> Counter:
        return Counter(self.table.values())

    def max_displacement(self) -> int:
        return max((dl_distance(v, w) for v, w in self.table.items()), default=0)

    def _id(self, box: Box | None, v: DLVertex) -> str:
        if box is not None and v in box:
            return str(box.index(v))
        return str(v)

    def write_csv(self, path, meta_path=None) -> None:
        rows = sorted((self._id(self.source, v), self._id(self.target, w)) for v, w in self.table.items())
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source_vertex_id", "target_vertex_id"])
            w.writerows(rows)
        if meta_path is not None:
            meta = {k: str(v) for k, v in self.meta.items()}
            for name, box in (("source_box", self.source), ("target_box", self.target)):
                if box is not None:
                    meta[name] = repr(box)
            with open(meta_path, "w") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)
                fh.write("\n")


def _covers(domain: CloneSet, c: Clone) -> bool:
    return domain.contains_clone(c)


def build_psi(phi_l: PiecewiseMap, phi_u: PiecewiseMap, source: Box | Iterable[DLVertex],
              coverage: str = "shadow", target: Box | None = None) -> VertexMap:
    """Lift ``phi_l x phi_u`` to vertices.

    ``coverage="shadow"`` insists that each vertex's whole shadows sit in the
    map domains; ``"point"`` only needs the zero-tail points chosen by
    :func:`pi_bar`, which is all the formula actually evaluates.
    """
    if coverage not in ("shadow", "point"):
        raise ParameterError(f"unknown coverage mode {coverage!r}")
    box = source if isinstance(source, Box) else None
    table = {}
    for v in source:
        if coverage == "shadow":
            for c, m, side in ((v.x, phi_l, "lower"), (v.y, phi_u, "upper")):
                if not _covers(m.domain, c):
                    raise CoverageError(f"vertex {v}: {side} shadow {c} is not covered by {m.domain}")
        p = pi_bar(v)
        try:
            x, y = phi_l(p.x), phi_u(p.y)
        except Exception as exc:
            raise CoverageError(f"vertex {v}: {exc}") from exc
        table[v] = pi(SolPoint(x, y, p.t))
    meta = {
        "kind": "psi",
        "n": phi_l.n,
        "phi_l": repr(phi_l),
        "phi_u": repr(phi_u),
    }
    lam_l, lam_u = set(phi_l.ratios), set(phi_u.ratios)
    if len(lam_l) == 1 and len(lam_u) == 1:
        meta["lambda_l"], meta["lambda_u"] = lam_l.pop(), lam_u.pop()
    return VertexMap(table, box, target, meta)


def zero_tail_clones(p: CloneSet, h: int) -> list[Clone]:
    """Height-``h`` clones whose zero-tail point lies in ``p``."""
    out = []
    for a in p:
        if a.height >= h:
            out.extend(refine(a, a.height - h))
        else:
            head = a.prefix[: h - a.height]
            if not any(head):
                out.append(a.ancestor(h))
    return sorted(set(out))


def psi_preimage_vertices(phi_l: PiecewiseMap, phi_u: PiecewiseMap, target: Box) -> list[DLVertex]:
    """Every vertex that the lift of ``phi_l x phi_u`` sends into ``target``.

    ``psi`` keeps heights, and ``psi(v)`` lies in the target iff the two
    zero-tail points of ``v`` land in ``top_x`` and ``top_y``.
    """
    p_l = preimage(phi_l, _inside(phi_l.range, target.top_x))
    p_u = preimage(phi_u, _inside(phi_u.range, target.top_y))
    out = []
    for t in target.levels:
        xs = zero_tail_clones(p_l, t)
        ys = zero_tail_clones(p_u, -t)
        out.extend(DLVertex(t, x, y) for x in xs for y in ys)
    return out


def _inside(rng: CloneSet, c: Clone) -> CloneSet:
    if not rng.contains_clone(c):
        raise CoverageError(f"clone {c} is not inside the map range {rng}")
    return CloneSet([c])


# --- the up map ---------------------------------------------------------------


def up_map(v: DLVertex, k: int) -> DLVertex:
    """Move ``v`` up to the next level in ``k Z`` without touching any lamp."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    top = -(-v.t // k) * k
    if top == v.t:
        return v
    j = top - v.t
    moved = v.x.prefix[:j] + (0,) * (j - len(v.x.prefix[:j]))
    return DLVertex(top, v.x.ancestor(top), Clone(v.n, -top, tuple(reversed(moved)) + v.y.prefix))


def _lamp_window(v: DLVertex) -> tuple[int, int]:
    lo = v.t - len(v.y.prefix)
    hi = v.t + len(v.x.prefix)
    return lo, hi


def embed(v: DLVertex, k: int) -> DLVertex:
    """A vertex of DL(n^k, n^k) as a vertex of DL(n, n) at a ``k Z`` level.

    Lamp ``j`` of the coarse vertex, a base-``n^k`` digit, becomes lamps
    ``kj, ..., kj + k - 1`` (least significant first).
    """
    N = v.n
    n = round(N ** (1 / k))
    if n ** k != N:
        raise ParameterError(f"{N} is not a {k}-th power")
    lo, hi = _lamp_window(v)
    lamps = {}
    for j in range(lo, hi):
        d = v.lamp(j)
        for r in range(k):
            d, lamps[k * j + r] = divmod(d, n)
    return _from_lamps(n, k * v.t, lamps)


def embed_inverse(w: DLVertex, k: int) -> DLVertex:
    if w.t % k:
        raise WindowError(f"vertex {w} is not on a level in {k}Z")
    lo, hi = _lamp_window(w)
    lamps = {}
    for j in range(math.floor(lo / k), -(-hi // k)):
        lamps[j] = sum(w.lamp(k * j + r) * w.n ** r for r in range(k))
    return _from_lamps(w.n ** k, w.t // k, lamps)


def _from_lamps(n: int, t: int, lamps: Mapping[int, int]) -> DLVertex:
    x = {i: d for i, d in lamps.items() if i >= t and d}
    y = {-i - 1: d for i, d in lamps.items() if i < t and d}
    xs = tuple(x.get(i, 0) for i in range(t, max(x, default=t - 1) + 1))
    ys = tuple(y.get(i, 0) for i in range(-t, max(y, default=-t - 1) + 1))
    return DLVertex(t, Clone(n, t, xs), Clone(n, -t, ys))


def up_vertex_map(box: Box, k: int) -> VertexMap:
    return VertexMap({v: up_map(v, k) for v in box}, box, box, {"kind": "up", "n": box.n, "k": k})


def up_interior_levels(box: Box, k: int) -> list[int]:
    """``k Z`` levels with ``k - 1`` full levels of the box below them."""
    return [t for t in box.levels if t % k == 0 and t - (k - 1) >= box.a]


def factor_through_sublattice(f: VertexMap, k: int) -> VertexMap:
    """``embed^-1 . up . f``, a map into the DL(n^k, n^k) model."""
    if k == 1:
        return f
    table = {}
    for v, w in f.table.items():
        u = up_map(w, k)
        if f.target is not None and u not in f.target:
            raise WindowError(f"up({w}) = {u} leaves the target box; add headroom above level {f.target.b}")
        disp = dl_distance(u, w)
        assert disp < k, (w, u, disp)
        table[v] = embed_inverse(u, k)
    meta = dict(f.meta)
    meta.update({"factored_k": k})
    return VertexMap(table, f.source, None, meta)


# --- preimage audit -------------------------------------------------------------


@dataclass
class LevelRow:
    t: int
    sum_counts: int
    expected_center: Fraction
    lower_bound: Fraction
    upper_bound: Fraction
    in_sandwich: bool


@dataclass
class PreimageAudit:
    counts: dict[DLVertex, int]
    levels: list[LevelRow]
    interior: tuple[int, int]
    K: Fraction
    r: int
    total: int
    outside: int
    boundary_size: int | None = None
    center: Fraction | None = None
    lower: Fraction | None = None
    upper: Fraction | None = None
    in_sandwich: bool | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "sum_counts", "expected_center", "lower_bound", "upper_bound", "in_sandwich"])
            for row in self.levels:
                w.writerow([row.t, row.sum_counts, row.expected_center, row.lower_bound,
                            row.upper_bound, int(row.in_sandwich)])


def _log_ceil(n: int, K: Fraction) -> int:
    r = 0
    while Fraction(n) ** r < K:
        r += 1
    return r


def preimage_audit(m: VertexMap, target: Box, K: Fraction | int) -> PreimageAudit:
    """Count ``|m^-1(x)|`` over ``target`` and test the expected sandwich.

    With both measure-linear constants known, the center is ``|S| / (lambda_l
    lambda_u)``; levels at least ``r = ceil(log_n K)`` away from the ends of
    the box must hit the per-level center exactly, the ``r`` outer levels on
    each side may hold anything in ``[0, K^2 n^H]``, and the total must lie in
    ``[center - |d_r S|, center + K^2 |d_r S|]``.
    """
    K = Fraction(K)
    n = target.n
    r = max(1, _log_ceil(n, K))
    counts: dict[DLVertex, int] = {}
    outside = 0
    for w in m.table.values():
        if w in target:
            counts[w] = counts.get(w, 0) + 1
        else:
            outside += 1
    total = sum(counts.values())
    per_level = Counter()
    for w, c in counts.items():
        per_level[w.t] += c
    interior = (target.a + r, target.b - r)
    lam_l, lam_u = m.meta.get("lambda_l"), m.meta.get("lambda_u")
    known = lam_l is not None and lam_u is not None
    rows = []
    cap = K * K * target.level_size
    for t in target.levels:
        s = per_level.get(t, 0)
        if known:
            c = Fraction(target.level_size) / (Fraction(lam_l) * Fraction(lam_u))
            lo, hi = (c, c) if interior[0] <= t <= interior[1] else (Fraction(0), cap)
        else:
            c, lo, hi = Fraction(s), Fraction(0), Fraction(s)
        rows.append(LevelRow(t, s, c, lo, hi, lo <= s <= hi))
    audit = PreimageAudit(counts, rows, interior, K, r, total, outside)
    if known:
        b = box_boundary_size(n, target.H, r, "band")
        center = Fraction(len(target)) / (Fraction(lam_l) * Fraction(lam_u))
        audit.boundary_size = b
        audit.center = center
        audit.lower = center - b
        audit.upper = center + K * K * b
        audit.in_sandwich = audit.lower <= total <= audit.upper
    return audit


def zero_descendant(rng: CloneSet, h: int) -> Clone:
    """The clone of height ``h`` below the first range member tall enough,
    following zero digits down."""
    for c in rng:
        if c.height >= h:
            return Clone(c.n, h, (0,) * (c.height - h) + c.prefix)
    raise CoverageError(f"no clone of the range {rng} reaches height {h}")


def psi_on_box(phi_l: PiecewiseMap, phi_u: PiecewiseMap, H: int,
               coverage: str = "point") -> tuple[Box, VertexMap]:
    """The height-``H`` clone box inside the two ranges together with the lift
    of ``phi_l x phi_u`` on its full preimage.

    The box height splits as ``H - H // 2`` on the lower side and ``H // 2``
    on the upper side.
    """
    c_l = zero_descendant(phi_l.range, H - H // 2)
    c_u = zero_descendant(phi_u.range, H // 2)
    target = clone_box(c_l, c_u)
    src = psi_preimage_vertices(phi_l, phi_u, target)
    return target, build_psi(phi_l, phi_u, src, coverage=coverage, target=target)
