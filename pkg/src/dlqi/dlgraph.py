"""Finite pieces of the Diestel-Leader graph DL(n, n).

A vertex is a pair of tree vertices ``(p, q)`` with ``h(p) + h(q) = 0``.
We store it as its height ``t`` together with the two shadows: the clone
of height ``t`` for ``p`` (lower boundary) and the clone of height ``-t``
for ``q`` (upper boundary).

Moving up one level drops the first-tree digit at index ``t`` and picks a
new second-tree digit at index ``-t-1``; moving down is the mirror image.
Reading the digit at index ``i`` from the first tree when ``i >= t`` and
from the second tree (at index ``-i-1``) when ``i < t`` gives a "lamp"
configuration on which a step up or down rewrites exactly one lamp.  Box
vertices are indexed by that lamp word, and the graph metric has a closed
form in it (see :func:`dl_distance`).
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple

from .boundary import Clone
from .errors import MembershipError, ParameterError, ResourceError

DEFAULT_BUDGET = 4_000_000


@dataclass(frozen=True, order=True)
class DLVertex:
    t: int
    x: Clone
    y: Clone

    def __post_init__(self):
        if self.x.n != self.y.n:
            raise ParameterError("the two tree coordinates must share n")
        if self.x.height != self.t or self.y.height != -self.t:
            raise ParameterError(
                f"heights must satisfy h(p) = t = -h(q); got t={self.t}, "
                f"h(p)={self.x.height}, h(q)={self.y.height}"
            )

    @property
    def n(self) -> int:
        return self.x.n

    @classmethod
    def base(cls, n: int, t: int = 0) -> "DLVertex":
        return cls(t, Clone(n, t), Clone(n, -t))

    def lamp(self, i: int) -> int:
        return self.x.digit(i) if i >= self.t else self.y.digit(-i - 1)

    def up_neighbors(self) -> list["DLVertex"]:
        x = self.x.parent()
        return [DLVertex(self.t + 1, x, self.y.child(c)) for c in range(self.n)]

    def down_neighbors(self) -> list["DLVertex"]:
        y = self.y.parent()
        return [DLVertex(self.t - 1, self.x.child(c), y) for c in range(self.n)]

    def neighbors(self) -> list["DLVertex"]:
        """All ``2n`` neighbours in the infinite graph."""
        return self.up_neighbors() + self.down_neighbors()

    def __str__(self) -> str:
        return f"{self.t}|{self.x}|{self.y}"


def _lamp_span(v: DLVertex) -> tuple[int, int]:
    lo, hi = v.t, v.t
    if v.x.prefix:
        hi = max(hi, v.t + len(v.x.prefix))
    if v.y.prefix:
        lo = min(lo, v.t - len(v.y.prefix))
    return lo, hi


def dl_distance(u: DLVertex, v: DLVertex) -> int:
    """Graph distance in the infinite DL(n, n), in closed form.

    The cursor (height) must cross the edge between ``i`` and ``i+1`` for
    every lamp ``i`` on which the two vertices differ, starting at ``u.t``
    and ending at ``v.t``.
    """
    if u.n != v.n:
        raise ParameterError("vertices from different graphs")
    lo_u, hi_u = _lamp_span(u)
    lo_v, hi_v = _lamp_span(v)
    diff = [i for i in range(min(lo_u, lo_v), max(hi_u, hi_v)) if u.lamp(i) != v.lamp(i)]
    s, e = u.t, v.t
    if not diff:
        return abs(s - e)
    lo = min(min(diff), s, e)
    hi = max(max(diff) + 1, s, e)
    return min((s - lo) + (hi - lo) + (hi - e), (hi - s) + (hi - lo) + (e - lo))


class Box:
    """Connected component of ``ht^{-1}([a, a + H])`` in DL(n, n).

    The component is fixed by its top first-tree vertex (``top_x``, a clone
    of height ``a + H``) and its bottom second-tree vertex (``top_y``, a
    clone of height ``-a``).  Vertex ids are ``level * n**H + code`` where
    ``code`` packs the ``H`` free lamps, lamp ``p`` (height ``a + p``) with
    weight ``n**p``.
    """

    def __init__(self, top_x: Clone, top_y: Clone):
        if top_x.n != top_y.n:
            raise ParameterError("top clones must share n")
        H = top_x.height + top_y.height
        if H < 0:
            raise ParameterError("box height must be >= 0")
        self.n = top_x.n
        self.H = H
        self.a = -top_y.height
        self.top_x = top_x
        self.top_y = top_y
        self.level_size = self.n ** H
        self._pow = [self.n ** p for p in range(H + 1)]

    def __repr__(self) -> str:
        return f"Box(n={self.n}, H={self.H}, a={self.a}, top_x={self.top_x}, top_y={self.top_y})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Box) and (self.top_x, self.top_y) == (other.top_x, other.top_y)

    def __hash__(self) -> int:
        return hash((self.top_x, self.top_y))

    @property
    def b(self) -> int:
        return self.a + self.H

    @property
    def levels(self) -> range:
        return range(self.a, self.b + 1)

    def __len__(self) -> int:
        return (self.H + 1) * self.level_size

    def lamps(self, i: int) -> tuple[int, list[int]]:
        s, code = divmod(i, self.level_size)
        n = self.n
        lamps = []
        for _ in range(self.H):
            code, d = divmod(code, n)
            lamps.append(d)
        return s, lamps

    def vertex(self, i: int) -> DLVertex:
        if not 0 <= i < len(self):
            raise MembershipError(f"vertex id {i} outside box of size {len(self)}")
        s, lamps = self.lamps(i)
        t = self.a + s
        x = Clone(self.n, t, tuple(lamps[s:]) + self.top_x.prefix)
        y = Clone(self.n, -t, tuple(reversed(lamps[:s])) + self.top_y.prefix)
        return DLVertex(t, x, y)

    def __contains__(self, v: DLVertex) -> bool:
        return (
            v.n == self.n
            and self.a <= v.t <= self.b
            and self.top_x.contains_clone(v.x)
            and self.top_y.contains_clone(v.y)
        )

    def index(self, v: DLVertex) -> int:
        if v not in self:
            raise MembershipError(f"vertex {v} is not in {self!r}")
        s = v.t - self.a
        code = 0
        for p in range(self.H):
            code += v.lamp(self.a + p) * self._pow[p]
        return s * self.level_size + code

    def __iter__(self) -> Iterator[DLVertex]:
        for i in range(len(self)):
            yield self.vertex(i)

    def level_ids(self, t: int) -> range:
        s = t - self.a
        if not 0 <= s <= self.H:
            raise MembershipError(f"level {t} outside box levels {self.a}..{self.b}")
        return range(s * self.level_size, (s + 1) * self.level_size)

    def neighbor_ids(self, i: int) -> list[int]:
        n, L = self.n, self.level_size
        s, code = divmod(i, L)
        out = []
        if s < self.H:
            w = self._pow[s]
            base = code - ((code // w) % n) * w
            out.extend((s + 1) * L + base + c * w for c in range(n))
        if s > 0:
            w = self._pow[s - 1]
            base = code - ((code // w) % n) * w
            out.extend((s - 1) * L + base + c * w for c in range(n))
        return out

    def neighbors(self, v: DLVertex) -> list[DLVertex]:
        return [self.vertex(j) for j in self.neighbor_ids(self.index(v))]

    def ancestor_box(self, r: int) -> "Box":
        """The box of height ``H + 2r`` containing this one, ``r`` levels
        wider on each side."""
        return Box(self.top_x.ancestor(self.top_x.height + r), self.top_y.ancestor(self.top_y.height + r))

    def bfs(self, source: int, limit: int | None = None) -> dict[int, int]:
        """Distances from ``source`` (by id), optionally truncated at ``limit``."""
        dist = {source: 0}
        queue = deque([source])
        while queue:
            i = queue.popleft()
            d = dist[i]
            if limit is not None and d >= limit:
                continue
            for j in self.neighbor_ids(i):
                if j not in dist:
                    dist[j] = d + 1
                    queue.append(j)
        return dist


def build_box(n: int, H: int, a: int = 0, anchor: DLVertex | None = None,
              budget: int = DEFAULT_BUDGET) -> Box:
    """The box of height ``H`` whose bottom level ``a`` contains ``anchor``
    (the all-zero vertex at height ``a`` by default)."""
    if n < 2 or H < 0:
        raise ParameterError(f"need n >= 2 and H >= 0, got n={n}, H={H}")
    size = (H + 1) * n ** H
    if size > budget:
        raise ResourceError(f"box n={n}, H={H} has {size} vertices, budget is {budget}")
    if anchor is None:
        anchor = DLVertex.base(n, a)
    elif anchor.t != a or anchor.n != n:
        raise ParameterError("anchor must sit at the bottom level a with the same n")
    return Box(anchor.x.ancestor(a + H), anchor.y)


def graph_distance(box: Box, u: DLVertex, v: DLVertex) -> int:
    """Shortest path length inside the box, by breadth-first search."""
    src, dst = box.index(u), box.index(v)
    if src == dst:
        return 0
    dist = {src: 0}
    queue = deque([src])
    while queue:
        i = queue.popleft()
        for j in box.neighbor_ids(i):
            if j not in dist:
                if j == dst:
                    return dist[i] + 1
                dist[j] = dist[i] + 1
                queue.append(j)
    raise AssertionError("boxes are connected")


def _layer_search(ambient: Box, inside: bytearray, seeds_from_inside: bool, r: int) -> set[int]:
    """Ids on one side of the cut within distance ``r`` of the other side."""
    want = 0 if seeds_from_inside else 1
    frontier = set()
    for i in range(len(ambient)):
        if inside[i] == want:
            continue
        for j in ambient.neighbor_ids(i):
            if inside[j] == want:
                frontier.add(j)
    found = set(frontier)
    for _ in range(r - 1):
        nxt = set()
        for i in frontier:
            for j in ambient.neighbor_ids(i):
                if inside[j] == want and j not in found:
                    nxt.add(j)
        found |= nxt
        frontier = nxt
    return found


def _boundary_ids(ambient: Box, inside: bytearray, r: int) -> tuple[set[int], set[int]]:
    if r <= 0:
        return set(), set()
    outer = _layer_search(ambient, inside, True, r)
    inner = _layer_search(ambient, inside, False, r)
    return outer, inner


def _ambient(box: Box, r: int, ambient: str, budget: int) -> Box:
    if ambient == "box":
        return box
    if ambient == "band":
        ext = box.ancestor_box(r)
        if len(ext) > budget:
            raise ResourceError(f"band ambient for H={box.H}, r={r} has {len(ext)} vertices, budget is {budget}")
        return ext
    raise ParameterError(f"ambient must be 'box' or 'band', got {ambient!r}")


def r_boundary(box: Box, s: Iterable[DLVertex], r: int, ambient: str = "box",
               budget: int = DEFAULT_BUDGET) -> frozenset[DLVertex]:
    """Two-sided ``r``-boundary of ``s``: outside points within ``r`` of
    ``s`` together with points of ``s`` within ``r`` of the outside.

    ``ambient='box'`` takes the complement inside ``box``; ``'band'`` takes
    it inside the box widened by ``r`` levels on each side, which agrees
    with the boundary in the infinite graph.
    """
    if r < 0:
        raise ParameterError("radius must be >= 0")
    amb = _ambient(box, max(r, 0), ambient, budget)
    inside = bytearray(len(amb))
    for v in s:
        if v not in box:
            raise MembershipError(f"{v} is not in the box")
        inside[amb.index(v)] = 1
    outer, inner = _boundary_ids(amb, inside, r)
    return frozenset(amb.vertex(i) for i in outer | inner)


@lru_cache(maxsize=None)
def box_boundary_size(n: int, H: int, r: int, ambient: str = "band",
                      budget: int = DEFAULT_BUDGET) -> int:
    """``|d_r S_H|`` for a whole box; anchor independent, so cached by shape."""
    if r == 0:
        return 0
    box = build_box(n, H, budget=budget)
    amb = _ambient(box, r, ambient, budget)
    inside = bytearray(len(amb))
    if amb is box:
        return 0
    # the box sits at levels r..r+H of the widened box with the outer
    # lamps fixed to zero, so its ids are lamp codes shifted by r places
    w = n ** r
    for s in range(box.H + 1):
        base = (s + r) * amb.level_size
        for code in range(box.level_size):
            inside[base + code * w] = 1
    outer, inner = _boundary_ids(amb, inside, r)
    return len(outer) + len(inner)


class FolnerRow(NamedTuple):
    H: int
    size: int
    boundary: int
    ratio: Fraction


def folner_scan(n: int, H_list: Iterable[int], r: int, ambient: str = "band",
                budget: int = DEFAULT_BUDGET) -> list[FolnerRow]:
    """Exact ``|d_r S_H| / |S_H|`` along a sequence of box heights."""
    rows = []
    for H in H_list:
        box = build_box(n, H, budget=budget)
        size = len(box)
        bsize = box_boundary_size(n, H, r, ambient, budget) if r > 0 else 0
        rows.append(FolnerRow(H, size, bsize, Fraction(bsize, size)))
    return rows


def write_box_csv(box: Box, vertex_path, adjacency_path) -> None:
    """Vertex table ``vertex_id,t,xprefix,yprefix`` and adjacency list
    ``vertex_id,neighbor_id``."""
    with open(vertex_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex_id", "t", "xprefix", "yprefix"])
        for i in range(len(box)):
            v = box.vertex(i)
            w.writerow([i, v.t, str(v.x), str(v.y)])
    with open(adjacency_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex_id", "neighbor_id"])
        for i in range(len(box)):
            for j in sorted(box.neighbor_ids(i)):
                w.writerow([i, j])
