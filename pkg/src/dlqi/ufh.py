"""Degree-zero uniformly finite homology over boxes.

A 0-chain is a bounded integer function on vertices, a 1-chain a bounded
function on pairs at bounded distance.  The class of a 0-chain vanishes
exactly when its sums over a Folner sequence stay within a constant times
the boundary sizes, which is the statistic :func:`whyte_scan` tabulates.
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import networkx as nx
import numpy as np

from .dlgraph import Box, DLVertex, box_boundary_size, dl_distance
from .errors import ParameterError
from .lift import VertexMap


@dataclass
class UFChain:
    coefficients: dict[DLVertex, int]
    bound: int | None = None

    def __post_init__(self):
        self.coefficients = {v: int(a) for v, a in self.coefficients.items() if a}
        top = max((abs(a) for a in self.coefficients.values()), default=0)
        if self.bound is None:
            self.bound = top
        elif top > self.bound:
            raise ParameterError(f"coefficient {top} exceeds the bound {self.bound}")

    def __getitem__(self, v: DLVertex) -> int:
        return self.coefficients.get(v, 0)

    def total(self, support: Iterable[DLVertex] | None = None) -> int:
        if support is None:
            return sum(self.coefficients.values())
        return sum(self.coefficients.get(v, 0) for v in support)

    def restrict(self, support: Iterable[DLVertex]) -> "UFChain":
        keep = set(support)
        return UFChain({v: a for v, a in self.coefficients.items() if v in keep})

    def is_zero(self) -> bool:
        return not self.coefficients


@dataclass
class EdgeChain:
    coefficients: dict[tuple[DLVertex, DLVertex], int]
    bound: int | None = None
    radius: int | None = None

    def __post_init__(self):
        self.coefficients = {e: int(a) for e, a in self.coefficients.items() if a}
        top = max((abs(a) for a in self.coefficients.values()), default=0)
        reach = max((dl_distance(x, y) for x, y in self.coefficients), default=0)
        if self.bound is None:
            self.bound = top
        elif top > self.bound:
            raise ParameterError(f"coefficient {top} exceeds the bound {self.bound}")
        if self.radius is None:
            self.radius = reach
        elif reach > self.radius:
            raise ParameterError(f"an edge of length {reach} exceeds the radius {self.radius}")


def boundary(e: EdgeChain) -> UFChain:
    out: dict[DLVertex, int] = {}
    for (x, y), a in e.coefficients.items():
        out[y] = out.get(y, 0) + a
        out[x] = out.get(x, 0) - a
    return UFChain(out)


def pushforward(f: VertexMap, k_offset: int = 0, support: Iterable[DLVertex] | None = None) -> UFChain:
    """``|f^-1(y)| - k_offset`` on ``support`` (the target box by default)."""
    if support is None:
        if f.target is None:
            raise ParameterError("map has no target box; pass the support explicitly")
        support = f.target
    counts = f.counts()
    return UFChain({y: counts.get(y, 0) - k_offset for y in support})


@dataclass
class WhyteRow:
    H: int
    sum_a: int
    boundary_size: int
    ratio: Fraction


@dataclass
class WhyteReport:
    rows: list[WhyteRow]
    r: int
    verdict: str
    slope: float | None = None
    max_ratio: Fraction | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["H", "sum_a", "boundary_size", "ratio"])
            for row in self.rows:
                w.writerow([row.H, row.sum_a, row.boundary_size, row.ratio])


OBSTRUCTED = "obstructed"
CONSISTENT = "vanishing-class consistent"
INCONCLUSIVE = "inconclusive"


def growth_verdict(ratios: list[Fraction], run: int = 3, factor: int = 2) -> str:
    """Obstructed when some ``run`` consecutive positive ratios increase
    strictly and the last is at least ``factor`` times the first."""
    if len(ratios) < run:
        return INCONCLUSIVE
    start = 0
    for i in range(1, len(ratios) + 1):
        if i == len(ratios) or ratios[i] <= ratios[i - 1]:
            seg = [q for q in ratios[start:i] if q > 0]
            if len(seg) >= run and seg[-1] >= factor * seg[0]:
                return OBSTRUCTED
            start = i
    return CONSISTENT


def whyte_scan(chain_family: Callable[[int], tuple[Box, UFChain]], H_list: Iterable[int],
               r: int) -> WhyteReport:
    """Tabulate ``|sum_{S_H} a| / |d_r S_H|`` for each box height."""
    rows = []
    for H in sorted(H_list):
        box, chain = chain_family(H)
        s = chain.total(box)
        b = box_boundary_size(box.n, box.H, r, "band")
        rows.append(WhyteRow(H, s, b, Fraction(abs(s), b)))
    ratios = [row.ratio for row in rows]
    verdict = growth_verdict(ratios)
    slope = None
    if len(rows) >= 2:
        slope = float(np.polyfit([row.H for row in rows], [float(q) for q in ratios], 1)[0])
    return WhyteReport(rows, r, verdict, slope, max(ratios, default=None))


# --- bounded-distance matching ---------------------------------------------------


def ball(v: DLVertex, R: int) -> set[DLVertex]:
    """Vertices of DL(n, n) within distance ``R`` of ``v``."""
    seen = {v}
    frontier = [v]
    for _ in range(R):
        nxt = []
        for u in frontier:
            for w in u.neighbors():
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return seen


@dataclass
class MatchingReport:
    perfect: bool
    deficiency: int
    sources: int
    targets: int
    matching: dict[DLVertex, DLVertex] = field(default_factory=dict)
    deficient_set: list[DLVertex] = field(default_factory=list)
    deficient_neighbourhood: int = 0

    def write_csv(self, path, witness_path=None, source_box: Box | None = None,
                  target_box: Box | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["perfect", "deficiency", "sources", "targets", "deficient_set_size",
                        "deficient_neighbourhood"])
            w.writerow([int(self.perfect), self.deficiency, self.sources, self.targets,
                        len(self.deficient_set), self.deficient_neighbourhood])
        if witness_path is not None:
            def ident(box, v):
                return str(box.index(v)) if box is not None and v in box else str(v)
            rows = sorted((ident(source_box, s), ident(target_box, t)) for s, t in self.matching.items())
            with open(witness_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["source_id", "matched_target_id"])
                w.writerows(rows)


def bounded_matching(f: VertexMap, R: int, targets: Iterable[DLVertex] | None = None) -> MatchingReport:
    """Maximum matching of sources to targets within distance ``R`` of their image.

    When the matching is not perfect, the sources reachable from unmatched
    ones by alternating paths form a set whose candidate neighbourhood is
    smaller by exactly the deficiency (Hall's condition fails there).
    """
    if R < 0:
        raise ParameterError("R must be >= 0")
    if targets is None:
        if f.target is None:
            raise ParameterError("map has no target box; pass the targets explicitly")
        targets = f.target
    tset = set(targets)
    sources = sorted(f.table)
    cand: dict[DLVertex, list[DLVertex]] = {}
    for v in sources:
        cand[v] = sorted(w for w in ball(f.table[v], R) if w in tset)
    g = nx.Graph()
    left = [("s", v) for v in sources]
    g.add_nodes_from(left)
    g.add_nodes_from(("t", w) for w in sorted(tset))
    for v in sources:
        g.add_edges_from((("s", v), ("t", w)) for w in cand[v])
    mate = nx.bipartite.hopcroft_karp_matching(g, top_nodes=left)
    matching = {v: mate[("s", v)][1] for v in sources if ("s", v) in mate}
    owner = {w: v for v, w in matching.items()}
    deficiency = len(sources) - len(matching)

    # alternating reachability from unmatched sources
    reached_s = [v for v in sources if v not in matching]
    seen_s, seen_t = set(reached_s), set()
    queue = deque(reached_s)
    while queue:
        v = queue.popleft()
        for w in cand[v]:
            if w in seen_t:
                continue
            seen_t.add(w)
            u = owner.get(w)
            if u is not None and u not in seen_s:
                seen_s.add(u)
                queue.append(u)
    if deficiency:
        assert len(seen_s) - len(seen_t) == deficiency
    return MatchingReport(
        perfect=deficiency == 0,
        deficiency=deficiency,
        sources=len(sources),
        targets=len(tset),
        matching=matching,
        deficient_set=sorted(seen_s) if deficiency else [],
        deficient_neighbourhood=len(seen_t) if deficiency else 0,
    )
