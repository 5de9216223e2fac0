"""Piecewise clone-similarities of Q_n windows.

A :class:`Similarity` sends a clone ``A`` onto a clone ``B`` by replacing
``A``'s fixed digits with ``B``'s and shifting the free digits up by
``B.height - A.height``; it scales every distance and every measure by
``n ** shift``.  A :class:`PiecewiseMap` is a finite family of them with
disjoint sources and disjoint targets, and is the class of bilipschitz
maps this package computes with.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from sympy import factorint

from .boundary import (
    BoundaryPoint,
    Clone,
    CloneSet,
    clone_distance,
    hull,
    parse_clone,
    qn_distance,
)
from .errors import CompositionError, DomainError, ParameterError


@dataclass(frozen=True, order=True)
class Similarity:
    source: Clone
    target: Clone

    def __post_init__(self):
        if self.source.n != self.target.n:
            raise ParameterError("similarity between different Q_n")

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def shift(self) -> int:
        return self.target.height - self.source.height

    @property
    def ratio(self) -> Fraction:
        """Measure (and distance) scaling factor ``mu(B) / mu(A)``."""
        return Fraction(self.n) ** self.shift

    def __call__(self, x: BoundaryPoint) -> BoundaryPoint:
        if not self.source.contains(x):
            raise DomainError(f"{x} is not in {self.source}")
        h, s = self.source.height, self.shift
        digits = {i + s: d for i, d in x.support if i < h}
        digits.update({self.target.height + j: d for j, d in enumerate(self.target.prefix)})
        return BoundaryPoint.from_digits(self.n, digits)

    def image(self, c: Clone) -> Clone:
        if not self.source.contains_clone(c):
            raise DomainError(f"{c} is not inside {self.source}")
        free = c.prefix[: self.source.height - c.height]
        free += (0,) * (self.source.height - c.height - len(free))
        return Clone(self.n, c.height + self.shift, free + self.target.prefix)

    def preimage(self, c: Clone) -> Clone:
        return self.inverse().image(c)

    def restrict(self, c: Clone) -> "Similarity":
        return Similarity(c, self.image(c))

    def inverse(self) -> "Similarity":
        return Similarity(self.target, self.source)

    def then(self, other: "Similarity") -> "Similarity":
        """``other`` after ``self``; needs ``self.target`` inside ``other.source``."""
        return Similarity(self.source, other.image(self.target))

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}"


def _merge(pieces: list[Similarity]) -> list[Similarity]:
    current = set(pieces)
    changed = True
    while changed:
        changed = False
        groups: dict[Clone, list[Similarity]] = {}
        for p in current:
            groups.setdefault(p.source.parent(), []).append(p)
        for parent, kids in groups.items():
            if len(kids) != parent.n:
                continue
            cand = Similarity(parent, kids[0].target.parent())
            if all(cand.image(k.source) == k.target for k in kids):
                current -= set(kids)
                current.add(cand)
                changed = True
                break
    return sorted(current)


class PiecewiseMap:
    """Bijection between two clone sets, a similarity on each piece.

    Pieces are put in canonical form on construction: whenever all ``n``
    children of a clone are pieces that together form one similarity they
    are merged, so two maps that agree pointwise compare equal.
    """

    __slots__ = ("pieces", "n", "domain", "range")

    def __init__(self, pieces: Iterable[Similarity]):
        pieces = list(pieces)
        if not pieces:
            raise ParameterError("a piecewise map needs at least one piece")
        ns = {p.n for p in pieces}
        if len(ns) != 1:
            raise ParameterError("pieces from different Q_n")
        self.n = ns.pop()
        for i, p in enumerate(pieces):
            for q in pieces[i + 1:]:
                if not p.source.disjoint(q.source):
                    raise ParameterError(f"overlapping sources {p.source}, {q.source}")
                if not p.target.disjoint(q.target):
                    raise ParameterError(f"overlapping targets {p.target}, {q.target}")
        self.pieces: tuple[Similarity, ...] = tuple(_merge(pieces))
        self.domain = CloneSet(p.source for p in self.pieces)
        self.range = CloneSet(p.target for p in self.pieces)

    def __eq__(self, other) -> bool:
        return isinstance(other, PiecewiseMap) and self.pieces == other.pieces

    def __hash__(self) -> int:
        return hash(self.pieces)

    def __repr__(self) -> str:
        return "PiecewiseMap([" + ", ".join(str(p) for p in self.pieces) + "])"

    @property
    def ratios(self) -> tuple[Fraction, ...]:
        return tuple(p.ratio for p in self.pieces)

    def piece_for(self, x: BoundaryPoint) -> Similarity:
        for p in self.pieces:
            if p.source.contains(x):
                return p
        raise DomainError(f"point {x} is not covered by the map domain {self.domain}")

    def __call__(self, x: BoundaryPoint) -> BoundaryPoint:
        return self.piece_for(x)(x)

    def max_depth(self) -> int:
        """Depth of the smallest piece below the hull of the domain."""
        top = hull(self.domain).height
        return max(top - p.source.height for p in self.pieces)


def apply(m: PiecewiseMap, x: BoundaryPoint) -> BoundaryPoint:
    return m(x)


def identity_map(window: Clone | Iterable[Clone]) -> PiecewiseMap:
    clones = [window] if isinstance(window, Clone) else list(window)
    return PiecewiseMap(Similarity(c, c) for c in clones)


def shift_map(window: Clone, j: int) -> PiecewiseMap:
    """The similarity of factor ``n**j`` from ``window`` onto the clone
    with the same digits, ``j`` levels higher."""
    return PiecewiseMap([Similarity(window, Clone(window.n, window.height + j, window.prefix))])


def image(m: PiecewiseMap, s: CloneSet | Clone) -> CloneSet:
    """``m(s)`` for a clone set inside the domain."""
    clones = [s] if isinstance(s, Clone) else list(s)
    out = []
    for c in clones:
        covered = Fraction(0)
        for p in m.pieces:
            if p.source.contains_clone(c):
                out.append(p.image(c))
                covered = c.measure
                break
            if c.contains_clone(p.source):
                out.append(p.target)
                covered += p.source.measure
        if covered != c.measure:
            raise DomainError(f"{c} is not inside the domain {m.domain}")
    return CloneSet(out, n=m.n)


def preimage(m: PiecewiseMap, s: CloneSet | Clone) -> CloneSet:
    return image(invert(m), s)


def invert(m: PiecewiseMap) -> PiecewiseMap:
    return PiecewiseMap(p.inverse() for p in m.pieces)


def restrict(m: PiecewiseMap, c: Clone) -> list[Similarity]:
    """Pieces of ``m`` cut down to the clone ``c`` (possibly empty)."""
    out = []
    for p in m.pieces:
        if c.contains_clone(p.source):
            out.append(p)
        elif p.source.contains_clone(c):
            out.append(p.restrict(c))
    return out


def compose(f: PiecewiseMap, g: PiecewiseMap) -> PiecewiseMap:
    """``f`` after ``g`` on the common refinement of their pieces."""
    if f.n != g.n:
        raise CompositionError("maps on different Q_n")
    if g.range != f.domain:
        gap = f.domain.measure - g.range.measure
        raise CompositionError(
            f"range of g {g.range} differs from domain of f {f.domain} (measure gap {gap})"
        )
    pieces = []
    for pg in g.pieces:
        covered = Fraction(0)
        for pf in f.pieces:
            if pf.source.contains_clone(pg.target):
                pieces.append(pg.then(pf))
                covered = pg.target.measure
                break
            if pg.target.contains_clone(pf.source):
                pieces.append(pg.inverse().restrict(pf.source).inverse().then(pf))
                covered += pf.source.measure
        if covered != pg.target.measure:
            raise CompositionError(
                f"piece target {pg.target} not covered by f (measure gap {pg.target.measure - covered})"
            )
    return PiecewiseMap(pieces)


class Bilipschitz(NamedTuple):
    K: Fraction
    empirical: Fraction | None


def bilipschitz_bound(m: PiecewiseMap, samples: int = 0, rng: np.random.Generator | None = None,
                      depth: int = 8) -> Bilipschitz:
    """Optimal bilipschitz constant of ``m``, plus an optional sampled check.

    Within a piece distances scale by exactly ``n**shift``; between two
    pieces every pair sits at one fixed distance before and one fixed
    distance after, so the supremum is a maximum over finitely many ratios.
    """
    ratios = [p.ratio for p in m.pieces]
    ps = m.pieces
    for i, p in enumerate(ps):
        for q in ps[i + 1:]:
            ratios.append(clone_distance(p.target, q.target) / clone_distance(p.source, q.source))
    K = max(max(r, 1 / r) for r in ratios)
    empirical = None
    if samples:
        rng = rng if rng is not None else make_rng(0)
        worst = Fraction(1)
        for _ in range(samples):
            x = random_point(rng, m.domain, depth)
            y = random_point(rng, m.domain, depth)
            d = qn_distance(x, y)
            if d == 0:
                continue
            r = qn_distance(m(x), m(y)) / d
            worst = max(worst, r, 1 / r)
        empirical = worst
    return Bilipschitz(K, empirical)


@dataclass(frozen=True)
class MeasureLinearReport:
    global_lambda: Fraction | None
    per_piece: tuple[Fraction, ...]
    witness_clone: Clone
    witness_lambda: Fraction
    prime_support: dict[str, dict[int, int]] | None = field(default=None)

    @property
    def primes(self) -> set[int]:
        if self.prime_support is None:
            return set()
        return set(self.prime_support["numerator"]) | set(self.prime_support["denominator"])

    def to_record(self) -> dict[str, str]:
        """Flat key/value form."""
        rec = {
            "global_lambda": "" if self.global_lambda is None else str(self.global_lambda),
            "per_piece": " ".join(str(x) for x in self.per_piece),
            "witness_clone": str(self.witness_clone),
            "witness_lambda": str(self.witness_lambda),
        }
        if self.prime_support is not None:
            for side in ("numerator", "denominator"):
                rec[f"primes_{side}"] = " ".join(
                    f"{p}^{e}" for p, e in sorted(self.prime_support[side].items())
                )
        return rec


def _factor(value: Fraction) -> dict[str, dict[int, int]]:
    return {
        "numerator": {int(p): int(e) for p, e in factorint(value.numerator).items()},
        "denominator": {int(p): int(e) for p, e in factorint(value.denominator).items()},
    }


def measure_linear_report(m: PiecewiseMap) -> MeasureLinearReport:
    """Per-piece measure ratios, a clone on which ``m`` is measure linear,
    and the global constant when there is one."""
    per_piece = m.ratios
    witness = m.pieces[0]
    glob = per_piece[0] if len(set(per_piece)) == 1 else None
    return MeasureLinearReport(
        global_lambda=glob,
        per_piece=per_piece,
        witness_clone=witness.source,
        witness_lambda=witness.ratio,
        prime_support=_factor(glob) if glob is not None else None,
    )


def check_prime_support(report: MeasureLinearReport, n: int) -> bool:
    """Every prime of the global constant divides ``n``."""
    if report.global_lambda is None:
        raise ParameterError("report has no global measure-linear constant")
    lam = report.global_lambda
    support = report.prime_support or _factor(lam)
    primes = set(support["numerator"]) | set(support["denominator"])
    return all(n % p == 0 for p in primes)


# --- zooming ---------------------------------------------------------------


def zoom_conjugate(m: PiecewiseMap, z: Similarity, out: Similarity | None = None) -> PiecewiseMap:
    """``out^{-1} . m . z`` on ``z.source``; ``out`` defaults to ``z``.

    Only the part of ``z.source`` that ``z`` sends into the domain of ``m``
    is kept.
    """
    out = z if out is None else out
    pieces = []
    for p in restrict(m, z.target):
        if not out.target.contains_clone(p.target):
            raise DomainError(f"image {p.target} leaves the output window {out.target}")
        pieces.append(Similarity(z.preimage(p.source), out.preimage(p.target)))
    if not pieces:
        raise DomainError(f"window {z.target} misses the domain {m.domain}")
    return PiecewiseMap(pieces)


class ZoomLimit(NamedTuple):
    similarity: Similarity
    stabilization_depth: int
    lam: Fraction


def zoom_step(m: PiecewiseMap, x: BoundaryPoint, d: int) -> PiecewiseMap:
    """The conjugate after zooming ``d`` levels toward ``x``.

    The domain side zooms from the zero window onto the clone of ``x``
    ``d`` levels below the domain hull; the range side renormalises the
    hull of the image by the same factor.
    """
    top = hull(m.domain).height
    window = Clone(m.n, top)
    cell = x.clone_at(top - d)
    z = Similarity(window, cell)
    pieces = restrict(m, cell)
    if not pieces:
        raise DomainError(f"{x} is not in the domain {m.domain}")
    img = hull(p.target for p in pieces)
    out = Similarity(Clone(m.n, img.height + d), img)
    return zoom_conjugate(m, z, out)


def zoom_limit(m: PiecewiseMap, x: BoundaryPoint, max_depth: int | None = None) -> ZoomLimit:
    """Zoom toward ``x`` until the conjugate is a single similarity on the
    whole window, and certify it by one further zoom step."""
    m.piece_for(x)
    limit = m.max_depth() + 1 if max_depth is None else max_depth
    top = hull(m.domain).height
    window = Clone(m.n, top)
    for d in range(limit + 1):
        conj = zoom_step(m, x, d)
        if len(conj.pieces) == 1 and conj.pieces[0].source == window:
            sim = conj.pieces[0]
            if zoom_step(m, x, d + 1).pieces != (sim,):
                raise AssertionError("zoom did not stabilise after a single-piece step")
            return ZoomLimit(sim, d, sim.ratio)
    raise DomainError(f"no stabilisation within depth {limit}")


def measure_linearize(phi_l: PiecewiseMap, phi_u: PiecewiseMap, x: BoundaryPoint,
                      y: BoundaryPoint) -> tuple[ZoomLimit, ZoomLimit]:
    """Zoom the lower map toward ``x`` and the upper map toward ``y``.

    Zooming one boundary leaves the other boundary map conjugated by
    similarities only, so the two limits are independent.
    """
    return zoom_limit(phi_l, x), zoom_limit(phi_u, y)


# --- random maps and exhaustive search ---------------------------------------


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; every random draw in the package goes through one."""
    return np.random.Generator(np.random.Philox(seed))


def random_point(rng: np.random.Generator, where: CloneSet | Clone, depth: int) -> BoundaryPoint:
    clones = [where] if isinstance(where, Clone) else list(where)
    weights = np.array([float(c.measure) for c in clones])
    c = clones[int(rng.choice(len(clones), p=weights / weights.sum()))]
    return c.point([int(d) for d in rng.integers(0, c.n, size=depth)])


def random_partition(rng: np.random.Generator, c: Clone, max_depth: int, p_split: float = 0.5) -> list[Clone]:
    if max_depth > 0 and rng.random() < p_split:
        out = []
        for child in c.children():
            out.extend(random_partition(rng, child, max_depth - 1, p_split))
        return out
    return [c]


def pack(rng: np.random.Generator, target: Clone, sizes: Sequence[Fraction]) -> list[Clone]:
    """Place disjoint clones of the given measures inside ``target``.

    The measures must be powers of ``n`` summing to ``mu(target)``.  Clones
    are packed largest first into randomly ordered children, which never
    fragments.
    """
    if sum(sizes, Fraction(0)) != target.measure:
        raise ParameterError("sizes do not fill the target")
    if len(sizes) == 1:
        return [target]
    order = sorted(range(len(sizes)), key=lambda i: (-sizes[i], float(rng.random())))
    cap = target.measure / target.n
    kids = [target.child(int(c)) for c in rng.permutation(target.n)]
    out: list[Clone | None] = [None] * len(sizes)
    k, fill, bucket = 0, Fraction(0), []
    for i in order:
        bucket.append(i)
        fill += sizes[i]
        if fill == cap:
            placed = pack(rng, kids[k], [sizes[j] for j in bucket])
            for j, c in zip(bucket, placed):
                out[j] = c
            k, fill, bucket = k + 1, Fraction(0), []
    return out  # type: ignore[return-value]


def random_measure_linear_map(rng: np.random.Generator, n: int, max_depth: int = 3,
                              exponents: Sequence[int] = (-1, 0, 1),
                              window: Clone | None = None) -> PiecewiseMap:
    """Random map with global measure-linear constant ``n**j``.

    The domain is a random partition of ``window`` (the unit clone by
    default); each piece goes to a clone ``n**j`` times larger, placed at a
    random position inside the window ``j`` levels up.
    """
    window = Clone(n, 0) if window is None else window
    j = int(rng.choice(list(exponents)))
    sources = random_partition(rng, window, max_depth)
    lam = Fraction(n) ** j
    target = Clone(n, window.height + j, window.prefix)
    targets = pack(rng, target, [lam * s.measure for s in sources])
    return PiecewiseMap(Similarity(a, b) for a, b in zip(sources, targets))


def random_piecewise_map(rng: np.random.Generator, n: int, max_depth: int = 3,
                         exponents: Sequence[int] = (-1, 0, 1),
                         window: Clone | None = None) -> PiecewiseMap:
    """Random map whose pieces each get their own scaling factor."""
    window = Clone(n, 0) if window is None else window
    sources = random_partition(rng, window, max_depth)
    sizes = [s.measure * Fraction(n) ** int(rng.choice(list(exponents))) for s in sources]
    total = sum(sizes, Fraction(0))
    # smallest clone set holding the images: a target window of total
    # measure, padded by extra pieces when total is not a power of n
    top = 0
    while Fraction(n) ** top < total:
        top += 1
    while Fraction(n) ** (top - 1) >= total:
        top -= 1
    slack = Fraction(n) ** top - total
    # fill the slack with pieces of the smallest size (all sizes are multiples of it)
    unit = min(sizes)
    filler = [unit] * int(slack / unit)
    placed = pack(rng, Clone(n, top), sizes + filler)
    return PiecewiseMap(Similarity(a, b) for a, b in zip(sources, placed[: len(sources)]))


def partitions(c: Clone, max_depth: int) -> list[list[Clone]]:
    """Every partition of ``c`` into subclones at most ``max_depth`` below it."""
    if max_depth == 0:
        return [[c]]
    out = [[c]]
    kid_parts = [partitions(k, max_depth - 1) for k in c.children()]
    for combo in product(*kid_parts):
        out.append([x for part in combo for x in part])
    return out


def search_measure_linear_maps(domain: Clone, range_: Sequence[Clone], lam: Fraction,
                               max_depth: int) -> list[PiecewiseMap]:
    """All piecewise similarities from ``domain`` onto ``range_`` with every
    piece scaling measure by exactly ``lam``, with pieces at most
    ``max_depth`` below the clones they partition."""
    lam = Fraction(lam)
    sources = partitions(domain, max_depth)
    per_target = [partitions(t, max_depth) for t in range_]
    found = []
    for src in sources:
        want = sorted(lam * a.measure for a in src)
        for combo in product(*per_target):
            tgt = [x for part in combo for x in part]
            if len(tgt) != len(src):
                continue
            if sorted(b.measure for b in tgt) != want:
                continue
            a_sorted = sorted(src, key=lambda a: a.measure)
            b_sorted = sorted(tgt, key=lambda b: b.measure)
            found.append(PiecewiseMap(Similarity(a, b) for a, b in zip(a_sorted, b_sorted)))
    return found


# --- text format -------------------------------------------------------------


def parse_map(text: str) -> PiecewiseMap:
    """Read the map description format: a line ``n = <int>`` (or a bare
    integer) followed by ``source -> target`` lines; ``#`` starts a comment."""
    n = None
    pieces = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if n is None:
            key = line.split("=", 1)
            if len(key) == 2 and key[0].strip() == "n":
                n = int(key[1])
            else:
                n = int(line)
            continue
        if "->" not in line:
            raise ParameterError(f"expected 'source -> target', got {raw!r}")
        src, tgt = (parse_clone(tok) for tok in line.split("->"))
        if src.n != n or tgt.n != n:
            raise ParameterError(f"piece {line!r} does not live in Q_{n}")
        pieces.append(Similarity(src, tgt))
    if n is None:
        raise ParameterError("map description has no header")
    return PiecewiseMap(pieces)


def format_map(m: PiecewiseMap) -> str:
    lines = [f"n = {m.n}"] + [f"{p.source} -> {p.target}" for p in m.pieces]
    return "\n".join(lines) + "\n"


def read_map(path) -> PiecewiseMap:
    with open(path) as fh:
        return parse_map(fh.read())
