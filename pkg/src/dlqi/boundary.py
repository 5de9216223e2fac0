"""The n-adic boundary Q_n of the tree T_{n+1}.

A boundary point is a finitely supported map from height index to digit.
Digit ``a_i`` labels the edge of the vertical geodesic going from height
``i`` to ``i + 1``, so two points meet at height ``1 + max{i : a_i != a'_i}``
and their distance is ``n`` to that power.

Clones (shadows of tree vertices) are the balls of this ultrametric.  A
clone of height ``h`` fixes every digit at index ``>= h`` and has
diameter and measure ``n**h``.  All quantities are exact ``Fraction``s.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from .errors import ContainmentError, ParameterError

INFINITY = math.inf


def _strip(digits: Sequence[int]) -> tuple[int, ...]:
    end = len(digits)
    while end and digits[end - 1] == 0:
        end -= 1
    return tuple(digits[:end])


def _check_digits(n: int, digits: Iterable[int]) -> None:
    for d in digits:
        if not 0 <= d < n:
            raise ParameterError(f"digit {d} out of range for n={n}")


def _check_n(n: int) -> None:
    if not isinstance(n, int) or n < 2:
        raise ParameterError(f"branching parameter must be an integer >= 2, got {n!r}")


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of Q_n with finitely many nonzero digits.

    ``support`` holds the nonzero digits as sorted ``(index, digit)`` pairs.
    """

    n: int
    support: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        _check_n(self.n)
        indices = [i for i, _ in self.support]
        if indices != sorted(set(indices)):
            raise ParameterError("support indices must be strictly increasing")
        for _, d in self.support:
            if not 0 < d < self.n:
                raise ParameterError(f"support digit {d} invalid for n={self.n}")

    @classmethod
    def from_digits(cls, n: int, digits: Mapping[int, int]) -> "BoundaryPoint":
        _check_digits(n, digits.values())
        return cls(n, tuple(sorted((i, d) for i, d in digits.items() if d)))

    @classmethod
    def zero(cls, n: int) -> "BoundaryPoint":
        return cls(n, ())

    def digit(self, i: int) -> int:
        for j, d in self.support:
            if j == i:
                return d
            if j > i:
                break
        return 0

    def digits(self) -> dict[int, int]:
        return dict(self.support)

    def window(self, h: int) -> tuple[int, ...]:
        """Digits at indices ``h, h+1, ...`` with the zero tail dropped."""
        above = [(i, d) for i, d in self.support if i >= h]
        if not above:
            return ()
        out = [0] * (above[-1][0] - h + 1)
        for i, d in above:
            out[i - h] = d
        return tuple(out)

    def clone_at(self, h: int) -> "Clone":
        """The clone of height ``h`` containing this point."""
        return Clone(self.n, h, self.window(h))

    def shifted(self, s: int) -> "BoundaryPoint":
        return BoundaryPoint(self.n, tuple((i + s, d) for i, d in self.support))

    def __str__(self) -> str:
        body = ",".join(f"{i}:{d}" for i, d in self.support)
        return f"{self.n}<{body}>"


def qn_distance(x: BoundaryPoint, y: BoundaryPoint) -> Fraction:
    """Ultrametric distance ``n**I`` with ``I = 1 + max differing index``."""
    if x.n != y.n:
        raise ParameterError(f"points live in different Q_n ({x.n} vs {y.n})")
    diff = set(x.support) ^ set(y.support)
    if not diff:
        return Fraction(0)
    top = max(i for i, _ in diff)
    return Fraction(x.n) ** (top + 1)


@dataclass(frozen=True, order=True)
class Clone:
    """Shadow of the tree vertex at ``height`` whose digits from ``height``
    upward are ``prefix`` (zero tail dropped)."""

    n: int
    height: int
    prefix: tuple[int, ...] = ()

    def __post_init__(self):
        _check_n(self.n)
        _check_digits(self.n, self.prefix)
        if self.prefix and self.prefix[-1] == 0:
            object.__setattr__(self, "prefix", _strip(self.prefix))

    @property
    def measure(self) -> Fraction:
        return Fraction(self.n) ** self.height

    diameter = measure

    def digit(self, i: int) -> int:
        if i < self.height:
            raise ParameterError(f"digit {i} is free in a clone of height {self.height}")
        j = i - self.height
        return self.prefix[j] if j < len(self.prefix) else 0

    def digits_from(self, h: int) -> tuple[int, ...]:
        """Prefix digits re-based at index ``h >= height``."""
        return _strip(self.prefix[h - self.height:])

    def contains(self, x: BoundaryPoint) -> bool:
        return x.n == self.n and x.window(self.height) == self.prefix

    __contains__ = contains

    def contains_clone(self, other: "Clone") -> bool:
        return (
            other.n == self.n
            and other.height <= self.height
            and other.digits_from(self.height) == self.prefix
        )

    def disjoint(self, other: "Clone") -> bool:
        return not (self.contains_clone(other) or other.contains_clone(self))

    def parent(self) -> "Clone":
        return Clone(self.n, self.height + 1, self.prefix[1:])

    def ancestor(self, h: int) -> "Clone":
        if h < self.height:
            raise ParameterError(f"ancestor height {h} below clone height {self.height}")
        return Clone(self.n, h, self.digits_from(h))

    def child(self, c: int) -> "Clone":
        return Clone(self.n, self.height - 1, (c,) + self.prefix)

    def children(self) -> list["Clone"]:
        return [self.child(c) for c in range(self.n)]

    def last_digit(self) -> int:
        """The digit at index ``height`` (which child of the parent this is)."""
        return self.prefix[0] if self.prefix else 0

    def representative(self) -> BoundaryPoint:
        """The zero-tail point of the clone."""
        return BoundaryPoint.from_digits(
            self.n, {self.height + j: d for j, d in enumerate(self.prefix)}
        )

    def point(self, below: Sequence[int]) -> BoundaryPoint:
        """Point of the clone whose digits at ``height-1, height-2, ...`` are ``below``."""
        _check_digits(self.n, below)
        digits = {self.height + j: d for j, d in enumerate(self.prefix)}
        digits.update({self.height - 1 - j: d for j, d in enumerate(below)})
        return BoundaryPoint.from_digits(self.n, digits)

    def __str__(self) -> str:
        return f"{self.n}@{self.height}:" + "".join(_digit_char(d) for d in self.prefix)


def relation(a: Clone, b: Clone) -> str:
    """One of ``'equal'``, ``'subset'``, ``'superset'``, ``'disjoint'``."""
    if a == b:
        return "equal"
    if b.contains_clone(a):
        return "subset"
    if a.contains_clone(b):
        return "superset"
    return "disjoint"


def clone_distance(a: Clone, b: Clone) -> Fraction:
    """The common distance between any point of ``a`` and any point of ``b``.

    Only defined for disjoint clones: in an ultrametric every cross pair of
    two disjoint balls is at the same distance.
    """
    if not a.disjoint(b):
        raise ParameterError(f"{a} and {b} are not disjoint")
    m = max(a.height, b.height)
    da, db = a.digits_from(m), b.digits_from(m)
    length = max(len(da), len(db))
    da += (0,) * (length - len(da))
    db += (0,) * (length - len(db))
    top = max(j for j in range(length) if da[j] != db[j])
    return Fraction(a.n) ** (m + top + 1)


def hull(clones: Iterable[Clone]) -> Clone:
    """Smallest clone containing every given clone."""
    clones = list(clones)
    if not clones:
        raise ParameterError("hull of an empty family")
    h = max(c.height for c in clones)
    while True:
        anc = {c.ancestor(h) for c in clones}
        if len(anc) == 1:
            return anc.pop()
        h += 1


def shadow(n: int, h: int, prefix: Sequence[int] = ()) -> Clone:
    """Shadow on the boundary of the tree vertex at height ``h`` with ``prefix``."""
    _check_n(n)
    _check_digits(n, prefix)
    return Clone(n, h, tuple(prefix))


def refine(c: Clone, depth: int) -> list[Clone]:
    """The ``n**depth`` subclones of ``c`` at height ``c.height - depth``."""
    if depth < 0:
        raise ParameterError("refinement depth must be >= 0")
    out = []
    for below in product(range(c.n), repeat=depth):
        # below[0] is the digit at the new height, below[-1] just under c
        out.append(Clone(c.n, c.height - depth, tuple(below) + c.prefix))
    return out


class CloneSet:
    """Finite disjoint union of clones in canonical form.

    Complete sibling families are merged into their parent, members are
    sorted, so equal sets compare equal.
    """

    __slots__ = ("members", "n")

    def __init__(self, members: Iterable[Clone] = (), n: int | None = None):
        members = list(members)
        ns = {c.n for c in members}
        if n is not None:
            ns.add(n)
        if len(ns) > 1:
            raise ParameterError(f"clones from different Q_n: {sorted(ns)}")
        self.n = ns.pop() if ns else None
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                if not a.disjoint(b):
                    raise ParameterError(f"clones {a} and {b} overlap")
        self.members: tuple[Clone, ...] = tuple(_canonical(members))

    def __iter__(self) -> Iterator[Clone]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __eq__(self, other) -> bool:
        return isinstance(other, CloneSet) and self.members == other.members

    def __hash__(self) -> int:
        return hash(self.members)

    def __repr__(self) -> str:
        return f"CloneSet({str(self)})"

    def __str__(self) -> str:
        return "{" + ",".join(str(c) for c in self.members) + "}"

    @property
    def measure(self) -> Fraction:
        return sum((c.measure for c in self.members), Fraction(0))

    def contains(self, x: BoundaryPoint) -> bool:
        return any(c.contains(x) for c in self.members)

    __contains__ = contains

    def contains_clone(self, c: Clone) -> bool:
        """True when ``c`` is covered by the union of members."""
        return measure(self.intersect_clone(c)) == c.measure

    def intersect_clone(self, c: Clone) -> "CloneSet":
        parts = []
        for m in self.members:
            if c.contains_clone(m):
                parts.append(m)
            elif m.contains_clone(c):
                parts.append(c)
        return CloneSet(parts, n=self.n)

    def issubset(self, other: "CloneSet") -> bool:
        return all(other.contains_clone(c) for c in self.members)

    def union(self, other: "CloneSet") -> "CloneSet":
        return CloneSet(self.members + other.members)


def _canonical(members: list[Clone]) -> list[Clone]:
    current = set(members)
    changed = True
    while changed:
        changed = False
        by_parent: dict[Clone, set[Clone]] = {}
        for c in current:
            by_parent.setdefault(c.parent(), set()).add(c)
        for parent, kids in by_parent.items():
            if len(kids) == parent.n:
                current -= kids
                current.add(parent)
                changed = True
    return sorted(current, key=lambda c: (c.height, c.prefix))


def measure(s: CloneSet | Clone) -> Fraction:
    return s.measure


class Separation(NamedTuple):
    sep: Fraction | float
    is_clone_union: bool


def separation(b: CloneSet, ambient: Clone) -> Separation:
    """``sep(b)``: infimum distance from ``b`` to ``ambient`` minus ``b``.

    For a canonical clone set this is ``n`` times the smallest member
    measure; it is ``INFINITY`` when the complement inside ``ambient`` is
    empty.
    """
    for c in b:
        if not ambient.contains_clone(c):
            raise ContainmentError(f"{c} is not inside the ambient clone {ambient}")
    if b.measure == ambient.measure:
        return Separation(INFINITY, True)
    if not len(b):
        return Separation(INFINITY, True)
    smallest = min(c.measure for c in b)
    sep = ambient.n * smallest
    return Separation(sep, sep > 0)


_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


def _digit_char(d: int) -> str:
    if d < len(_DIGITS):
        return _DIGITS[d]
    return f"[{d}]"


_CLONE_RE = re.compile(r"^\s*(\d+)@(-?\d+):((?:[0-9a-z]|\[\d+\])*)\s*$")


def parse_clone(text: str) -> Clone:
    """Parse ``n@h:d_h d_{h+1} ...``, e.g. ``3@-2:21``.

    Digits beyond 9 use ``a-z`` or a bracketed decimal such as ``[12]``.
    """
    m = _CLONE_RE.match(text)
    if not m:
        raise ParameterError(f"bad clone literal {text!r}")
    n, h, body = int(m.group(1)), int(m.group(2)), m.group(3)
    digits = [int(tok[1:-1]) if tok.startswith("[") else _DIGITS.index(tok)
              for tok in re.findall(r"\[\d+\]|[0-9a-z]", body)]
    return shadow(n, h, digits)


def parse_clone_set(text: str) -> CloneSet:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ParameterError(f"clone set literal must be braced: {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return CloneSet()
    return CloneSet(parse_clone(tok) for tok in inner.split(","))
