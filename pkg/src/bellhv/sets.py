"""Finite measurable subsets of a hidden-variable space.

Two concrete kinds cover every built-in model:

* ``IntervalSet`` -- a finite union of half-open intervals ``[s, e)`` inside a
  bounded domain (the unit interval, or the circle cut open at 0).
* ``PointSet`` -- a finite subset of a finite universe of labelled points.

Both are immutable and kept in canonical form, so ``==`` is structural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

# Pieces shorter than this are dropped and gaps shorter than this are closed.
SNAP = 1e-13


class MeasurableSubset:
    """Common operator surface for the two set kinds."""

    def __and__(self, other):
        return self.intersect(other)

    def __or__(self, other):
        return self.union(other)

    def __sub__(self, other):
        return self.intersect(other.complement())

    def __invert__(self):
        return self.complement()

    def difference(self, other):
        return self - other

    def issubset(self, other) -> bool:
        return (self - other).is_empty

    def isdisjoint(self, other) -> bool:
        return (self & other).is_empty


def _canonical(intervals: Iterable[Sequence[float]], lo: float, hi: float):
    clipped = []
    for s, e in intervals:
        s, e = max(float(s), lo), min(float(e), hi)
        if e - s > SNAP:
            clipped.append((s, e))
    clipped.sort()
    merged: list[list[float]] = []
    for s, e in clipped:
        if merged and s <= merged[-1][1] + SNAP:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    # snap to domain ends so full sets compare equal
    if merged and merged[0][0] - lo <= SNAP:
        merged[0][0] = lo
    if merged and hi - merged[-1][1] <= SNAP:
        merged[-1][1] = hi
    return tuple((s, e) for s, e in merged)


@dataclass(frozen=True)
class IntervalSet(MeasurableSubset):
    """Disjoint, sorted union of half-open intervals within ``domain``."""

    intervals: tuple[tuple[float, float], ...] = ()
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        lo, hi = float(self.domain[0]), float(self.domain[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            raise ValueError(f"invalid domain {self.domain!r}")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "intervals", _canonical(self.intervals, lo, hi))

    @classmethod
    def full(cls, domain=(0.0, 1.0)) -> IntervalSet:
        return cls(((domain[0], domain[1]),), domain)

    @classmethod
    def empty(cls, domain=(0.0, 1.0)) -> IntervalSet:
        return cls((), domain)

    @classmethod
    def arc(cls, start: float, end: float, domain=(0.0, 2 * math.pi)) -> IntervalSet:
        """The arc from ``start`` to ``end`` (counter-clockwise) on a periodic domain.

        Endpoints are reduced modulo the domain width; an arc whose span is
        at least one full turn is the whole domain.
        """
        lo, hi = domain
        width = hi - lo
        span = end - start
        if span <= 0:
            return cls.empty(domain)
        if span >= width - SNAP:
            return cls.full(domain)
        s = lo + math.fmod(start - lo, width)
        if s < lo:
            s += width
        if s >= hi:
            s -= width
        e = s + span
        if e <= hi:
            return cls(((s, e),), domain)
        return cls(((s, hi), (lo, e - width)), domain)

    def _check(self, other: IntervalSet):
        if not isinstance(other, IntervalSet):
            raise TypeError(f"cannot combine IntervalSet with {type(other).__name__}")
        if other.domain != self.domain:
            raise ValueError(f"domain mismatch {self.domain} vs {other.domain}")

    def union(self, other: IntervalSet) -> IntervalSet:
        self._check(other)
        return IntervalSet(self.intervals + other.intervals, self.domain)

    def intersect(self, other: IntervalSet) -> IntervalSet:
        self._check(other)
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            s = max(a[i][0], b[j][0])
            e = min(a[i][1], b[j][1])
            if e > s:
                out.append((s, e))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(tuple(out), self.domain)

    def complement(self) -> IntervalSet:
        lo, hi = self.domain
        gaps = []
        cursor = lo
        for s, e in self.intervals:
            if s > cursor:
                gaps.append((cursor, s))
            cursor = e
        if cursor < hi:
            gaps.append((cursor, hi))
        return IntervalSet(tuple(gaps), self.domain)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def measure(self) -> float:
        """Lebesgue measure (total length)."""
        return math.fsum(e - s for s, e in self.intervals)

    def __contains__(self, x) -> bool:
        return any(s <= x < e for s, e in self.intervals)

    def midpoints(self) -> list[float]:
        return [0.5 * (s + e) for s, e in self.intervals]

    def isclose(self, other: IntervalSet, tol: float = 1e-12) -> bool:
        self._check(other)
        if len(self.intervals) != len(other.intervals):
            return False
        return all(
            abs(s1 - s2) <= tol and abs(e1 - e2) <= tol
            for (s1, e1), (s2, e2) in zip(self.intervals, other.intervals)
        )

    def to_json(self):
        return [[s, e] for s, e in self.intervals]

    def __repr__(self):
        if not self.intervals:
            return "IntervalSet(∅)"
        body = " ∪ ".join(f"[{s:.6g}, {e:.6g})" for s, e in self.intervals)
        return f"IntervalSet({body})"


@dataclass(frozen=True)
class PointSet(MeasurableSubset):
    """Subset of a finite, ordered universe of hashable points."""

    points: frozenset = frozenset()
    universe: tuple[Hashable, ...] = field(default=(), repr=False)

    def __post_init__(self):
        pts = frozenset(self.points)
        unknown = pts - set(self.universe)
        if unknown:
            raise ValueError(f"points {sorted(unknown)} not in universe")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "universe", tuple(self.universe))

    @classmethod
    def full(cls, universe) -> PointSet:
        return cls(frozenset(universe), tuple(universe))

    def _check(self, other: PointSet):
        if not isinstance(other, PointSet):
            raise TypeError(f"cannot combine PointSet with {type(other).__name__}")
        if other.universe != self.universe:
            raise ValueError("universe mismatch")

    def union(self, other: PointSet) -> PointSet:
        self._check(other)
        return PointSet(self.points | other.points, self.universe)

    def intersect(self, other: PointSet) -> PointSet:
        self._check(other)
        return PointSet(self.points & other.points, self.universe)

    def complement(self) -> PointSet:
        return PointSet(frozenset(self.universe) - self.points, self.universe)

    @property
    def is_empty(self) -> bool:
        return not self.points

    def measure(self) -> float:
        """Counting measure."""
        return float(len(self.points))

    def __contains__(self, x) -> bool:
        return x in self.points

    def __iter__(self):
        return (p for p in self.universe if p in self.points)

    def isclose(self, other: PointSet, tol: float = 0.0) -> bool:
        return self == other

    def to_json(self):
        return [_point_label(p) for p in self]

    def __repr__(self):
        return "PointSet({" + ", ".join(_point_label(p) for p in self) + "})"


def _point_label(p) -> str:
    if isinstance(p, tuple) and all(v in (1, -1) for v in p):
        return "".join("+" if v == 1 else "-" for v in p)
    return str(p)
