"""Finite topologies on modal spaces.

Open sets are bitmasks over an ordered tuple of point ids: bit k stands for
``points[k]``.  Everything here is exact and exhaustive, so it is meant for
spaces of a few dozen points at most.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .formula import Formula, Neg, TOP, conj, disj
from .kripke import satisfies
from .metrics import Descriptor, ModalSpacePoint

MAX_COVER_OPENS = 16
# pairwise closure is only re-verified for families up to this size
MAX_CHECKED_OPENS = 2048


@dataclass(frozen=True)
class FiniteTopology:
    points: tuple[str, ...]
    opens: frozenset[int]

    def __post_init__(self):
        full = self.full
        if any(u & ~full for u in self.opens):
            raise ValueError("open set mentions a bit outside the space")
        if 0 not in self.opens or full not in self.opens:
            raise ValueError("a topology contains the empty set and the whole space")
        if len(self.opens) > MAX_CHECKED_OPENS:
            return
        for u, v in itertools.combinations(self.opens, 2):
            if u & v not in self.opens or u | v not in self.opens:
                raise ValueError("open sets are not closed under union and intersection")

    @property
    def full(self) -> int:
        return (1 << len(self.points)) - 1

    def members(self, mask: int) -> frozenset[str]:
        return frozenset(p for k, p in enumerate(self.points) if mask >> k & 1)

    def mask(self, members: Iterable[str]) -> int:
        index = {p: k for k, p in enumerate(self.points)}
        out = 0
        for p in members:
            out |= 1 << index[p]
        return out

    def is_open(self, members: Iterable[str]) -> bool:
        return self.mask(members) in self.opens

    def is_discrete(self) -> bool:
        return len(self.opens) == 1 << len(self.points)

    def as_sets(self) -> frozenset[frozenset[str]]:
        return frozenset(self.members(u) for u in self.opens)


def generate(points: Sequence[str], subbasis: Iterable[int]) -> FiniteTopology:
    """The coarsest topology containing every subbasis mask.

    On a finite space each point has a least open neighbourhood, the
    intersection of the subbasis sets containing it, and the opens are
    exactly the unions of these.
    """
    points = tuple(points)
    n = len(points)
    full = (1 << n) - 1
    subbasis = [s & full for s in subbasis]
    nbhd = []
    for k in range(n):
        m = full
        for s in subbasis:
            if s >> k & 1:
                m &= s
        nbhd.append(m)
    opens = {0}
    for m in set(nbhd):
        opens |= {u | m for u in opens}
    return FiniteTopology(points, frozenset(opens))


def _ids(space: Sequence[ModalSpacePoint]) -> tuple[str, ...]:
    return tuple(str(x.class_id) for x in space)


def extension_mask(space: Sequence[ModalSpacePoint], f: Formula) -> int:
    out = 0
    for k, x in enumerate(space):
        if satisfies(x.representative, f):
            out |= 1 << k
    return out


def stone_topology(space: Sequence[ModalSpacePoint], D: Descriptor | Sequence[Formula]) -> FiniteTopology:
    """Generated by the truth and falsity sets of each descriptor entry."""
    entries = D.entries if isinstance(D, Descriptor) else tuple(D)
    full = (1 << len(space)) - 1
    sub = []
    for f in entries:
        m = extension_mask(space, f)
        sub.extend((m, full & ~m))
    return generate(_ids(space), sub)


def metric_topology(space: Sequence[ModalSpacePoint] | Sequence[str], matrix: Sequence[Sequence[Fraction]]) -> FiniteTopology:
    """Generated by all open balls B(x, eps).

    The radii are the distinct realised distances, the midpoints between
    consecutive ones and one radius past the maximum; any other radius gives
    a ball already in this list.
    """
    ids = tuple(space) if space and isinstance(space[0], str) else _ids(space)
    n = len(ids)
    values = sorted({Fraction(matrix[i][j]) for i in range(n) for j in range(n)})
    radii = set(v for v in values if v > 0)
    radii |= {(a + b) / 2 for a, b in zip(values, values[1:])}
    radii.add(values[-1] + 1 if values else Fraction(1))
    balls = set()
    for i in range(n):
        for eps in radii:
            m = 0
            for j in range(n):
                if matrix[i][j] < eps:
                    m |= 1 << j
            balls.add(m)
    return generate(ids, balls)


# ------------------------------------------------------------- properties


def is_hausdorff(T: FiniteTopology) -> bool:
    n = len(T.points)
    for i, j in itertools.combinations(range(n), 2):
        bi, bj = 1 << i, 1 << j
        if not any(
            u & bi and v & bj and not u & v
            for u in T.opens
            if u & bi and not u & bj
            for v in T.opens
        ):
            return False
    return True


def clopen_sets(T: FiniteTopology) -> frozenset[int]:
    return frozenset(u for u in T.opens if (T.full & ~u) in T.opens)


def is_totally_disconnected(T: FiniteTopology) -> bool:
    """Every two points are split by a clopen set (and its complement)."""
    clopens = clopen_sets(T)
    n = len(T.points)
    for i, j in itertools.combinations(range(n), 2):
        if not any((u >> i & 1) != (u >> j & 1) for u in clopens):
            return False
    return True


def is_compact(T: FiniteTopology, max_opens: int = MAX_COVER_OPENS) -> bool:
    """Check every cover drawn from the opens for a finite subcover.

    Always true on a finite space; the explicit search is kept as an
    executable statement of the definition and is limited to small families.
    """
    opens = sorted(T.opens)
    if len(opens) > max_opens:
        raise ValueError(f"{len(opens)} opens is too many for exhaustive cover search")
    for r in range(1, len(opens) + 1):
        for cover in itertools.combinations(opens, r):
            union = 0
            for u in cover:
                union |= u
            if union != T.full:
                continue
            # a cover drawn from a finite family is its own finite subcover;
            # still look for a subcover of at most one set per point
            picked = 0
            for k in range(len(T.points)):
                if not picked >> k & 1:
                    picked |= next(u for u in cover if u >> k & 1)
            if picked != T.full:
                return False  # pragma: no cover - impossible
    return True


# ------------------------------------------------------------ definability


@dataclass(frozen=True)
class DefinabilityRow:
    members: frozenset[str]
    formula: Formula | None


def cell_formula(vector: Sequence[bool], entries: Sequence[Formula]) -> Formula:
    return conj(f if bit else Neg(f) for f, bit in zip(entries, vector))


def definable_check(T: FiniteTopology, space: Sequence[ModalSpacePoint], D: Descriptor | Sequence[Formula]) -> list[DefinabilityRow]:
    """Match every clopen set with a boolean combination of descriptor entries.

    Points with the same truth vector on the entries form a cell; a clopen set
    is definable exactly when it is a union of cells, and then the
    disjunction of the cell conjunctions defines it.  Rows with ``formula``
    None are clopens that split a cell.
    """
    entries = D.entries if isinstance(D, Descriptor) else tuple(D)
    ids = _ids(space)
    if ids != T.points:
        raise ValueError("topology and space list different points")
    vectors = [tuple(satisfies(x.representative, f) for f in entries) for x in space]
    rows = []
    for u in sorted(clopen_sets(T)):
        inside = {vectors[k] for k in range(len(space)) if u >> k & 1}
        outside = {vectors[k] for k in range(len(space)) if not u >> k & 1}
        if inside & outside:
            rows.append(DefinabilityRow(T.members(u), None))
        elif not outside:
            rows.append(DefinabilityRow(T.members(u), TOP))
        else:
            rows.append(DefinabilityRow(T.members(u), disj(cell_formula(v, entries) for v in sorted(inside))))
    return rows
