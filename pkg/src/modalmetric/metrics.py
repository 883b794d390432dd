"""Descriptors, weight functions and weighted disagreement distances.

A descriptor is organised in *levels*.  A finite descriptor has one entry per
level, so per-entry weights and per-level weights coincide; an infinite
(leveled) descriptor produces its levels on demand.  A weight function gives
the weight of each entry at a level and a certified bound on everything from
a level onwards, which is what lets :func:`distance` return an exact rational
interval around a possibly infinite sum.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from . import bisim
from .errors import BudgetExceeded, ConditionError, ConvergenceError, FormulaSyntaxError, SignatureError
from .formula import Atom, Formula, Signature, check_signature, disj, parse
from .kripke import PointedKripkeModel, truth_values

MAX_LEVELS = 100_000


@dataclass(frozen=True)
class DistanceInterval:
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper:
            raise ValueError(f"bad interval [{self.lower}, {self.upper}]")

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    def contains(self, value) -> bool:
        return self.lower <= value <= self.upper

    def __str__(self):
        return f"{self.lower} {self.upper}"


class Descriptor:
    """An enumerated set of pairwise inequivalent formulas, grouped in levels.

    ``level_fn(n)`` produces the entries of level ``n``.  ``level_depth(n)``
    bounds the modal depth of those entries without materialising them, and
    ``determining_level(m)`` (representative descriptors only) names a level
    such that agreement on all entries up to it fixes the truth value of every
    formula of modal depth ``m``.
    """

    def __init__(
        self,
        signature: Signature,
        level_fn: Callable[[int], Sequence[Formula]],
        *,
        first_level: int = 0,
        last_level: int | None = None,
        level_depth: Callable[[int], int] | None = None,
        determining_level: Callable[[int], int] | None = None,
        name: str = "custom",
    ):
        self.signature = signature
        self._level_fn = level_fn
        self.first_level = first_level
        self.last_level = last_level
        self._level_depth = level_depth
        self._determining_level = determining_level
        self.name = name
        self._levels: dict[int, tuple[Formula, ...]] = {}
        self._lock = threading.Lock()

    @classmethod
    def finite(
        cls,
        entries: Sequence[Formula],
        signature: Signature,
        *,
        check: bool = True,
        budget: int = bisim.DEFAULT_BUDGET,
        name: str = "custom",
    ) -> "Descriptor":
        entries = tuple(entries)
        for f in entries:
            check_signature(f, signature)
        if check:
            for (i, f), (j, g) in itertools.combinations(enumerate(entries), 2):
                if bisim.equivalent(f, g, signature, budget):
                    raise ConditionError(f"descriptor entries {i} and {j} are equivalent")
        return cls(
            signature,
            lambda n: (entries[n],),
            first_level=0,
            last_level=len(entries) - 1,
            name=name,
        )

    @property
    def is_finite(self) -> bool:
        return self.last_level is not None

    def level(self, n: int) -> tuple[Formula, ...]:
        if n < self.first_level or (self.last_level is not None and n > self.last_level):
            return ()
        hit = self._levels.get(n)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._levels.get(n)
            if hit is None:
                hit = tuple(self._level_fn(n))
                for f in hit:
                    check_signature(f, self.signature)
                self._levels[n] = hit
        return hit

    def levels_through(self, n: int) -> list[tuple[int, Formula]]:
        """(level, entry) for every entry in levels first..n."""
        out = []
        for k in range(self.first_level, n + 1):
            out.extend((k, f) for f in self.level(k))
        return out

    @property
    def entries(self) -> tuple[Formula, ...]:
        if not self.is_finite:
            raise ValueError("infinite descriptor has no finite entry list")
        return tuple(f for _, f in self.levels_through(self.last_level))

    def __len__(self):
        return len(self.entries)

    def level_depth(self, n: int) -> int:
        if self._level_depth is not None:
            return self._level_depth(n)
        return max((f.depth for f in self.level(n)), default=0)

    def depth_below(self, n: int) -> int:
        """Largest modal depth among entries of levels strictly below ``n``."""
        if n <= self.first_level:
            return 0
        if self._level_depth is not None:
            return self._level_depth(n - 1)
        return max((self.level_depth(k) for k in range(self.first_level, n)), default=0)

    @property
    def representative(self) -> bool:
        return self._determining_level is not None

    def determining_level(self, modal_depth: int) -> int:
        if self._determining_level is None:
            raise ValueError(f"descriptor {self.name!r} is not representative")
        return self._determining_level(modal_depth)


@dataclass(frozen=True)
class WeightFunction:
    """Per-entry weight by level, plus a certified tail bound.

    ``tail_bound(N)`` bounds the total contribution of all levels >= N to any
    distance.  ``level_for_tail`` optionally gives a closed form for the least
    N with ``tail_bound(N) < eps``; ``decreasing`` declares that per-entry
    weights never increase with the level.
    """

    weight: Callable[[int], Fraction]
    tail_bound: Callable[[int], Fraction]
    level_for_tail: Callable[[Fraction], int] | None = None
    decreasing: bool = False
    name: str = "custom"

    @classmethod
    def finite(cls, weights: Sequence, name: str = "custom") -> "WeightFunction":
        ws = tuple(Fraction(v) for v in weights)
        if any(v <= 0 for v in ws):
            raise ValueError("weights must be strictly positive")
        suffix = [Fraction(0)] * (len(ws) + 1)
        for k in range(len(ws) - 1, -1, -1):
            suffix[k] = suffix[k + 1] + ws[k]

        def weight(n):
            return ws[n]

        def tail(n):
            return suffix[min(max(n, 0), len(ws))]

        return cls(weight, tail, name=name)

    def first_level_below(self, eps: Fraction, first_level: int = 0) -> int:
        """Least N >= first_level with tail_bound(N) < eps."""
        eps = Fraction(eps)
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self.level_for_tail is not None:
            return max(first_level, self.level_for_tail(eps))
        if self.tail_bound(first_level) < eps:
            return first_level
        lo, step = first_level, 1
        while self.tail_bound(lo + step) >= eps:
            lo += step
            step *= 2
            if step > 1 << 4096:
                raise ConvergenceError(f"tail bound never drops below {eps}")
        hi = lo + step
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail_bound(mid) < eps:
                hi = mid
            else:
                lo = mid
        return hi

    def min_weight_through(self, first_level: int, level: int) -> Fraction:
        if level < first_level:
            raise ValueError("empty level range")
        if self.decreasing:
            return self.weight(level)
        if level - first_level > MAX_LEVELS:
            raise BudgetExceeded("too many levels to scan for the minimum weight")
        return min(self.weight(k) for k in range(first_level, level + 1))


def _check_pair(x: PointedKripkeModel, y: PointedKripkeModel, D: Descriptor):
    if x.signature != D.signature or y.signature != D.signature:
        raise SignatureError("models and descriptor must share one signature")


def _disagreements(x, y, entries) -> int:
    # entries come from Descriptor.level, which checked their signature
    tx = truth_values(x, entries, checked=True)
    ty = truth_values(y, entries, checked=True)
    return sum(1 for a, b in zip(tx, ty) if a != b)


def distance(
    x: PointedKripkeModel,
    y: PointedKripkeModel,
    D: Descriptor,
    w: WeightFunction,
    tol: Fraction | None = None,
    max_levels: int = MAX_LEVELS,
    threshold: Fraction | None = None,
) -> DistanceInterval:
    """Certified bracket around the weighted disagreement sum of x and y.

    Finite descriptors are summed completely (zero width, ``tol`` ignored).
    Leveled descriptors are summed until the tail bound drops below ``tol``.
    With a ``threshold`` the sum also stops once the bracket lies entirely
    on one side of it; that interval is certified but may be wider than
    ``tol``.
    """
    _check_pair(x, y, D)
    total = Fraction(0)
    if D.is_finite:
        for n in range(D.first_level, D.last_level + 1):
            k = _disagreements(x, y, D.level(n))
            if k:
                total += w.weight(n) * k
        return DistanceInterval(total, total)
    if tol is None or Fraction(tol) <= 0:
        raise ValueError("a positive tolerance is required for an infinite descriptor")
    tol = Fraction(tol)
    n = D.first_level
    while True:
        tail = w.tail_bound(n)
        if tail < tol:
            return DistanceInterval(total, total + tail)
        if threshold is not None and (total >= threshold or total + tail < threshold):
            return DistanceInterval(total, total + tail)
        if n - D.first_level >= max_levels:
            raise ConvergenceError(f"tail bound still {tail} >= {tol} after {max_levels} levels")
        k = _disagreements(x, y, D.level(n))
        if k:
            total += w.weight(n) * k
        n += 1


# ------------------------------------------------------------- quotient


@dataclass(frozen=True)
class ModalSpacePoint:
    class_id: int
    representative: PointedKripkeModel
    members: tuple[PointedKripkeModel, ...]
    truth: tuple[bool, ...] = field(default=())


def truth_vector(x: PointedKripkeModel, entries: Sequence[Formula]) -> tuple[bool, ...]:
    return tuple(truth_values(x, entries))


def quotient(
    models: Sequence[PointedKripkeModel],
    D: Descriptor | Sequence[Formula],
    max_level: int | None = None,
) -> list[ModalSpacePoint]:
    """Group models by their truth vector on the (materialised) descriptor."""
    if not models:
        raise ValueError("cannot quotient an empty list of models")
    if isinstance(D, Descriptor):
        if D.is_finite:
            entries = D.entries
        elif max_level is None:
            raise ValueError("an infinite descriptor needs max_level")
        else:
            entries = [f for _, f in D.levels_through(max_level)]
        sig = D.signature
    else:
        entries = list(D)
        sig = models[0].signature
    if any(x.signature != sig for x in models):
        raise SignatureError("models must share the descriptor's signature")
    groups: dict[tuple[bool, ...], list[PointedKripkeModel]] = {}
    for x in models:
        groups.setdefault(truth_vector(x, entries), []).append(x)
    return [
        ModalSpacePoint(k, members[0], tuple(members), vec)
        for k, (vec, members) in enumerate(groups.items())
    ]


def distance_matrix(points: Sequence[ModalSpacePoint], D: Descriptor, w: WeightFunction) -> list[list[Fraction]]:
    """Exact pairwise distances between representatives (finite descriptor)."""
    if not D.is_finite:
        raise ValueError("exact distance matrices need a finite descriptor")
    n = len(points)
    out = [[Fraction(0)] * n for _ in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        d = distance(points[i].representative, points[j].representative, D, w).lower
        out[i][j] = out[j][i] = d
    return out


# --------------------------------------------------------- named metrics


def hamming_descriptor(sig: Signature, n: int) -> tuple[Descriptor, WeightFunction]:
    """The first n atoms with unit weights."""
    if not 1 <= n <= len(sig.atoms):
        raise ValueError(f"hamming descriptor needs 1 <= n <= {len(sig.atoms)}")
    D = Descriptor.finite([Atom(p) for p in sig.atoms[:n]], sig, check=False, name=f"hamming:{n}")
    return D, WeightFunction.finite([1] * n, name="unit")


def bisim_metric_dB(x: PointedKripkeModel, y: PointedKripkeModel) -> Fraction:
    """0 for bisimilar points, else 1/n for the least n >= 1 where n-bisimilarity fails."""
    n = bisim.first_difference(x, y)
    if n is None:
        return Fraction(0)
    return Fraction(1, max(n, 1))


def goranko_metric_dg(x: PointedKripkeModel, y: PointedKripkeModel) -> Fraction:
    """0 for bisimilar points, else 1/(n+1) for the least depth n where theories differ."""
    n = bisim.first_difference(x, y)
    if n is None:
        return Fraction(0)
    return Fraction(1, n + 1)


def b_weight(n: int) -> Fraction:
    return Fraction(1, 2) * (Fraction(1, n) - Fraction(1, n + 1))


def bisim_weights() -> WeightFunction:
    """b-weights: level n >= 1 entries weigh (1/n - 1/(n+1)) / 2.

    At most two entries per level can be disagreed on (level-n entries are
    mutually exclusive), so the tail from level N telescopes to 1/N.
    """
    return WeightFunction(
        weight=b_weight,
        tail_bound=lambda n: Fraction(1, max(n, 1)),
        level_for_tail=lambda eps: int(1 / Fraction(eps)) + 1,
        decreasing=True,
        name="b",
    )


def bisim_descriptor_b(sig: Signature, models: Sequence[PointedKripkeModel]) -> tuple[Descriptor, WeightFunction]:
    """Characteristic formulas of the n-bisimulation classes realised in ``models``.

    Level n >= 1 holds one characteristic formula per n-class, built from the
    first model of each class.
    """
    models = list(models)
    if not models:
        raise ValueError("need at least one model")
    if any(x.signature != sig for x in models):
        raise SignatureError("models must share the signature")
    # one builder for all models, so equal classes share formula objects
    builder = bisim.shared_characteristic_builder(models)
    refinement = builder.refinement
    lock = threading.Lock()

    def level(n: int):
        reps: dict[int, PointedKripkeModel] = {}
        for x in models:
            reps.setdefault(refinement.block(x, n), x)
        with lock:
            return [builder.formula(x, n) for x in reps.values()]

    D = Descriptor(
        sig,
        level,
        first_level=1,
        level_depth=lambda n: n,
        determining_level=lambda m: max(m, 1),
        name="bisim",
    )
    return D, bisim_weights()


# ------------------------------------------------------ close to home


def close_to_home_weights(sig: Signature) -> WeightFunction:
    """c-weights over propositions grouped by shallowest modal depth.

    A level-n entry weighs 1 / (|D_n| * prod_{k<n} |D_k| * 2^n), so level n
    carries total weight 2^-n / prod_{k<n} |D_k|.
    """
    sizes: list[int] = []  # |D_0|, |D_1|, ... as far as representable

    def size(k: int) -> int:
        while len(sizes) <= k:
            sizes.append(bisim.count_depth_propositions(sig, len(sizes)))
        return sizes[k]

    def prod_below(n: int) -> int:
        out = 1
        for k in range(n):
            out *= size(k)
        return out

    def weight(n: int) -> Fraction:
        return Fraction(1, size(n) * prod_below(n) * 2**n)

    def tail(n: int) -> Fraction:
        # levels >= n contribute at most sum_{m>=n} 2^-m / prod_{k<m}|D_k|
        # <= 2^(1-n) / prod_{k<n}|D_k|; past the representable counts fall
        # back to the bound at the last computable level (still an upper bound)
        m = n
        while m > 0:
            try:
                return Fraction(2, 2**m * prod_below(m))
            except BudgetExceeded:
                m -= 1
        return Fraction(2)

    return WeightFunction(weight=weight, tail_bound=tail, decreasing=True, name="c")


def close_to_home_descriptor(sig: Signature, budget: int = bisim.DEFAULT_BUDGET) -> tuple[Descriptor, WeightFunction]:
    """All K-propositions, level n holding those of shallowest depth n.

    Each proposition is a set of n-types; its entry is the disjunction of the
    types' characteristic formulas.  Levels are materialised only while the
    number of type sets stays within ``budget``.
    """

    def level(n: int):
        types = bisim.enumerate_n_types(sig, n, budget)
        if len(types) >= budget.bit_length():
            raise BudgetExceeded(f"level {n} holds 2^{len(types)} propositions, over budget {budget}")
        formulas = [bisim.type_formula(t, sig) for t in types]
        out = []
        for mask in range(1 << len(types)):
            chosen = frozenset(t for k, t in enumerate(types) if mask >> k & 1)
            if n > 0 and bisim.is_saturated(chosen, types, n - 1):
                continue
            out.append(disj(f for k, f in enumerate(formulas) if mask >> k & 1))
        return out

    D = Descriptor(
        sig,
        level,
        first_level=0,
        level_depth=lambda n: n,
        determining_level=lambda m: m,
        name="depth",
    )
    return D, close_to_home_weights(sig)


# ------------------------------------------------------------- embedding


def validate_metric(points: Sequence[str], d: Mapping[tuple[str, str], Fraction]) -> None:
    """Raise ConditionError unless ``d`` is a metric on ``points``."""
    for x in points:
        if d[(x, x)] != 0:
            raise ConditionError(f"d({x},{x}) = {d[(x, x)]} is not zero")
    for x, y in itertools.permutations(points, 2):
        if d[(x, y)] != d[(y, x)]:
            raise ConditionError(f"d({x},{y}) != d({y},{x})")
        if d[(x, y)] <= 0:
            raise ConditionError(f"d({x},{y}) = {d[(x, y)]} is not positive")
    for x, y, z in itertools.permutations(points, 3):
        if d[(x, z)] > d[(x, y)] + d[(y, z)]:
            raise ConditionError(f"triangle inequality fails for {x},{y},{z}")


def _as_distance_map(points: Sequence[str], d) -> dict[tuple[str, str], Fraction]:
    out: dict[tuple[str, str], Fraction] = {}
    if isinstance(d, Mapping):
        for (x, y), v in d.items():
            v = Fraction(v)
            for key in ((x, y), (y, x)):
                if key in out and out[key] != v:
                    raise ConditionError(f"d{key} given twice with different values")
            out[(x, y)] = v
            out.setdefault((y, x), v)
    else:
        rows = list(d)
        for i, x in enumerate(points):
            for j, y in enumerate(points):
                out[(x, y)] = Fraction(rows[i][j])
    for x in points:
        out.setdefault((x, x), Fraction(0))
    missing = [(x, y) for x in points for y in points if (x, y) not in out]
    if missing:
        raise ConditionError(f"no distance given for {missing[0]}")
    return out


@dataclass(frozen=True)
class FiniteEmbedding:
    """Weighted membership propositions reproducing a finite metric up to +c.

    Propositions are given by their extensions: ``frozenset({x})`` is true
    only at x, ``frozenset({x, y})`` at x and y.
    """

    points: tuple[str, ...]
    propositions: tuple[frozenset[str], ...]
    weights: Mapping[frozenset[str], Fraction]
    c: Fraction
    metric: Mapping[tuple[str, str], Fraction]

    def distance(self, x: str, y: str) -> Fraction:
        return sum(
            (self.weights[prop] for prop in self.propositions if (x in prop) != (y in prop)),
            Fraction(0),
        )

    def table(self) -> list[tuple[str, str, Fraction, Fraction, Fraction]]:
        """(x, y, d, d_w, d_w - d) for each unordered pair."""
        rows = []
        for x, y in itertools.combinations(self.points, 2):
            dw = self.distance(x, y)
            rows.append((x, y, self.metric[(x, y)], dw, dw - self.metric[(x, y)]))
        return rows


def embed_finite_space(point_ids: Sequence[str], d) -> FiniteEmbedding:
    """Descriptor and weights whose distance is ``d`` shifted by a constant.

    ``d`` is a mapping ``(x, y) -> value`` (one orientation per pair is
    enough) or a square matrix in ``point_ids`` order.
    """
    points = tuple(point_ids)
    if len(set(points)) != len(points):
        raise ConditionError("duplicate point ids")
    if len(points) < 3:
        raise ConditionError("need at least 3 points (with 2, the singleton weights vanish)")
    dist = _as_distance_map(points, d)
    validate_metric(points, dist)
    off_diagonal = [(x, y) for x in points for y in points if x != y]
    levels = sorted({dist[p] for p in off_diagonal})
    top = levels[-1]

    def term(pair):
        return (1 + top - dist[pair]) / 4

    weights: dict[frozenset[str], Fraction] = {}
    for x in points:
        weights[frozenset({x})] = sum((term(p) for p in off_diagonal if x not in p), Fraction(0))
    for x, y in itertools.combinations(points, 2):
        weights[frozenset({x, y})] = 2 * term((x, y))
    a = sum((term(p) for p in off_diagonal), Fraction(0))
    c = 2 * a - 1 - top
    props = tuple(frozenset({x}) for x in points) + tuple(
        frozenset(pair) for pair in itertools.combinations(points, 2)
    )
    return FiniteEmbedding(points, props, weights, c, dist)


# -------------------------------------------------------- descriptor file


@dataclass(frozen=True)
class DescriptorFile:
    metric: str | None
    formulas: tuple[Formula, ...]
    weights: tuple[Fraction | None, ...]


def loads_descriptor(text: str, sig: Signature) -> DescriptorFile:
    """Parse ``formula [@ weight]`` lines with an optional ``metric:`` header."""
    metric = None
    formulas, weights = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("metric:"):
            metric = line.partition(":")[2].strip()
            continue
        body, at, weight = line.partition("@")
        formulas.append(parse(body, sig))
        if at:
            try:
                value = Fraction(weight.strip())
            except (ValueError, ZeroDivisionError) as exc:
                raise FormulaSyntaxError(f"line {lineno}: bad weight {weight.strip()!r}") from exc
            if value <= 0:
                raise FormulaSyntaxError(f"line {lineno}: weights must be positive")
            weights.append(value)
        else:
            weights.append(None)
    return DescriptorFile(metric, tuple(formulas), tuple(weights))


def descriptor_from_file(df: DescriptorFile, sig: Signature, budget: int = bisim.DEFAULT_BUDGET):
    """Finite descriptor and weights; entries without ``@`` weigh 1."""
    D = Descriptor.finite(df.formulas, sig, budget=budget)
    w = WeightFunction.finite([1 if v is None else v for v in df.weights])
    return D, w
