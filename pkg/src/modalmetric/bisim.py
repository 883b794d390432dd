"""n-bisimulation by partition refinement, characteristic formulas, n-types.

All counting and equivalence here is relative to the class of *all* pointed
Kripke models over a finite signature (the logic K).
"""
from __future__ import annotations

import itertools
import threading
import weakref
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .errors import BudgetExceeded, SignatureError
from .formula import (
    And,
    Atom,
    Box,
    Diamond,
    Formula,
    Implies,
    Neg,
    Or,
    Signature,
    Top,
    conj,
    disj,
    iff,
)
from .kripke import KripkeModel, PointedKripkeModel, make_model
from .tableau import k_satisfiable

DEFAULT_BUDGET = 10_000
# refuse to materialise integers wider than this many bits
_MAX_COUNT_BITS = 1 << 20


def _same_signature(models: Sequence[PointedKripkeModel]) -> Signature:
    sig = models[0].signature
    for x in models[1:]:
        if x.signature != sig:
            raise SignatureError("models have different signatures")
    return sig


# ------------------------------------------------------------ refinement


class RefinementSequence:
    """Partition refinement over the disjoint union of some Kripke models.

    ``levels[k][g]`` is the block id of global state ``g`` at level ``k``.
    Level 0 groups states by valuation; level k+1 splits by the set of
    level-k blocks reachable per agent.  Levels are computed on demand and
    the sequence is marked stable once a level repeats.
    """

    def __init__(self, models: Sequence[KripkeModel]):
        uniq: list[KripkeModel] = []
        seen = set()
        for m in models:
            if id(m) not in seen:
                seen.add(id(m))
                uniq.append(m)
        if not uniq:
            raise ValueError("no models to refine")
        sig = uniq[0].signature
        if any(m.signature != sig for m in uniq):
            raise SignatureError("models have different signatures")
        self.signature = sig
        self.models = uniq
        self.index: dict[tuple[int, str], int] = {}
        for mi, m in enumerate(uniq):
            for s in m.states:
                self.index[(id(m), s)] = len(self.index)
        self._succ: list[list[tuple[int, ...]]] = []
        self._val: list[tuple[bool, ...]] = []
        for m in uniq:
            for s in m.states:
                self._val.append(tuple(s in m.valuation[p] for p in sig.atoms))
                self._succ.append(
                    [tuple(self.index[(id(m), t)] for t in m.successors[a][s]) for a in sig.agents]
                )
        ids: dict = {}
        self.levels: list[tuple[int, ...]] = [tuple(ids.setdefault(v, len(ids)) for v in self._val)]
        self.block_counts = [len(ids)]
        self.stable = False

    @property
    def size(self) -> int:
        return len(self._val)

    def _step(self) -> None:
        prev = self.levels[-1]
        ids: dict = {}
        new = tuple(
            ids.setdefault(
                (prev[g], tuple(frozenset(prev[h] for h in succ) for succ in self._succ[g])),
                len(ids),
            )
            for g in range(self.size)
        )
        if len(ids) == self.block_counts[-1]:
            self.stable = True
        self.levels.append(new)
        self.block_counts.append(len(ids))

    def level(self, n: int | None = None) -> tuple[int, ...]:
        """Blocks at level ``n``; ``None`` means the stable partition."""
        if n is None:
            while not self.stable:
                self._step()
            return self.levels[-1]
        while len(self.levels) <= n and not self.stable:
            self._step()
        return self.levels[min(n, len(self.levels) - 1)]

    def block(self, x: PointedKripkeModel, n: int | None = None) -> int:
        return self.level(n)[self.index[(id(x.model), x.point)]]

    def stable_level(self) -> int:
        """Least level from which the partition no longer changes."""
        self.level(None)
        k = len(self.levels) - 1
        while k > 0 and self.block_counts[k - 1] == self.block_counts[k]:
            k -= 1
        return k


def refine(models: Sequence[PointedKripkeModel]) -> RefinementSequence:
    return RefinementSequence([x.model for x in models])


def are_n_bisimilar(x: PointedKripkeModel, y: PointedKripkeModel, n: int) -> bool:
    _same_signature([x, y])
    r = refine([x, y])
    return r.block(x, n) == r.block(y, n)


def are_bisimilar(x: PointedKripkeModel, y: PointedKripkeModel) -> bool:
    _same_signature([x, y])
    r = refine([x, y])
    return r.block(x) == r.block(y)


def first_difference(x: PointedKripkeModel, y: PointedKripkeModel) -> int | None:
    """Least n with x, y not n-bisimilar, or None when they are bisimilar."""
    _same_signature([x, y])
    r = refine([x, y])
    n = 0
    while True:
        if r.block(x, n) != r.block(y, n):
            return n
        if r.stable and n >= len(r.levels) - 1:
            return None
        n += 1


def bisim_classes(models: Sequence[PointedKripkeModel], n: int | None = None) -> list[int]:
    """Class index per model under n-bisimilarity (full bisimilarity if n is None).

    Class indices are assigned in order of first appearance.
    """
    if not models:
        return []
    _same_signature(list(models))
    r = refine(models)
    ids: dict[int, int] = {}
    return [ids.setdefault(r.block(x, n), len(ids)) for x in models]


# ------------------------------------------------ characteristic formulas


def _literals(sig: Signature, true_atoms) -> list[Formula]:
    return [Atom(p) if p in true_atoms else Neg(Atom(p)) for p in sig.atoms]


class _CharacteristicBuilder:
    """Memoised characteristic formulas for every state of some models.

    States in the same level-k refinement block share one formula object, so
    formulas for consecutive depths share subterms, and so do formulas for
    bisimilar states of different models.
    """

    def __init__(self, models: Sequence[KripkeModel]):
        self.refinement = RefinementSequence(models)
        self.models = self.refinement.models
        self.memo: dict[tuple[int, int], Formula] = {}
        self.built = -1

    def _block(self, model: KripkeModel, s: str, k: int) -> int:
        r = self.refinement
        return r.level(k)[r.index[(id(model), s)]]

    def _phi(self, model: KripkeModel, s: str, k: int) -> Formula:
        key = (k, self._block(model, s, k))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        sig = model.signature
        parts = _literals(sig, model.true_atoms(s))
        if k > 0:
            for a in sig.agents:
                reps = {}
                for t in model.successors[a][s]:
                    reps.setdefault(self._block(model, t, k - 1), t)
                subs = [self.memo[(k - 1, b)] for b in sorted(reps)]
                parts.extend(Diamond(a, g) for g in subs)
                parts.append(Box(a, disj(subs)))
        out = conj(parts)
        self.memo[key] = out
        return out

    def formula(self, x: PointedKripkeModel, n: int) -> Formula:
        # bottom-up, so the recursion never goes deeper than one level
        for k in range(self.built + 1, n + 1):
            for m in self.models:
                for t in m.states:
                    self._phi(m, t, k)
        self.built = max(self.built, n)
        return self._phi(x.model, x.point, n)


_BUILDERS: "weakref.WeakKeyDictionary[KripkeModel, _CharacteristicBuilder]" = weakref.WeakKeyDictionary()
_BUILDERS_LOCK = threading.Lock()


def characteristic_formula(x: PointedKripkeModel, n: int) -> Formula:
    """A depth-n formula true exactly in the models n-bisimilar to ``x``.

    Depth 0 is the conjunction of the literals true at the point; depth k+1
    adds, per agent, a diamond for each successor's depth-k formula and a box
    over their disjunction (empty disjunction = ~T).
    """
    with _BUILDERS_LOCK:
        builder = _BUILDERS.get(x.model)
        if builder is None:
            builder = _BUILDERS[x.model] = _CharacteristicBuilder([x.model])
        return builder.formula(x, n)


def shared_characteristic_builder(models: Sequence[PointedKripkeModel]) -> _CharacteristicBuilder:
    """A builder whose formulas are shared by all the given models.

    ``builder.formula(x, n)`` accepts any pointed model over one of them and
    returns the same object for n-bisimilar points.  Not thread-safe.
    """
    _same_signature(list(models))
    return _CharacteristicBuilder([x.model for x in models])


# ----------------------------------------------------------------- types


@dataclass(frozen=True)
class NType:
    """Canonical depth-n bisimulation type over the class of all models.

    ``successors[i]`` is the set of (depth-1) types reachable via the i-th
    agent of the signature; empty tuple at depth 0.
    """

    depth: int
    valuation: frozenset[str]
    successors: tuple[frozenset["NType"], ...] = ()


def count_n_types(sig: Signature, n: int) -> int:
    """t_0 = 2^|atoms|, t_{k+1} = 2^|atoms| * 2^(t_k * |agents|)."""
    na, ni = len(sig.atoms), len(sig.agents)
    t = 1 << na
    for _ in range(n):
        bits = t * ni
        if bits > _MAX_COUNT_BITS:
            raise BudgetExceeded(f"number of {n}-types is too large to represent")
        t = (1 << na) << bits
    return t


def types_within_budget(sig: Signature, n: int, budget: int = DEFAULT_BUDGET) -> bool:
    na, ni = len(sig.atoms), len(sig.agents)
    t = 1 << na
    if t > budget:
        return False
    for _ in range(n):
        if t * ni + na > budget.bit_length():
            return False
        t = (1 << na) << (t * ni)
        if t > budget:
            return False
    return True


def count_depth_propositions(sig: Signature, n: int) -> int:
    """Number of K-propositions whose shallowest representative has depth n."""
    if n == 0:
        return 1 << count_n_types(sig, 0)
    hi, lo = count_n_types(sig, n), count_n_types(sig, n - 1)
    if hi > _MAX_COUNT_BITS:
        raise BudgetExceeded(f"|D_{n}| = 2^{hi} - 2^{lo} is too large to represent")
    return (1 << hi) - (1 << lo)


def enumerate_n_types(sig: Signature, n: int, budget: int = DEFAULT_BUDGET) -> list[NType]:
    if not types_within_budget(sig, n, budget):
        raise BudgetExceeded(f"enumerating {n}-types over {sig} exceeds budget {budget}")
    return list(_enumerate(sig, n))


@lru_cache(maxsize=None)
def _enumerate(sig: Signature, n: int) -> tuple[NType, ...]:
    valuations = [
        frozenset(p for p, bit in zip(sig.atoms, bits) if bit)
        for bits in itertools.product((False, True), repeat=len(sig.atoms))
    ]
    if n == 0:
        return tuple(NType(0, v) for v in valuations)
    below = _enumerate(sig, n - 1)
    subsets = [
        frozenset(t for t, bit in zip(below, bits) if bit)
        for bits in itertools.product((False, True), repeat=len(below))
    ]
    return tuple(
        NType(n, v, succ)
        for v in valuations
        for succ in itertools.product(subsets, repeat=len(sig.agents))
    )


@lru_cache(maxsize=None)
def truncate(t: NType, m: int) -> NType:
    """The m-type refined by ``t`` (m <= t.depth)."""
    if m > t.depth:
        raise ValueError("cannot truncate to a larger depth")
    if m == t.depth:
        return t
    if m == 0:
        return NType(0, t.valuation)
    return NType(m, t.valuation, tuple(frozenset(truncate(u, m - 1) for u in s) for s in t.successors))


def type_of(x: PointedKripkeModel, n: int) -> NType:
    model = x.model
    sig = model.signature
    memo: dict[tuple[str, int], NType] = {}

    def go(s: str, k: int) -> NType:
        key = (s, k)
        hit = memo.get(key)
        if hit is None:
            val = model.true_atoms(s)
            if k == 0:
                hit = NType(0, val)
            else:
                hit = NType(
                    k,
                    val,
                    tuple(frozenset(go(t, k - 1) for t in model.successors[a][s]) for a in sig.agents),
                )
            memo[key] = hit
        return hit

    return go(x.point, n)


def type_satisfies(t: NType, f: Formula, sig: Signature, _memo: dict | None = None) -> bool:
    """Evaluate ``f`` on a type; requires modal_depth(f) <= t.depth."""
    memo = {} if _memo is None else _memo
    agent_pos = {a: k for k, a in enumerate(sig.agents)}

    def go(u: NType, g: Formula) -> bool:
        key = (u, g)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(g, Top):
            out = True
        elif isinstance(g, Atom):
            out = g.name in u.valuation
        elif isinstance(g, Neg):
            out = not go(u, g.child)
        elif isinstance(g, And):
            out = go(u, g.left) and go(u, g.right)
        elif isinstance(g, Or):
            out = go(u, g.left) or go(u, g.right)
        elif isinstance(g, Implies):
            out = (not go(u, g.left)) or go(u, g.right)
        else:
            if g.depth > u.depth:
                raise ValueError("formula deeper than type")
            succ = u.successors[agent_pos[g.agent]]
            if isinstance(g, Box):
                out = all(go(v, g.child) for v in succ)
            else:
                out = any(go(v, g.child) for v in succ)
        memo[key] = out
        return out

    return go(t, f)


def type_set(f: Formula, sig: Signature, n: int | None = None, budget: int = DEFAULT_BUDGET) -> frozenset[NType]:
    """The n-types (default n = modal depth of f) whose models satisfy ``f``."""
    n = f.depth if n is None else n
    memo: dict = {}
    return frozenset(t for t in enumerate_n_types(sig, n, budget) if type_satisfies(t, f, sig, memo))


def is_saturated(types: frozenset[NType], universe: Sequence[NType], m: int) -> bool:
    """Is ``types`` a union of blocks of the "same m-type" partition of ``universe``?"""
    verdict: dict[NType, bool] = {}
    for t in universe:
        key = truncate(t, m)
        inside = t in types
        if verdict.setdefault(key, inside) != inside:
            return False
    return True


def shallowest_depth(f: Formula, sig: Signature, budget: int = DEFAULT_BUDGET) -> int:
    """Least modal depth of any formula K-equivalent to ``f``."""
    n = f.depth
    universe = enumerate_n_types(sig, n, budget)
    sat = type_set(f, sig, n, budget)
    for m in range(n + 1):
        if is_saturated(sat, universe, m):
            return m
    return n  # pragma: no cover - m = n always saturates


@lru_cache(maxsize=None)
def type_formula(t: NType, sig: Signature) -> Formula:
    """Characteristic formula of an n-type."""
    parts = _literals(sig, t.valuation)
    for a, succ in zip(sig.agents, t.successors):
        subs = [type_formula(u, sig) for u in sorted(succ, key=_type_key)]
        parts.extend(Diamond(a, g) for g in subs)
        parts.append(Box(a, disj(subs)))
    return conj(parts)


def _type_key(t: NType):
    return (t.depth, sorted(t.valuation), tuple(sorted(_type_key(u) for u in s) for s in t.successors))


def type_model(t: NType, sig: Signature) -> PointedKripkeModel:
    """Unfold a type into a finite tree model whose root realises it."""
    states: list[str] = []
    rel: dict[str, list] = {a: [] for a in sig.agents}
    val: dict[str, list] = {p: [] for p in sig.atoms}

    def build(u: NType) -> str:
        s = f"w{len(states)}"
        states.append(s)
        for p in u.valuation:
            val[p].append(s)
        for a, succ in zip(sig.agents, u.successors):
            for v in sorted(succ, key=_type_key):
                rel[a].append((s, build(v)))
        return s

    root = build(t)
    return make_model(sig, states, rel, val, point=root)


# ------------------------------------------------- semantic equivalence


def is_consistent(f: Formula, sig: Signature, budget: int = DEFAULT_BUDGET) -> bool:
    """Satisfiable in some model: type-sets when enumerable, tableau otherwise."""
    if types_within_budget(sig, f.depth, budget):
        return bool(type_set(f, sig, budget=budget))
    return k_satisfiable(f)


def equivalent(f: Formula, g: Formula, sig: Signature, budget: int = DEFAULT_BUDGET) -> bool:
    n = max(f.depth, g.depth)
    if types_within_budget(sig, n, budget):
        return type_set(f, sig, n, budget) == type_set(g, sig, n, budget)
    return not k_satisfiable(Neg(iff(f, g)))


def dedupe_formulas(formulas: Sequence[Formula], sig: Signature, budget: int = DEFAULT_BUDGET) -> list[Formula]:
    """Keep the first formula of every K-equivalence class, in order."""
    kept: list[Formula] = []
    for f in formulas:
        if not any(equivalent(f, g, sig, budget) for g in kept):
            kept.append(f)
    return kept

