"""Random and exhaustive instance generators for tests and experiments.

Every function takes an explicit ``random.Random`` so runs are reproducible.
"""
from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Iterator

from .dynamics import ActionModel
from .formula import (
    TOP,
    And,
    Atom,
    Box,
    ConjunctiveClause,
    Diamond,
    Formula,
    Implies,
    Neg,
    Or,
    Signature,
)
from .kripke import KripkeModel, PointedKripkeModel, make_model


def random_model(rng: random.Random, sig: Signature, max_states: int = 4, edge_prob: float = 0.35) -> PointedKripkeModel:
    n = rng.randint(1, max_states)
    states = [f"s{k}" for k in range(n)]
    rel = {
        a: [(s, t) for s in states for t in states if rng.random() < edge_prob]
        for a in sig.agents
    }
    val = {p: [s for s in states if rng.random() < 0.5] for p in sig.atoms}
    return make_model(sig, states, rel, val, point=rng.choice(states))


def random_formula(rng: random.Random, sig: Signature, depth: int = 2, size: int = 4) -> Formula:
    """A random formula of modal depth at most ``depth``, roughly ``size`` connectives."""
    if size <= 0 or (depth == 0 and rng.random() < 0.3):
        return TOP if rng.random() < 0.1 else Atom(rng.choice(sig.atoms))
    kinds = ["neg", "and", "or", "imp"] + (["box", "dia"] * 2 if depth > 0 else [])
    kind = rng.choice(kinds)
    if kind == "neg":
        return Neg(random_formula(rng, sig, depth, size - 1))
    if kind in ("box", "dia"):
        node = Box if kind == "box" else Diamond
        return node(rng.choice(sig.agents), random_formula(rng, sig, depth - 1, size - 1))
    k = rng.randint(0, size - 1)
    left = random_formula(rng, sig, depth, k)
    right = random_formula(rng, sig, depth, size - 1 - k)
    return {"and": And, "or": Or, "imp": Implies}[kind](left, right)


def random_weights(rng: random.Random, n: int, max_den: int = 16) -> list[Fraction]:
    return [Fraction(rng.randint(1, max_den), rng.randint(1, max_den)) for _ in range(n)]


def random_clause(rng: random.Random, sig: Signature) -> ConjunctiveClause:
    pos, neg = set(), set()
    for p in sig.atoms:
        r = rng.random()
        if r < 0.25:
            pos.add(p)
        elif r < 0.5:
            neg.add(p)
    return ConjunctiveClause(frozenset(pos), frozenset(neg))


def random_action_model(rng: random.Random, sig: Signature, extra: int = 2, depth: int = 1) -> ActionModel:
    """Deterministic and exhaustive everywhere: the designated pair is {phi, ~phi}."""
    phi = random_formula(rng, sig, depth, 2)
    names = ["d0", "d1"] + [f"e{k}" for k in range(rng.randint(0, extra))]
    pre = {"d0": phi, "d1": Neg(phi)}
    for s in names[2:]:
        pre[s] = random_formula(rng, sig, depth, 2)
    post = {s: random_clause(rng, sig) for s in names}
    rel = {a: frozenset((s, t) for s in names for t in names if rng.random() < 0.4) for a in sig.agents}
    return ActionModel(sig, tuple(names), rel, pre, post, ("d0", "d1"))


def bisimilar_copy(rng: random.Random, x: PointedKripkeModel) -> PointedKripkeModel:
    """Blow each state up into 1-2 copies; copy i of s relates to copy j of s."""
    m = x.model
    copies = {s: [f"{s}_{k}" for k in range(rng.randint(1, 2))] for s in m.states}
    rel = {}
    for a, pairs in m.relations.items():
        edges = []
        for s, t in pairs:
            for c in copies[s]:
                # every copy of s must reach at least one copy of t
                targets = [d for d in copies[t] if rng.random() < 0.7] or [rng.choice(copies[t])]
                edges.extend((c, d) for d in targets)
        rel[a] = edges
    val = {p: [c for s in v for c in copies[s]] for p, v in m.valuation.items()}
    states = [c for s in m.states for c in copies[s]]
    return make_model(m.signature, states, rel, val, point=rng.choice(copies[x.point]))


def random_metric_space(rng: random.Random, n: int, max_den: int = 8, max_num: int = 24) -> tuple[list[str], dict]:
    """Random rational metric: random edge lengths closed under shortest paths."""
    points = [f"x{k}" for k in range(n)]
    d = {(x, y): Fraction(0) for x in points for y in points if x == y}
    for x, y in itertools.combinations(points, 2):
        d[(x, y)] = d[(y, x)] = Fraction(rng.randint(1, max_num), rng.randint(1, max_den))
    for z in points:
        for x in points:
            for y in points:
                if d[(x, z)] + d[(z, y)] < d[(x, y)]:
                    d[(x, y)] = d[(x, z)] + d[(z, y)]
    return points, {(x, y): d[(x, y)] for x, y in itertools.combinations(points, 2)}


def all_models(sig: Signature, max_states: int) -> Iterator[KripkeModel]:
    """Every model with states s0..s{n-1}, 1 <= n <= max_states (not up to isomorphism)."""
    for n in range(1, max_states + 1):
        states = [f"s{k}" for k in range(n)]
        pairs = [(s, t) for s in states for t in states]
        rel_choices = [list(itertools.product((0, 1), repeat=len(pairs)))] * len(sig.agents)
        val_choices = list(itertools.product((0, 1), repeat=n * len(sig.atoms)))
        for rels in itertools.product(*rel_choices):
            relations = {
                a: frozenset(p for p, bit in zip(pairs, bits) if bit) for a, bits in zip(sig.agents, rels)
            }
            for vbits in val_choices:
                val = {
                    p: frozenset(s for k, s in enumerate(states) if vbits[i * n + k])
                    for i, p in enumerate(sig.atoms)
                }
                yield KripkeModel(sig, tuple(states), relations, val)


def all_pointed_models(sig: Signature, max_states: int) -> Iterator[PointedKripkeModel]:
    for m in all_models(sig, max_states):
        for s in m.states:
            yield PointedKripkeModel(m, s)
