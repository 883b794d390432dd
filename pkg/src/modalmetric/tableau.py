"""Satisfiability in the minimal normal modal logic K by a labelled tableau.

Used as the decision procedure for equivalence and consistency when the
n-type enumeration would blow the budget (two atoms at depth 2 already give
4 * 2**64 types).  The procedure is the textbook one: saturate the
propositional part, branch on disjunctions, then open one successor per
diamond carrying the bodies of all boxes for that agent.
"""
from __future__ import annotations

from .formula import And, Box, Diamond, Formula, Neg, Or, Top, nnf


def _closed(lits: frozenset[Formula]) -> bool:
    for f in lits:
        if isinstance(f, Neg):
            if isinstance(f.child, Top) or f.child in lits:
                return True
    return False


def _sat(todo: tuple[Formula, ...], memo: dict) -> bool:
    key = frozenset(todo)
    hit = memo.get(key)
    if hit is not None:
        return hit
    # propositional saturation with explicit branching
    stack = [(list(key), frozenset())]
    result = False
    while stack and not result:
        pending, done = stack.pop()
        while pending:
            f = pending.pop()
            if f in done:
                continue
            if isinstance(f, And):
                pending.extend((f.left, f.right))
            elif isinstance(f, Or):
                stack.append((pending + [f.right], done))
                pending.append(f.left)
            elif isinstance(f, Top):
                continue
            else:
                done = done | {f}
        if _closed(done):
            continue
        ok = True
        for f in done:
            if isinstance(f, Diamond):
                bodies = [g.child for g in done if isinstance(g, Box) and g.agent == f.agent]
                if not _sat(tuple([f.child] + bodies), memo):
                    ok = False
                    break
        result = ok
    memo[key] = result
    return result


def k_satisfiable(f: Formula) -> bool:
    """Is ``f`` satisfiable in some pointed Kripke model?"""
    return _sat((nnf(f),), {})


def k_valid(f: Formula) -> bool:
    return not k_satisfiable(Neg(f))

