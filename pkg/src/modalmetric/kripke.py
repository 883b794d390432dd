"""Finite Kripke models, satisfaction, and the line-oriented model file format."""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .errors import FormulaSyntaxError, SignatureError
from .formula import (
    IDENT_RE,
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
    check_signature,
)


@dataclass(frozen=True, eq=False)
class KripkeModel:
    """A finite Kripke model.  Compared and hashed by identity."""

    signature: Signature
    states: tuple[str, ...]
    relations: Mapping[str, frozenset[tuple[str, str]]] = field(default_factory=dict)
    valuation: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        states = tuple(self.states)
        if not states:
            raise ValueError("a Kripke model needs at least one state")
        if len(set(states)) != len(states):
            raise ValueError("duplicate state ids")
        known = set(states)
        sig = self.signature
        rel = {}
        for agent, pairs in self.relations.items():
            if agent not in sig.agents:
                raise SignatureError(f"relation for undeclared agent {agent!r}")
            pairs = frozenset((s, t) for s, t in pairs)
            for s, t in pairs:
                if s not in known or t not in known:
                    raise ValueError(f"relation {agent}: {s}->{t} mentions unknown state")
            rel[agent] = pairs
        for agent in sig.agents:
            rel.setdefault(agent, frozenset())
        val = {}
        for atom, members in self.valuation.items():
            if atom not in sig.atoms:
                raise SignatureError(f"valuation for undeclared atom {atom!r}")
            members = frozenset(members)
            if not members <= known:
                raise ValueError(f"valuation of {atom} mentions unknown states")
            val[atom] = members
        for atom in sig.atoms:
            val.setdefault(atom, frozenset())
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "relations", rel)
        object.__setattr__(self, "valuation", val)

    @cached_property
    def successors(self) -> dict[str, dict[str, tuple[str, ...]]]:
        """agent -> state -> successor states (in state order)."""
        order = {s: k for k, s in enumerate(self.states)}
        out = {}
        for agent, pairs in self.relations.items():
            table = {s: [] for s in self.states}
            for s, t in pairs:
                table[s].append(t)
            out[agent] = {s: tuple(sorted(ts, key=order.__getitem__)) for s, ts in table.items()}
        return out

    @cached_property
    def all_states(self) -> frozenset[str]:
        return frozenset(self.states)

    def true_atoms(self, state: str) -> frozenset[str]:
        return frozenset(p for p in self.signature.atoms if state in self.valuation[p])

    def at(self, point: str) -> "PointedKripkeModel":
        return PointedKripkeModel(self, point)


@dataclass(frozen=True)
class PointedKripkeModel:
    model: KripkeModel
    point: str

    def __post_init__(self):
        if self.point not in self.model.all_states:
            raise ValueError(f"point {self.point!r} is not a state of the model")

    @property
    def signature(self) -> Signature:
        return self.model.signature


def make_model(
    sig: Signature,
    states: Iterable[str],
    relations: Mapping[str, Iterable[tuple[str, str]]] | None = None,
    valuation: Mapping[str, Iterable[str]] | None = None,
    point: str | None = None,
):
    """Convenience constructor; returns a pointed model when ``point`` is given."""
    m = KripkeModel(
        sig,
        tuple(states),
        {a: frozenset(p) for a, p in (relations or {}).items()},
        {q: frozenset(v) for q, v in (valuation or {}).items()},
    )
    return m if point is None else PointedKripkeModel(m, point)


# ---------------------------------------------------------- satisfaction

_LABELS: "weakref.WeakKeyDictionary[KripkeModel, dict[Formula, frozenset[str]]]" = (
    weakref.WeakKeyDictionary()
)


def _children(g: Formula):
    if isinstance(g, Neg):
        return (g.child,)
    if isinstance(g, (And, Or, Implies)):
        return (g.left, g.right)
    if isinstance(g, (Box, Diamond)):
        return (g.child,)
    return ()


def _label(model: KripkeModel, g: Formula, done: dict) -> frozenset[str]:
    everything = model.all_states
    if isinstance(g, Top):
        return everything
    if isinstance(g, Atom):
        return model.valuation[g.name]
    if isinstance(g, Neg):
        return everything - done[g.child]
    if isinstance(g, And):
        return done[g.left] & done[g.right]
    if isinstance(g, Or):
        return done[g.left] | done[g.right]
    if isinstance(g, Implies):
        return (everything - done[g.left]) | done[g.right]
    inner = done[g.child]
    succ = model.successors[g.agent]
    if isinstance(g, Box):
        return frozenset(s for s in model.states if all(t in inner for t in succ[s]))
    return frozenset(s for s in model.states if any(t in inner for t in succ[s]))


def satisfying_states(model: KripkeModel, f: Formula, memo: dict | None = None) -> frozenset[str]:
    """All states of ``model`` where ``f`` holds (bottom-up labelling).

    Labels are memoised per model in a weak cache; pass an explicit ``memo``
    dict to keep bulk evaluations out of that cache.
    """
    done = memo
    if done is None:
        done = _LABELS.get(model)
        if done is None:
            done = {}
            _LABELS[model] = done
    hit = done.get(f)
    if hit is not None:
        return hit
    check_signature(f, model.signature)
    stack = [f]
    while stack:
        g = stack[-1]
        if g in done:
            stack.pop()
            continue
        pending = [k for k in _children(g) if k not in done]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        done[g] = _label(model, g, done)
    return done[f]


_POINTS: "weakref.WeakKeyDictionary[KripkeModel, dict[tuple[Formula, str], bool]]" = (
    weakref.WeakKeyDictionary()
)


def _holds(model: KripkeModel, f: Formula, s: str, memo: dict) -> bool:
    """Top-down evaluation at one state, short-circuiting connectives.

    Iterative, so deep formulas do not hit the recursion limit; ``memo``
    caches (subformula, state) results.
    """
    stack = [(f, s)]
    while stack:
        key = stack[-1]
        if key in memo:
            stack.pop()
            continue
        g, t = key
        out = None
        if isinstance(g, Top):
            out = True
        elif isinstance(g, Atom):
            out = t in model.valuation[g.name]
        elif isinstance(g, Neg):
            sub = memo.get((g.child, t))
            if sub is None:
                stack.append((g.child, t))
            else:
                out = not sub
        elif isinstance(g, (And, Or, Implies)):
            left = memo.get((g.left, t))
            if left is None:
                stack.append((g.left, t))
                continue
            # the left value that decides the connective on its own
            decisive = isinstance(g, Or)
            if left == decisive:
                out = isinstance(g, Implies) or left
            else:
                right = memo.get((g.right, t))
                if right is None:
                    stack.append((g.right, t))
                else:
                    out = right
        else:
            want = isinstance(g, Diamond)
            out = not want
            for u in model.successors[g.agent][t]:
                sub = memo.get((g.child, u))
                if sub is None:
                    stack.append((g.child, u))
                    out = None
                    break
                if sub == want:
                    out = want
                    break
        if out is not None:
            memo[key] = out
            stack.pop()
    return memo[(f, s)]


def truth_values(x: PointedKripkeModel, formulas, checked: bool = False) -> list[bool]:
    """``satisfies`` for many formulas at once; ``checked`` skips the signature check."""
    model = x.model
    labels = _LABELS.get(model) or {}
    memo = _POINTS.get(model)
    if memo is None:
        memo = _POINTS[model] = {}
    out = []
    for f in formulas:
        hit = labels.get(f)
        if hit is not None:
            out.append(x.point in hit)
            continue
        if not checked:
            check_signature(f, model.signature)
        out.append(_holds(model, f, x.point, memo))
    return out


def satisfies(x: PointedKripkeModel, f: Formula) -> bool:
    """Truth at the point.

    Reuses whole-model labels when they exist; otherwise evaluates top-down
    from the point, which touches only what the answer depends on.
    """
    model = x.model
    labels = _LABELS.get(model)
    if labels is not None:
        hit = labels.get(f)
        if hit is not None:
            return x.point in hit
    check_signature(f, model.signature)
    memo = _POINTS.get(model)
    if memo is None:
        memo = _POINTS[model] = {}
    return _holds(model, f, x.point, memo)


def generated_submodel(x: PointedKripkeModel) -> PointedKripkeModel:
    """Restrict to the states reachable from the point along any relation."""
    m = x.model
    seen = {x.point}
    frontier = [x.point]
    while frontier:
        s = frontier.pop()
        for agent in m.signature.agents:
            for t in m.successors[agent][s]:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    if len(seen) == len(m.states):
        return x
    states = tuple(s for s in m.states if s in seen)
    sub = KripkeModel(
        m.signature,
        states,
        {a: frozenset((s, t) for s, t in pairs if s in seen) for a, pairs in m.relations.items()},
        {p: v & seen for p, v in m.valuation.items()},
    )
    return PointedKripkeModel(sub, x.point)


def successor_closure(models) -> list[PointedKripkeModel]:
    """Every state reachable from a point, as a pointed model of its own."""
    out = []
    for x in models:
        out.extend(x.model.at(s) for s in generated_submodel(x).model.states)
    return out


# ----------------------------------------------------------- file format


def _names(text: str, what: str, lineno: int) -> list[str]:
    names = text.split()
    for name in names:
        if not IDENT_RE.fullmatch(name):
            raise FormulaSyntaxError(f"line {lineno}: bad {what} name {name!r}")
    return names


def _split_header(line: str, lineno: int) -> tuple[str, str]:
    if ":" not in line:
        raise FormulaSyntaxError(f"line {lineno}: expected 'key: value', got {line!r}")
    key, _, rest = line.partition(":")
    return " ".join(key.split()), rest.strip()


def _parse_pairs(text: str, lineno: int) -> list[tuple[str, str]]:
    pairs = []
    for item in text.split():
        s, arrow, t = item.partition("->")
        if not arrow or not s or not t:
            raise FormulaSyntaxError(f"line {lineno}: bad edge {item!r}, expected s->t")
        pairs.append((s, t))
    return pairs


def read_signature_lines(lines: list[tuple[int, str]]) -> Signature:
    atoms = agents = None
    for lineno, line in lines:
        key, rest = _split_header(line, lineno)
        if key == "sig atoms":
            atoms = _names(rest, "atom", lineno)
        elif key == "sig agents":
            agents = _names(rest, "agent", lineno)
    if atoms is None or agents is None:
        raise FormulaSyntaxError("missing 'sig atoms:' or 'sig agents:' header")
    return Signature(tuple(atoms), tuple(agents))


def content_lines(text: str) -> list[tuple[int, str]]:
    """Non-blank lines with ``#`` comments stripped, with 1-based line numbers."""
    out = []
    for k, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((k, line))
    return out


def loads_model(text: str, require_point: bool = True):
    """Parse the model file format.

    Returns a :class:`PointedKripkeModel`, or a bare :class:`KripkeModel` when
    the file has no ``point:`` line and ``require_point`` is false.  Atoms and
    agents declared in the ``sig`` headers but without ``val``/``rel`` lines
    get empty extensions.
    """
    lines = content_lines(text)
    sig = read_signature_lines(lines)
    states = None
    rel: dict[str, list] = {}
    val: dict[str, list] = {}
    point = None
    for lineno, line in lines:
        key, rest = _split_header(line, lineno)
        if key.startswith("sig "):
            continue
        if key == "states":
            states = rest.split()
        elif key.startswith("rel "):
            agent = key[4:].strip()
            if agent in rel:
                raise FormulaSyntaxError(f"line {lineno}: duplicate rel line for {agent}")
            rel[agent] = _parse_pairs(rest, lineno)
        elif key.startswith("val "):
            atom = key[4:].strip()
            if atom in val:
                raise FormulaSyntaxError(f"line {lineno}: duplicate val line for {atom}")
            val[atom] = rest.split()
        elif key == "point":
            point = rest
        else:
            raise FormulaSyntaxError(f"line {lineno}: unknown header {key!r}")
    if states is None:
        raise FormulaSyntaxError("missing 'states:' line")
    try:
        model = make_model(sig, states, rel, val)
    except ValueError as exc:
        raise FormulaSyntaxError(str(exc)) from exc
    if point is None:
        if require_point:
            raise FormulaSyntaxError("missing 'point:' line")
        return model
    if point not in model.all_states:
        raise FormulaSyntaxError(f"point {point!r} is not a declared state")
    return PointedKripkeModel(model, point)


def dumps_model(x: PointedKripkeModel | KripkeModel) -> str:
    model = x.model if isinstance(x, PointedKripkeModel) else x
    sig = model.signature
    out = [
        f"sig atoms: {' '.join(sig.atoms)}",
        f"sig agents: {' '.join(sig.agents)}",
        f"states: {' '.join(model.states)}",
    ]
    order = {s: k for k, s in enumerate(model.states)}
    for agent in sig.agents:
        pairs = sorted(model.relations[agent], key=lambda st: (order[st[0]], order[st[1]]))
        out.append(f"rel {agent}: " + " ".join(f"{s}->{t}" for s, t in pairs))
    for atom in sig.atoms:
        members = sorted(model.valuation[atom], key=order.__getitem__)
        out.append(f"val {atom}: " + " ".join(members))
    if isinstance(x, PointedKripkeModel):
        out.append(f"point: {x.point}")
    return "\n".join(line.rstrip() for line in out) + "\n"
