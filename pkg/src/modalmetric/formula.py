"""Modal formulas over a finite signature: AST, parser, printer.

Formula nodes are immutable and cache their hash and modal depth at
construction.  Large formulas (characteristic formulas in particular) are
built as DAGs with shared subterms, so anything that walks a formula should
memoise on nodes rather than recurse blindly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Iterable, Iterator

from .errors import FormulaSyntaxError, SignatureError

IDENT_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")
RESERVED = frozenset({"T"})


@dataclass(frozen=True)
class Signature:
    atoms: tuple[str, ...]
    agents: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "agents", tuple(self.agents))
        for kind, names in (("atoms", self.atoms), ("agents", self.agents)):
            if not names:
                raise SignatureError(f"signature needs at least one of {kind}")
            if len(set(names)) != len(names):
                raise SignatureError(f"duplicate names in {kind}: {names}")
            for name in names:
                if not IDENT_RE.fullmatch(name) or name in RESERVED:
                    raise SignatureError(f"invalid name {name!r} in {kind}")


# ---------------------------------------------------------------- AST


@dataclass(frozen=True, eq=False)
class Formula:
    """Base node.  Equality is structural, hashing is O(1).

    Nodes proven equal are linked to a common representative, so comparing
    the same two (possibly huge, shared) terms again costs O(1).
    """

    def __post_init__(self):
        key = self._key()
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + key))
        object.__setattr__(self, "_depth", self._compute_depth())
        object.__setattr__(self, "_canon", None)
        atoms, agents = _EMPTY, _EMPTY
        for k in key:
            if isinstance(k, Formula):
                atoms = _union(atoms, k._atoms)
                agents = _union(agents, k._agents)
        object.__setattr__(self, "_atoms", atoms)
        object.__setattr__(self, "_agents", agents)

    def _key(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    def _compute_depth(self) -> int:
        return 0

    @property
    def depth(self) -> int:
        return self._depth

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        a, b = _find(self), _find(other)
        if a is b:
            return True
        return _same_structure(a, b)

    def __repr__(self):
        text = "".join(_tokens_limited(self, 120))
        return f"{type(self).__name__}<{text}>"

    def __str__(self):
        return render(self)


_EMPTY: frozenset = frozenset()


def _union(a: frozenset, b: frozenset) -> frozenset:
    if a is b or b <= a:
        return a
    if a <= b:
        return b
    return a | b


def _find(f: Formula) -> Formula:
    root = f
    while root._canon is not None:
        root = root._canon
    while f._canon is not None and f._canon is not root:
        nxt = f._canon
        object.__setattr__(f, "_canon", root)
        f = nxt
    return root


def _same_structure(f: Formula, g: Formula) -> bool:
    # iterative; each pair of nodes is compared once, so shared subterms
    # do not blow up the cost.  On success every compared pair is merged.
    seen = set()
    pairs = []
    stack = [(f, g)]
    while stack:
        a, b = stack.pop()
        a, b = _find(a), _find(b)
        if a is b or (id(a), id(b)) in seen:
            continue
        if type(a) is not type(b) or a._hash != b._hash:
            return False
        seen.add((id(a), id(b)))
        pairs.append((a, b))
        for x, y in zip(a._key(), b._key()):
            if isinstance(x, Formula):
                stack.append((x, y))
            elif x != y:
                return False
    for a, b in pairs:
        ra, rb = _find(a), _find(b)
        if ra is not rb:
            object.__setattr__(rb, "_canon", ra)
    return True


@dataclass(frozen=True, eq=False, repr=False)
class Top(Formula):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class Atom(Formula):
    name: str

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "_atoms", frozenset((self.name,)))


@dataclass(frozen=True, eq=False, repr=False)
class Neg(Formula):
    child: Formula

    def _compute_depth(self):
        return self.child.depth


@dataclass(frozen=True, eq=False, repr=False)
class _Binary(Formula):
    left: Formula
    right: Formula

    def _compute_depth(self):
        return max(self.left.depth, self.right.depth)


@dataclass(frozen=True, eq=False, repr=False)
class And(_Binary):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class Or(_Binary):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class Implies(_Binary):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class _Modal(Formula):
    agent: str
    child: Formula

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "_agents", _union(self._agents, frozenset((self.agent,))))

    def _compute_depth(self):
        return 1 + self.child.depth


@dataclass(frozen=True, eq=False, repr=False)
class Box(_Modal):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class Diamond(_Modal):
    pass


TOP = Top()
BOT = Neg(TOP)

_BINARY_OPS = {And: "&", Or: "|", Implies: "->"}


def modal_depth(f: Formula) -> int:
    return f.depth


def conj(parts: Iterable[Formula]) -> Formula:
    """Right-nested conjunction; the empty conjunction is T."""
    items = list(parts)
    if not items:
        return TOP
    out = items[-1]
    for item in reversed(items[:-1]):
        out = And(item, out)
    return out


def disj(parts: Iterable[Formula]) -> Formula:
    """Right-nested disjunction; the empty disjunction is ~T."""
    items = list(parts)
    if not items:
        return BOT
    out = items[-1]
    for item in reversed(items[:-1]):
        out = Or(item, out)
    return out


def iff(a: Formula, b: Formula) -> Formula:
    return And(Implies(a, b), Implies(b, a))


def walk(f: Formula) -> Iterator[Formula]:
    """Every distinct subformula node, each once (DAG-safe)."""
    seen = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen.add(g)
        yield g
        if isinstance(g, Neg):
            stack.append(g.child)
        elif isinstance(g, _Binary):
            stack.extend((g.left, g.right))
        elif isinstance(g, _Modal):
            stack.append(g.child)


def atoms_of(f: Formula) -> frozenset[str]:
    return f._atoms


def agents_of(f: Formula) -> frozenset[str]:
    return f._agents


def check_signature(f: Formula, sig: Signature) -> None:
    bad_atoms = f._atoms.difference(sig.atoms)
    bad_agents = f._agents.difference(sig.agents)
    if bad_atoms or bad_agents:
        raise SignatureError(
            f"undeclared names: atoms {sorted(bad_atoms)}, agents {sorted(bad_agents)}"
        )


def is_literal(f: Formula) -> bool:
    return isinstance(f, Atom) or (isinstance(f, Neg) and isinstance(f.child, Atom))


def nnf(f: Formula) -> Formula:
    """Negation normal form: negations only on atoms or T, no implications."""
    memo: dict[tuple[Formula, bool], Formula] = {}

    def go(g: Formula, positive: bool) -> Formula:
        key = (g, positive)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(g, (Top, Atom)):
            out = g if positive else Neg(g)
        elif isinstance(g, Neg):
            out = go(g.child, not positive)
        elif isinstance(g, And):
            cls = And if positive else Or
            out = cls(go(g.left, positive), go(g.right, positive))
        elif isinstance(g, Or):
            cls = Or if positive else And
            out = cls(go(g.left, positive), go(g.right, positive))
        elif isinstance(g, Implies):
            cls = Or if positive else And
            out = cls(go(g.left, not positive), go(g.right, positive))
        elif isinstance(g, Box):
            cls = Box if positive else Diamond
            out = cls(g.agent, go(g.child, positive))
        elif isinstance(g, Diamond):
            cls = Diamond if positive else Box
            out = cls(g.agent, go(g.child, positive))
        else:  # pragma: no cover
            raise TypeError(g)
        memo[key] = out
        return out

    return go(f, True)


# ------------------------------------------------------------- clauses


@dataclass(frozen=True)
class ConjunctiveClause:
    """A conjunction of literals, or T when both sets are empty."""

    positive: frozenset[str] = frozenset()
    negative: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "positive", frozenset(self.positive))
        object.__setattr__(self, "negative", frozenset(self.negative))
        clash = self.positive & self.negative
        if clash:
            raise ValueError(f"clause contains complementary literals on {sorted(clash)}")

    @property
    def is_top(self) -> bool:
        return not self.positive and not self.negative

    def forces(self, atom: str) -> bool | None:
        """True/False if the clause sets ``atom``, None if it leaves it alone."""
        if atom in self.positive:
            return True
        if atom in self.negative:
            return False
        return None

    def to_formula(self) -> Formula:
        lits = [Atom(p) for p in sorted(self.positive)]
        lits += [Neg(Atom(p)) for p in sorted(self.negative)]
        return conj(lits)

    @classmethod
    def from_formula(cls, f: Formula) -> "ConjunctiveClause":
        pos, neg = set(), set()

        def go(g):
            if isinstance(g, Top):
                return
            if isinstance(g, Atom):
                pos.add(g.name)
            elif isinstance(g, Neg) and isinstance(g.child, Atom):
                neg.add(g.child.name)
            elif isinstance(g, And):
                go(g.left)
                go(g.right)
            else:
                raise ValueError(f"not a conjunction of literals: {render(g)}")

        go(f)
        return cls(frozenset(pos), frozenset(neg))

    def __str__(self):
        return render(self.to_formula())


# ------------------------------------------------------------ printing


def _tokens(f: Formula) -> Iterator[str]:
    if isinstance(f, Top):
        yield "T"
    elif isinstance(f, Atom):
        yield f.name
    elif isinstance(f, Neg):
        yield "~"
        yield from _tokens(f.child)
    elif isinstance(f, _Binary):
        yield "("
        yield from _tokens(f.left)
        yield f" {_BINARY_OPS[type(f)]} "
        yield from _tokens(f.right)
        yield ")"
    elif isinstance(f, Box):
        yield f"[{f.agent}]"
        yield from _tokens(f.child)
    elif isinstance(f, Diamond):
        yield f"<{f.agent}>"
        yield from _tokens(f.child)
    else:  # pragma: no cover
        raise TypeError(f)


def _tokens_limited(f: Formula, limit: int) -> Iterator[str]:
    size = 0
    for tok in _tokens(f):
        size += len(tok)
        if size > limit:
            yield "..."
            return
        yield tok


def render(f: Formula) -> str:
    """Fully parenthesised canonical text that parses back to ``f``."""
    return "".join(_tokens(f))


# ------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"\s*(?:(->)|([~&|()\[\]<>])|([a-zA-Z][a-zA-Z0-9_]*))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastindex)
        if m.group(1):
            out.append(("op", "->", start))
        elif m.group(2):
            out.append(("op", m.group(2), start))
        else:
            out.append(("id", m.group(3), start))
        pos = m.end()
    out.append(("eof", "", n))
    return out


class _Parser:
    # precedence: ~ and modalities bind tightest, then &, |, -> (right assoc)
    def __init__(self, text: str, sig: Signature | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.sig = sig

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value or kind == "eof":
            found = "end of input" if kind == "eof" else repr(val)
            raise FormulaSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Formula:
        f = self.implication()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise FormulaSyntaxError(f"unexpected token {val!r}", pos)
        return f

    def implication(self):
        left = self.disjunction()
        if self.peek()[1] == "->":
            self.take()
            return Implies(left, self.implication())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.peek()[1] == "|":
            self.take()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.unary()
        while self.peek()[1] == "&":
            self.take()
            left = And(left, self.unary())
        return left

    def agent(self):
        kind, val, pos = self.take()
        if kind != "id":
            raise FormulaSyntaxError("expected agent name", pos)
        if self.sig is not None and val not in self.sig.agents:
            raise SignatureError(f"undeclared agent {val!r} at position {pos}")
        return val

    def unary(self):
        kind, val, pos = self.peek()
        if val == "~" and kind == "op":
            self.take()
            return Neg(self.unary())
        if val == "[" and kind == "op":
            self.take()
            a = self.agent()
            self.expect("]")
            return Box(a, self.unary())
        if val == "<" and kind == "op":
            self.take()
            a = self.agent()
            self.expect(">")
            return Diamond(a, self.unary())
        return self.primary()

    def primary(self):
        kind, val, pos = self.take()
        if kind == "id":
            if val == "T":
                return TOP
            if self.sig is not None and val not in self.sig.atoms:
                raise SignatureError(f"undeclared atom {val!r} at position {pos}")
            return Atom(val)
        if val == "(" and kind == "op":
            f = self.implication()
            self.expect(")")
            return f
        found = "end of input" if kind == "eof" else repr(val)
        raise FormulaSyntaxError(f"expected a formula, found {found}", pos)


def parse(text: str, sig: Signature | None = None) -> Formula:
    """Parse formula text.  With ``sig`` given, undeclared names are rejected.

    Accepts the fully parenthesised grammar plus unparenthesised binary
    chains under the usual precedence.
    """
    return _Parser(text, sig).parse()
