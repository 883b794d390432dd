"""Action models, product update, clean maps and a continuity modulus.

An action model has actions with preconditions (when the action can happen)
and postconditions (conjunctions of literals that overwrite atoms), per-agent
relations between actions, and a set of designated actions.  Updating a
pointed model keeps the pairs (state, action) whose precondition holds.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from . import bisim
from .errors import BudgetExceeded, ConditionError, FormulaSyntaxError, SignatureError
from .formula import (
    TOP,
    And,
    Box,
    ConjunctiveClause,
    Diamond,
    Formula,
    Neg,
    Or,
    Signature,
    check_signature,
    conj,
    disj,
    nnf,
    parse,
    render,
)
from .kripke import (
    KripkeModel,
    PointedKripkeModel,
    content_lines,
    read_signature_lines,
    satisfies,
    satisfying_states,
)
from .metrics import Descriptor, ModalSpacePoint, WeightFunction, distance, DistanceInterval
from .tableau import k_satisfiable

# at most 2**MAX_PRECONDITIONS signed conjunctions in disjointify
MAX_PRECONDITIONS = 12
DEFAULT_FORMULA_CAP = 4096


@dataclass(frozen=True)
class ActionModel:
    signature: Signature
    actions: tuple[str, ...]
    relations: Mapping[str, frozenset[tuple[str, str]]]
    pre: Mapping[str, Formula]
    post: Mapping[str, ConjunctiveClause]
    designated: tuple[str, ...]

    def __post_init__(self):
        actions = tuple(self.actions)
        if not actions:
            raise ValueError("an action model needs at least one action")
        if len(set(actions)) != len(actions):
            raise ValueError("duplicate action ids")
        known = set(actions)
        sig = self.signature
        rel = {}
        for agent, pairs in self.relations.items():
            if agent not in sig.agents:
                raise SignatureError(f"relation for undeclared agent {agent!r}")
            pairs = frozenset(pairs)
            if any(s not in known or t not in known for s, t in pairs):
                raise ValueError(f"relation {agent} mentions an unknown action")
            rel[agent] = pairs
        for agent in sig.agents:
            rel.setdefault(agent, frozenset())
        pre = {}
        post = {}
        for k in self.pre:
            if k not in known:
                raise ValueError(f"precondition for unknown action {k!r}")
        for k in self.post:
            if k not in known:
                raise ValueError(f"postcondition for unknown action {k!r}")
        for s in actions:
            f = self.pre.get(s, TOP)
            check_signature(f, sig)
            pre[s] = f
            c = self.post.get(s, ConjunctiveClause())
            if not (c.positive | c.negative) <= set(sig.atoms):
                raise SignatureError(f"postcondition of {s} mentions an undeclared atom")
            post[s] = c
        designated = tuple(dict.fromkeys(self.designated))
        if not designated:
            raise ValueError("the designated set must be non-empty")
        if not set(designated) <= known:
            raise ValueError("designated actions must be actions")
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "relations", rel)
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)
        object.__setattr__(self, "designated", designated)

    @property
    def preconditions(self) -> tuple[Formula, ...]:
        """Distinct preconditions (structurally), in action order."""
        return tuple(dict.fromkeys(self.pre[s] for s in self.actions))

    def with_designated(self, designated: Sequence[str]) -> "ActionModel":
        return ActionModel(self.signature, self.actions, self.relations, self.pre, self.post, tuple(designated))


def make_action_model(
    sig: Signature,
    actions: Sequence[str],
    relations: Mapping[str, Sequence[tuple[str, str]]] | None = None,
    pre: Mapping[str, Formula | str] | None = None,
    post: Mapping[str, ConjunctiveClause | Formula | str] | None = None,
    designated: Sequence[str] | None = None,
) -> ActionModel:
    """Convenience constructor accepting formula text for pre/post."""

    def formula(v):
        return parse(v, sig) if isinstance(v, str) else v

    def clause(v):
        if isinstance(v, ConjunctiveClause):
            return v
        return ConjunctiveClause.from_formula(formula(v))

    return ActionModel(
        sig,
        tuple(actions),
        {a: frozenset(p) for a, p in (relations or {}).items()},
        {k: formula(v) for k, v in (pre or {}).items()},
        {k: clause(v) for k, v in (post or {}).items()},
        tuple(designated if designated is not None else actions),
    )


def identity_action(sig: Signature) -> ActionModel:
    return make_action_model(sig, ["e"], {a: [("e", "e")] for a in sig.agents})


def applicable(x: PointedKripkeModel, A: ActionModel) -> list[str]:
    """Designated actions whose precondition holds at the point."""
    return [s for s in A.designated if satisfies(x, A.pre[s])]


def product_update(x: PointedKripkeModel, A: ActionModel) -> PointedKripkeModel:
    if x.signature != A.signature:
        raise SignatureError("model and action model have different signatures")
    here = applicable(x, A)
    if not here:
        raise ConditionError("not exhaustive: no designated action applies at the point")
    if len(here) > 1:
        raise ConditionError(f"not deterministic: designated actions {here} all apply at the point")
    m = x.model
    sig = m.signature
    ext = {s: satisfying_states(m, A.pre[s]) for s in A.actions}
    pairs = [(s, a) for s in m.states for a in A.actions if s in ext[a]]
    name = {p: f"({p[0]},{p[1]})" for p in pairs}
    kept = set(pairs)
    rel = {}
    for agent in sig.agents:
        succ = m.successors[agent]
        act = A.relations[agent]
        rel[agent] = frozenset(
            (name[(s, a)], name[(t, b)])
            for (s, a) in pairs
            for t in succ[s]
            for b in A.actions
            if (t, b) in kept and (a, b) in act
        )
    val = {}
    for p in sig.atoms:
        members = set()
        for s, a in pairs:
            forced = A.post[a].forces(p)
            if forced is True or (forced is None and s in m.valuation[p]):
                members.add(name[(s, a)])
        val[p] = frozenset(members)
    out = KripkeModel(sig, tuple(name[p] for p in pairs), rel, val)
    return PointedKripkeModel(out, name[(x.point, here[0])])


# ------------------------------------------------------------- conditions


@dataclass(frozen=True)
class ConditionReport:
    deterministic: bool
    exhaustive: bool
    closing: bool
    closing_depth: int
    validity_checked: bool
    distinct_preconditions: int
    failures: tuple[str, ...] = ()
    # closing is only checked up to closing_depth-bisimilarity over the sample
    closing_is_approximation: bool = True

    @property
    def clean(self) -> bool:
        return self.deterministic and self.exhaustive and self.closing


def check_conditions(
    A: ActionModel,
    sample: Sequence[PointedKripkeModel],
    depth: int = 3,
    validity: bool = False,
) -> ConditionReport:
    """Determinism, exhaustivity and (approximate) closing over ``sample``.

    With ``validity`` set, determinism and exhaustivity are additionally
    decided over all models with the tableau: no two designated
    preconditions are jointly satisfiable, and their disjunction is valid.
    """
    failures = []
    det = exh = True
    outputs = []
    for k, x in enumerate(sample):
        here = applicable(x, A)
        if not here:
            exh = False
            failures.append(f"sample {k}: no designated action applies")
        elif len(here) > 1:
            det = False
            failures.append(f"sample {k}: designated actions {', '.join(here)} all apply")
        else:
            outputs.append((k, product_update(x, A)))
    if validity:
        for s, t in itertools.combinations(A.designated, 2):
            if k_satisfiable(And(A.pre[s], A.pre[t])):
                det = False
                failures.append(f"pre({s}) and pre({t}) are jointly satisfiable")
        if k_satisfiable(Neg(disj(A.pre[s] for s in A.designated))):
            exh = False
            failures.append("the designated preconditions are not jointly valid")
    closing = True
    if outputs and sample:
        r = bisim.refine(list(sample) + [y for _, y in outputs])
        present = {r.block(x, depth) for x in sample}
        for k, y in outputs:
            if r.block(y, depth) not in present:
                closing = False
                failures.append(f"sample {k}: update leaves the sample (up to {depth}-bisimilarity)")
    return ConditionReport(
        deterministic=det,
        exhaustive=exh,
        closing=closing,
        closing_depth=depth,
        validity_checked=validity,
        distinct_preconditions=len(A.preconditions),
        failures=tuple(failures),
    )


# ---------------------------------------------------------- disjointing


def signed_conjunctions(formulas: Sequence[Formula], sig: Signature, budget: int = bisim.DEFAULT_BUDGET):
    """Consistent conjunctions choosing each formula or its negation.

    Yields ``(signs, conjunction)`` with ``signs[k]`` True where
    ``formulas[k]`` occurs positively.
    """
    if len(formulas) > MAX_PRECONDITIONS:
        raise BudgetExceeded(f"{len(formulas)} preconditions give too many signed conjunctions")
    for signs in itertools.product((True, False), repeat=len(formulas)):
        psi = conj(f if b else Neg(f) for f, b in zip(formulas, signs))
        if bisim.is_consistent(psi, sig, budget):
            yield signs, psi


def disjointify(A: ActionModel, budget: int = bisim.DEFAULT_BUDGET) -> ActionModel:
    """Equivalent action model whose preconditions are pairwise equal or exclusive.

    Action ``s`` becomes copies ``s.k``, one per consistent signed
    conjunction ``k`` of the distinct preconditions that takes pre(s)
    positively.  Posts are copied and relations lifted from the originals.
    """
    sig = A.signature
    phis = bisim.dedupe_formulas(A.preconditions, sig, budget)
    slot = {}
    for s in A.actions:
        slot[s] = next(k for k, f in enumerate(phis) if bisim.equivalent(f, A.pre[s], sig, budget))
    cells = list(signed_conjunctions(phis, sig, budget))
    copies: dict[str, list[str]] = {}
    pre, post = {}, {}
    for s in A.actions:
        copies[s] = []
        for k, (signs, psi) in enumerate(cells):
            if signs[slot[s]]:
                name = f"{s}.{k}"
                copies[s].append(name)
                pre[name] = psi
                post[name] = A.post[s]
    actions = [c for s in A.actions for c in copies[s]]
    if not actions:
        raise ConditionError("every precondition is inconsistent")
    rel = {
        agent: frozenset((c, d) for s, t in pairs for c in copies[s] for d in copies[t])
        for agent, pairs in A.relations.items()
    }
    designated = [c for s in A.designated for c in copies[s]]
    if not designated:
        raise ConditionError("every designated precondition is inconsistent")
    return ActionModel(sig, tuple(actions), rel, pre, post, tuple(designated))


def pairwise_disjoint(A: ActionModel, budget: int = bisim.DEFAULT_BUDGET) -> bool:
    """Every two preconditions are equivalent or jointly inconsistent."""
    sig = A.signature
    for s, t in itertools.combinations(A.actions, 2):
        f, g = A.pre[s], A.pre[t]
        if not (bisim.equivalent(f, g, sig, budget) or not bisim.is_consistent(And(f, g), sig, budget)):
            return False
    return True


# ------------------------------------------------------------ clean maps


@dataclass(frozen=True)
class CleanMap:
    """The map on a modal space induced by updating with an action model.

    ``sample`` stands in for the ambient class of models.  Conditions and
    the bisimulation quotient of the sample are computed once, lazily.
    """

    action_model: ActionModel
    sample: tuple[PointedKripkeModel, ...]
    depth: int = 3

    def __post_init__(self):
        object.__setattr__(self, "sample", tuple(self.sample))

    @cached_property
    def report(self) -> ConditionReport:
        return check_conditions(self.action_model, self.sample, self.depth)

    @cached_property
    def space(self) -> tuple[ModalSpacePoint, ...]:
        """The sample's bisimulation classes."""
        if not self.sample:
            return ()
        blocks = bisim.bisim_classes(self.sample)
        groups: dict[int, list[PointedKripkeModel]] = {}
        for b, x in zip(blocks, self.sample):
            groups.setdefault(b, []).append(x)
        return tuple(ModalSpacePoint(b, xs[0], tuple(xs)) for b, xs in sorted(groups.items()))

    def __call__(self, x: PointedKripkeModel) -> PointedKripkeModel:
        return product_update(x, self.action_model)


def locate(x: PointedKripkeModel, space: Sequence[ModalSpacePoint]) -> ModalSpacePoint | None:
    """The point of ``space`` whose representative is bisimilar to ``x``."""
    if not space:
        return None
    r = bisim.refine([x] + [p.representative for p in space])
    b = r.block(x)
    for p in space:
        if r.block(p.representative) == b:
            return p
    return None


def apply_clean_map(f: CleanMap, point: ModalSpacePoint) -> ModalSpacePoint:
    """Image class of ``point``.

    The output is matched against the sample's bisimulation classes; if it
    falls outside all of them a fresh point with class id -1 is returned,
    which signals a closing failure.
    """
    y = f(point.representative)
    hit = locate(y, f.space)
    if hit is not None:
        return hit
    return ModalSpacePoint(-1, y, (y,))


# ---------------------------------------------------- continuity modulus


def _aux2(D: Descriptor, w: WeightFunction, depth: int) -> Fraction:
    """A radius within which the truth of every depth-``depth`` formula is stable.

    Entries up to ``determining_level(depth)`` fix such formulas, and any
    disagreement on one of them costs at least its weight.
    """
    return w.min_weight_through(D.first_level, max(D.first_level, D.determining_level(depth)))


class _Modulus:
    """Recursive radius function over NNF formulas for one precondition set."""

    def __init__(self, pres: Sequence[Formula], D: Descriptor, w: WeightFunction, explicit: bool, cap: int):
        self.pres = tuple(pres)
        self.pre_depth = max((f.depth for f in self.pres), default=0)
        self.D = D
        self.w = w
        self.explicit = explicit
        self.cap = cap
        self.memo: dict[Formula, Fraction] = {}
        self.aux: dict[int, Fraction] = {}

    def aux2(self, depth: int) -> Fraction:
        hit = self.aux.get(depth)
        if hit is None:
            hit = self.aux[depth] = _aux2(self.D, self.w, depth)
        return hit

    def chi_entries(self, eps: Fraction) -> list[Formula]:
        """Descriptor entries whose signed conjunctions pin distances below eps."""
        D = self.D
        N = self.w.first_level_below(eps, D.first_level)
        count = 0
        out = []
        for n in range(D.first_level, N):
            level = D.level(n)
            count += len(level)
            if count > self.cap.bit_length():
                raise BudgetExceeded(f"more than 2^{count} signed conjunctions needed below {eps}")
            out.extend(level)
        return out

    def chi_depth(self, eps: Fraction) -> int:
        N = self.w.first_level_below(eps, self.D.first_level)
        return self.D.depth_below(N)

    def delta(self, f: Formula) -> Fraction:
        hit = self.memo.get(f)
        if hit is not None:
            return hit
        if isinstance(f, (And, Or)):
            out = min(self.delta(f.left), self.delta(f.right))
        elif isinstance(f, (Diamond, Box)):
            out = self._modal(f)
        else:
            # literal (or a constant)
            out = min([self.aux2(0)] + [self.aux2(p.depth) for p in self.pres])
        self.memo[f] = out
        return out

    def _modal(self, f: Diamond | Box) -> Fraction:
        inner = self.delta(f.child)
        if not self.explicit:
            depth = 1 + max(self.pre_depth, self.chi_depth(inner))
            return min(self.aux2(depth), self.aux2(self.pre_depth))
        chis = [conj(e if b else Neg(e) for e, b in zip(entries, signs))
                for entries in [self.chi_entries(inner)]
                for signs in itertools.product((True, False), repeat=len(entries))]
        cells = [And(p, c) for p in self.pres for c in chis]
        family: list[Formula] = list(self.pres)
        if isinstance(f, Diamond):
            family.extend(Diamond(f.agent, c) for c in cells)
        else:
            if len(cells) > self.cap.bit_length():
                raise BudgetExceeded(f"box case needs 2^{len(cells)} disjunctions")
            for r in range(len(cells) + 1):
                for chosen in itertools.combinations(cells, r):
                    family.append(Box(f.agent, disj(chosen)))
        if len(family) > self.cap:
            raise BudgetExceeded(f"{len(family)} formulas exceed the cap {self.cap}")
        return min(self.aux2(g.depth) for g in family)


def continuity_modulus(
    f: CleanMap | ActionModel,
    D: Descriptor,
    w: WeightFunction,
    eps,
    *,
    explicit: bool = False,
    cap: int = DEFAULT_FORMULA_CAP,
    budget: int = bisim.DEFAULT_BUDGET,
) -> Fraction:
    """A delta > 0 with d(x, y) < delta implying d(f(x), f(y)) < eps.

    The action model is disjointed first.  Entries of the levels whose tail
    exceeds eps must be preserved by the map; each entry and its negation
    get a radius from the recursion over their negation normal form.  The
    radius of a formula only depends on modal depths, so by default the
    families of the modal cases are summarised by their deepest member;
    ``explicit`` builds them formula by formula (feasible only for tiny
    descriptors) and raises BudgetExceeded past ``cap``.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not D.representative:
        raise ValueError(f"descriptor {D.name!r} is not representative")
    A = f.action_model if isinstance(f, CleanMap) else f
    A = disjointify(A, budget)
    pres = bisim.dedupe_formulas(A.preconditions, A.signature, budget)
    mod = _Modulus(pres, D, w, explicit, cap)
    N = w.first_level_below(eps, D.first_level)
    best = None
    for n in range(D.first_level, N):
        for e in D.level(n):
            for g in (nnf(e), nnf(Neg(e))):
                d = mod.delta(g)
                best = d if best is None else min(best, d)
    if best is None:
        # nothing to preserve: every pair is already within eps
        best = Fraction(1)
    if best <= 0:
        raise ConditionError("computed a non-positive modulus")  # pragma: no cover
    return best


@dataclass(frozen=True)
class SwapVariant:
    designated: tuple[str, ...]
    report: ConditionReport


def swapped_variants(A: ActionModel, sample: Sequence[PointedKripkeModel], depth: int = 3, budget: int = bisim.DEFAULT_BUDGET) -> list[SwapVariant]:
    """Condition reports for the designated-set swaps used in the diamond case.

    For each non-designated action t, the designated action with an
    equivalent precondition (if any) is replaced by t; otherwise t is added.
    """
    sig = A.signature
    out = []
    for t in A.actions:
        if t in A.designated:
            continue
        same = [s for s in A.designated if bisim.equivalent(A.pre[s], A.pre[t], sig, budget)]
        gamma = [s for s in A.designated if s not in same[:1]] + [t]
        out.append(SwapVariant(tuple(gamma), check_conditions(A.with_designated(gamma), sample, depth)))
    return out


# ------------------------------------------------------------ probing


@dataclass(frozen=True)
class ProbeViolation:
    index: int
    input_distance: DistanceInterval
    output_distance: DistanceInterval


@dataclass(frozen=True)
class ProbeReport:
    checked: int
    in_scope: int
    violations: tuple[ProbeViolation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


def probe_continuity(
    f: CleanMap | ActionModel,
    D: Descriptor,
    w: WeightFunction,
    eps,
    delta,
    pairs: Sequence[tuple[PointedKripkeModel, PointedKripkeModel]],
    tol=Fraction(1, 64),
) -> ProbeReport:
    """Test the eps-delta implication on concrete pairs.

    A pair is in scope when the input distance may be below delta (its lower
    bound is), and a violation when the output distance may reach eps (its
    upper bound does).  Both choices err on the side of reporting.  Each
    distance is summed only until it is decided against delta or eps.
    """
    eps, delta, tol = Fraction(eps), Fraction(delta), Fraction(tol)
    A = f.action_model if isinstance(f, CleanMap) else f
    in_scope = 0
    bad = []
    for k, (x, y) in enumerate(pairs):
        din = distance(x, y, D, w, tol, threshold=delta)
        if din.lower >= delta:
            continue
        in_scope += 1
        dout = distance(product_update(x, A), product_update(y, A), D, w, tol, threshold=eps)
        if dout.upper >= eps:
            bad.append(ProbeViolation(k, din, dout))
    return ProbeReport(len(pairs), in_scope, tuple(bad))


# ----------------------------------------------------------- file format


def loads_action_model(text: str) -> ActionModel:
    """Parse the action model file format.

    Actions without a ``pre`` line get precondition T, without ``post`` the
    empty clause T, agents without ``rel`` the empty relation.
    """
    lines = content_lines(text)
    sig = read_signature_lines(lines)
    actions = designated = None
    rel: dict[str, list] = {}
    pre: dict[str, Formula] = {}
    post: dict[str, ConjunctiveClause] = {}
    for lineno, line in lines:
        key, _, rest = line.partition(":")
        key = " ".join(key.split())
        rest = rest.strip()
        if not _:
            raise FormulaSyntaxError(f"line {lineno}: expected 'key: value', got {line!r}")
        if key.startswith("sig "):
            continue
        try:
            if key == "actions":
                actions = rest.split()
            elif key == "designated":
                designated = rest.split()
            elif key.startswith("rel "):
                pairs = []
                for item in rest.split():
                    s, arrow, t = item.partition("->")
                    if not arrow or not s or not t:
                        raise FormulaSyntaxError(f"bad edge {item!r}, expected s->t")
                    pairs.append((s, t))
                rel[key[4:].strip()] = pairs
            elif key.startswith("pre "):
                pre[key[4:].strip()] = parse(rest, sig)
            elif key.startswith("post "):
                post[key[5:].strip()] = ConjunctiveClause.from_formula(parse(rest, sig))
            else:
                raise FormulaSyntaxError(f"unknown header {key!r}")
        except FormulaSyntaxError as exc:
            raise FormulaSyntaxError(f"line {lineno}: {exc}") from exc
        except ValueError as exc:
            raise FormulaSyntaxError(f"line {lineno}: {exc}") from exc
    if actions is None:
        raise FormulaSyntaxError("missing 'actions:' line")
    if designated is None:
        raise FormulaSyntaxError("missing 'designated:' line")
    try:
        return ActionModel(sig, tuple(actions), {a: frozenset(p) for a, p in rel.items()}, pre, post, tuple(designated))
    except ValueError as exc:
        raise FormulaSyntaxError(str(exc)) from exc


def dumps_action_model(A: ActionModel) -> str:
    sig = A.signature
    out = [
        f"sig atoms: {' '.join(sig.atoms)}",
        f"sig agents: {' '.join(sig.agents)}",
        f"actions: {' '.join(A.actions)}",
    ]
    order = {s: k for k, s in enumerate(A.actions)}
    for agent in sig.agents:
        pairs = sorted(A.relations[agent], key=lambda st: (order[st[0]], order[st[1]]))
        out.append(f"rel {agent}: " + " ".join(f"{s}->{t}" for s, t in pairs))
    for s in A.actions:
        out.append(f"pre {s}: {render(A.pre[s])}")
        out.append(f"post {s}: {A.post[s]}")
    out.append(f"designated: {' '.join(A.designated)}")
    return "\n".join(line.rstrip() for line in out) + "\n"
