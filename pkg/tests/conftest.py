import sys
import random

import pytest
from hypothesis import strategies as st

from modalmetric.formula import TOP, And, Atom, Box, Diamond, Implies, Neg, Or, Signature
from modalmetric.kripke import make_model

SIG = Signature(("p",), ("a",))
SIG2 = Signature(("p", "q"), ("a",))


def model_a():
    return make_model(SIG, ["s"], {}, {"p": ["s"]}, point="s")


def model_b():
    return make_model(SIG, ["t"], {"a": [("t", "t")]}, {"p": ["t"]}, point="t")


def model_c():
    return make_model(SIG, ["u", "v"], {"a": [("u", "v")]}, {"p": ["u"]}, point="u")


def chain(n, sig=SIG):
    """s0 -> s1 -> ... -> s{n-1}, p true everywhere."""
    states = [f"s{k}" for k in range(n)]
    rel = {"a": [(states[k], states[k + 1]) for k in range(n - 1)]}
    return make_model(sig, states, rel, {p: states for p in sig.atoms}, point="s0")


@pytest.fixture
def sig():
    return SIG


@pytest.fixture
def rng():
    return random.Random(20240917)


@st.composite
def pointed_models(draw, sig=SIG, max_states=4):
    n = draw(st.integers(1, max_states))
    states = [f"s{k}" for k in range(n)]
    pairs = [(s, t) for s in states for t in states]
    rel = {a: draw(st.sets(st.sampled_from(pairs))) for a in sig.agents}
    val = {p: draw(st.sets(st.sampled_from(states))) for p in sig.atoms}
    return make_model(sig, states, rel, val, point=draw(st.sampled_from(states)))


def formulas(sig=SIG, depth=2):
    leaves = st.one_of(st.just(TOP), st.sampled_from([Atom(p) for p in sig.atoms]))
    if depth == 0:
        return st.recursive(
            leaves,
            lambda kids: st.one_of(
                kids.map(Neg),
                st.tuples(kids, kids).map(lambda t: And(*t)),
                st.tuples(kids, kids).map(lambda t: Or(*t)),
                st.tuples(kids, kids).map(lambda t: Implies(*t)),
            ),
            max_leaves=4,
        )
    inner = formulas(sig, depth - 1)
    agents = st.sampled_from(sig.agents)
    modal = st.one_of(
        st.tuples(agents, inner).map(lambda t: Box(*t)),
        st.tuples(agents, inner).map(lambda t: Diamond(*t)),
    )
    base = st.one_of(leaves, modal, inner)
    return st.recursive(
        base,
        lambda kids: st.one_of(
            kids.map(Neg),
            st.tuples(kids, kids).map(lambda t: And(*t)),
            st.tuples(kids, kids).map(lambda t: Or(*t)),
            st.tuples(kids, kids).map(lambda t: Implies(*t)),
        ),
        max_leaves=4,
    )


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
