import itertools
import random
from fractions import Fraction

import pytest

from conftest import SIG, SIG2, chain, model_a, model_b, model_c
from modalmetric import bisim, dynamics, metrics
from modalmetric.errors import BudgetExceeded, ConditionError, FormulaSyntaxError, SignatureError
from modalmetric.formula import TOP, ConjunctiveClause, Neg, parse
from modalmetric.generate import bisimilar_copy, random_action_model, random_model
from modalmetric.kripke import make_model, satisfies, successor_closure

F = Fraction


def not_p():
    return make_model(SIG, ["s"], point="s")


def announce_p(sig=SIG):
    return dynamics.make_action_model(sig, ["s"], {a: [("s", "s")] for a in sig.agents}, pre={"s": "p"})


def announcement_pair(sig=SIG):
    return dynamics.make_action_model(
        sig, ["yes", "no"], {a: [("yes", "yes"), ("no", "no")] for a in sig.agents}, pre={"yes": "p", "no": "~p"}
    )


def toggle(sig=SIG):
    """Flip p; agents cannot tell which branch happened."""
    every = [(s, t) for s in ("on", "off") for t in ("on", "off")]
    return dynamics.make_action_model(
        sig, ["on", "off"], {a: every for a in sig.agents},
        pre={"on": "p", "off": "~p"}, post={"on": "~p", "off": "p"},
    )


def b_metric(sample, A):
    images = [dynamics.product_update(x, A) for x in sample]
    return metrics.bisim_descriptor_b(SIG, successor_closure(list(sample) + images))


# ---------------------------------------------------------- product update


def naive_update(x, A):
    """Product update written straight from the definition, on (state, action) tuples."""
    m = x.model
    states = {(s, a) for s in m.states for a in A.actions if satisfies(m.at(s), A.pre[a])}
    rel = {
        ag: {(u, v) for u in states for v in states if (u[0], v[0]) in m.relations[ag] and (u[1], v[1]) in A.relations[ag]}
        for ag in m.signature.agents
    }
    val = {}
    for p in m.signature.atoms:
        val[p] = {
            (s, a) for (s, a) in states
            if p in A.post[a].positive or (s in m.valuation[p] and p not in A.post[a].negative)
        }
    return states, rel, val


def test_update_matches_definition():
    rng = random.Random(41)
    checked = 0
    for _ in range(60):
        x = random_model(rng, SIG2)
        A = random_action_model(rng, SIG2)
        try:
            y = dynamics.product_update(x, A)
        except ConditionError:
            continue
        checked += 1
        states, rel, val = naive_update(x, A)
        name = {u: f"({u[0]},{u[1]})" for u in states}
        assert set(y.model.states) == set(name.values())
        for ag in SIG2.agents:
            assert y.model.relations[ag] == {(name[u], name[v]) for u, v in rel[ag]}
        for p in SIG2.atoms:
            assert y.model.valuation[p] == {name[u] for u in val[p]}
    assert checked > 40


def test_identity_update_is_bisimilar():
    rng = random.Random(42)
    for _ in range(30):
        x = random_model(rng, SIG2)
        assert bisim.are_bisimilar(x, dynamics.product_update(x, dynamics.identity_action(SIG2)))


def test_announcement_on_mc():
    y = dynamics.product_update(model_c(), announce_p())
    assert y.model.states == ("(u,s)",)
    assert y.point == "(u,s)"
    assert satisfies(y, parse("p & [a]~T", SIG))
    assert bisim.are_bisimilar(y, model_a())


def test_ontic_action_sets_atom():
    A = dynamics.make_action_model(SIG, ["e"], {"a": [("e", "e")]}, post={"e": "p"})
    y = dynamics.product_update(not_p(), A)
    assert satisfies(y, parse("p", SIG))
    A = dynamics.make_action_model(SIG, ["e"], post={"e": "~p"})
    assert not satisfies(dynamics.product_update(model_a(), A), parse("p", SIG))


def test_update_errors():
    with pytest.raises(ConditionError, match="exhaustive"):
        dynamics.product_update(not_p(), announce_p())
    both = dynamics.make_action_model(SIG, ["s", "t"], pre={"t": "p"})
    with pytest.raises(ConditionError, match="deterministic"):
        dynamics.product_update(model_a(), both)
    with pytest.raises(SignatureError):
        dynamics.product_update(make_model(SIG2, ["s"], point="s"), announce_p())


def test_action_model_validation():
    with pytest.raises(ValueError):
        dynamics.make_action_model(SIG, [])
    with pytest.raises(ValueError):
        dynamics.make_action_model(SIG, ["s"], designated=["t"])
    with pytest.raises(ValueError):
        dynamics.make_action_model(SIG, ["s"], designated=[])
    with pytest.raises(ValueError):
        dynamics.make_action_model(SIG, ["s"], {"a": [("s", "t")]})
    with pytest.raises(SignatureError):
        dynamics.make_action_model(SIG, ["s"], {"b": [("s", "s")]})
    with pytest.raises(SignatureError):
        dynamics.make_action_model(SIG, ["s"], post={"s": ConjunctiveClause(frozenset({"q"}))})
    with pytest.raises(ValueError):
        dynamics.make_action_model(SIG, ["s"], post={"s": "p | ~p"})
    A = dynamics.make_action_model(SIG, ["s", "t"], designated=["s"])
    assert A.pre["t"] == TOP and A.post["t"] == ConjunctiveClause()
    assert A.relations["a"] == frozenset()


def test_update_preserves_bisimilarity():
    rng = random.Random(43)
    done = 0
    while done < 60:
        x = random_model(rng, SIG2)
        x2 = bisimilar_copy(rng, x)
        A = random_action_model(rng, SIG2)
        assert bisim.are_bisimilar(x, x2)
        y, y2 = dynamics.product_update(x, A), dynamics.product_update(x2, A)
        assert bisim.are_bisimilar(y, y2)
        done += 1


# --------------------------------------------------------------- conditions


def test_condition_examples():
    sample = [model_a(), model_b(), model_c(), not_p(), chain(3)]
    r = dynamics.check_conditions(announcement_pair(), sample)
    assert r.deterministic and r.exhaustive and r.clean
    assert r.closing_is_approximation and r.closing_depth == 3
    r = dynamics.check_conditions(announce_p(), sample)
    assert not r.exhaustive and r.failures
    both = dynamics.make_action_model(SIG, ["s", "t"], pre={"t": "p"})
    r = dynamics.check_conditions(both, [model_a()])
    assert not r.deterministic
    assert r.distinct_preconditions == 2


def test_closing_is_checked_against_the_sample():
    A = dynamics.make_action_model(SIG, ["e"], {"a": [("e", "e")]}, post={"e": "p"})
    assert dynamics.check_conditions(A, [model_a()]).closing
    r = dynamics.check_conditions(A, [not_p()])
    assert not r.closing and not r.clean


def test_validity_mode_uses_all_models():
    # over this sample p and <a>T never overlap, but some model has both
    A = dynamics.make_action_model(SIG, ["s", "t"], pre={"s": "p", "t": "~p | <a>T"})
    sample = [model_a(), not_p()]
    assert dynamics.check_conditions(A, sample).deterministic
    r = dynamics.check_conditions(A, sample, validity=True)
    assert r.validity_checked and not r.deterministic and r.exhaustive
    r = dynamics.check_conditions(announcement_pair(), sample, validity=True)
    assert r.deterministic and r.exhaustive


# --------------------------------------------------------------- disjointing


def test_disjointify_splits_top():
    A = dynamics.make_action_model(SIG, ["s", "t"], pre={"s": "p"}, post={"t": "~p"}, designated=["t"])
    B = dynamics.disjointify(A)
    assert dynamics.pairwise_disjoint(B)
    assert not dynamics.pairwise_disjoint(A)
    t_copies = [c for c in B.actions if c.startswith("t.")]
    assert len(t_copies) == 2
    pres = [B.pre[c] for c in t_copies]
    assert any(bisim.equivalent(f, parse("p", SIG), SIG) for f in pres)
    assert any(bisim.equivalent(f, parse("~p", SIG), SIG) for f in pres)
    assert all(B.post[c] == A.post["t"] for c in t_copies)
    assert set(B.designated) == set(t_copies)
    s_copies = [c for c in B.actions if c.startswith("s.")]
    assert len(s_copies) == 1 and bisim.equivalent(B.pre[s_copies[0]], parse("p", SIG), SIG)


def test_disjointify_keeps_disjoint_preconditions():
    A = announcement_pair()
    B = dynamics.disjointify(A)
    assert len(B.actions) == 2
    for c in B.actions:
        orig = c.split(".")[0]
        assert bisim.equivalent(B.pre[c], A.pre[orig], SIG)


def test_disjointify_lifts_relations():
    A = dynamics.make_action_model(SIG, ["s", "t"], {"a": [("s", "t")]}, pre={"t": "p"})
    B = dynamics.disjointify(A)
    for c, d in itertools.product(B.actions, repeat=2):
        assert ((c, d) in B.relations["a"]) == ((c.split(".")[0], d.split(".")[0]) in A.relations["a"])


def test_disjointify_preserves_the_update():
    rng = random.Random(44)
    for _ in range(30):
        A = random_action_model(rng, SIG)
        B = dynamics.disjointify(A)
        assert dynamics.pairwise_disjoint(B)
        for _ in range(3):
            x = random_model(rng, SIG)
            assert bisim.are_n_bisimilar(dynamics.product_update(x, A), dynamics.product_update(x, B), 3)


def test_disjointify_limits():
    pres = {f"s{k}": f"p & [a]{'<a>' * k}T" for k in range(dynamics.MAX_PRECONDITIONS + 1)}
    A = dynamics.make_action_model(SIG, list(pres), pre=pres)
    with pytest.raises(BudgetExceeded):
        dynamics.disjointify(A)
    A = dynamics.make_action_model(SIG, ["s"], pre={"s": "p & ~p"})
    with pytest.raises(ConditionError):
        dynamics.disjointify(A)


def test_signed_conjunctions_cover_the_models():
    fs = [parse(t, SIG) for t in ("p", "<a>T", "[a]p")]
    cells = list(dynamics.signed_conjunctions(fs, SIG))
    # ~<a>T forces [a]p, so two sign patterns are inconsistent
    assert len(cells) == 6
    rng = random.Random(45)
    for _ in range(30):
        x = random_model(rng, SIG)
        assert sum(satisfies(x, psi) for _, psi in cells) == 1


# ---------------------------------------------------------------- clean maps


def test_clean_map_examples():
    sample = [model_a(), model_b(), model_c(), not_p(), chain(3)]
    ident = dynamics.CleanMap(dynamics.identity_action(SIG), sample)
    assert ident.report.clean
    for point in ident.space:
        assert dynamics.apply_clean_map(ident, point) == point
    ann = dynamics.CleanMap(announcement_pair(), sample)
    c_class = dynamics.locate(model_c(), ann.space)
    a_class = dynamics.locate(model_a(), ann.space)
    assert c_class != a_class
    assert dynamics.apply_clean_map(ann, c_class) == a_class


def test_clean_map_reports_leaving_the_space():
    A = dynamics.make_action_model(SIG, ["e"], {"a": [("e", "e")]}, post={"e": "p"})
    f = dynamics.CleanMap(A, [not_p()])
    out = dynamics.apply_clean_map(f, f.space[0])
    assert out.class_id == -1
    assert satisfies(out.representative, parse("p", SIG))
    assert dynamics.locate(model_a(), ()) is None


def test_clean_map_is_well_defined():
    rng = random.Random(46)
    for _ in range(30):
        x = random_model(rng, SIG)
        x2 = bisimilar_copy(rng, x)
        A = random_action_model(rng, SIG)
        f = dynamics.CleanMap(A, [x, x2, dynamics.product_update(x, A)])
        assert dynamics.locate(x, f.space) == dynamics.locate(x2, f.space)
        hits = {dynamics.locate(f(z), f.space) for z in (x, x2)}
        assert len(hits) == 1 and None not in hits
        assert dynamics.apply_clean_map(f, dynamics.locate(x, f.space)) in hits


def test_swapped_variants():
    A = dynamics.make_action_model(
        SIG, ["yes", "no", "yes2"], pre={"yes": "p", "no": "~p", "yes2": "p"}, designated=["yes", "no"]
    )
    sample = [model_a(), not_p(), model_c()]
    variants = dynamics.swapped_variants(A, sample)
    assert [v.designated for v in variants] == [("no", "yes2")]
    assert variants[0].report.clean
    B = dynamics.make_action_model(SIG, ["yes", "other"], pre={"yes": "p", "other": "<a>T"}, designated=["yes"])
    (v,) = dynamics.swapped_variants(B, sample)
    assert v.designated == ("yes", "other")
    assert not v.report.deterministic and not v.report.exhaustive


# ------------------------------------------------------------------ modulus


def tiny_descriptor():
    """Levels p, <a>T with weights 1/2, 1/4, treated as representative."""
    entries = [parse("p", SIG), parse("<a>T", SIG)]
    D = metrics.Descriptor(
        SIG, lambda n: (entries[n],), first_level=0, last_level=1, determining_level=lambda m: min(m, 1)
    )
    return D, metrics.WeightFunction.finite([F(1, 2), F(1, 4)])


def test_modulus_explicit_and_depth_modes_agree():
    D, w = tiny_descriptor()
    for A in (announcement_pair(), toggle(), dynamics.identity_action(SIG)):
        for eps in (F(1), F(1, 2), F(1, 8)):
            fast = dynamics.continuity_modulus(A, D, w, eps)
            slow = dynamics.continuity_modulus(A, D, w, eps, explicit=True)
            assert fast == slow > 0
    assert dynamics.continuity_modulus(announcement_pair(), D, w, F(1, 8)) == F(1, 4)
    # the whole descriptor weighs less than 1: nothing to preserve
    assert dynamics.continuity_modulus(toggle(), D, w, 1) == 1


def test_modulus_explicit_mode_is_capped():
    D, w = tiny_descriptor()
    with pytest.raises(BudgetExceeded):
        dynamics.continuity_modulus(announcement_pair(), D, w, F(1, 8), explicit=True, cap=8)


def test_modulus_rejects_bad_input():
    D, w = tiny_descriptor()
    with pytest.raises(ValueError):
        dynamics.continuity_modulus(announcement_pair(), D, w, 0)
    plain = metrics.Descriptor.finite([parse("p", SIG)], SIG)
    with pytest.raises(ValueError):
        dynamics.continuity_modulus(announcement_pair(), plain, metrics.WeightFunction.finite([1]), F(1, 2))


def test_modulus_is_positive_and_monotone():
    sample = [model_a(), model_b(), model_c(), not_p(), chain(3)]
    for A in (announcement_pair(), toggle(), dynamics.identity_action(SIG)):
        D, w = b_metric(sample, A)
        f = dynamics.CleanMap(A, sample)
        # the radius shrinks doubly exponentially with the nesting of the
        # entries, so the grid stops at 1/8
        grid = [F(1), F(1, 2), F(1, 3), F(1, 4), F(1, 8)]
        deltas = [dynamics.continuity_modulus(f, D, w, eps) for eps in grid]
        assert all(d > 0 for d in deltas)
        assert all(a >= b for a, b in zip(deltas, deltas[1:]))


def test_probe_bisimilar_pairs_pass():
    rng = random.Random(47)
    xs = [random_model(rng, SIG) for _ in range(10)]
    pairs = [(x, bisimilar_copy(rng, x)) for x in xs]
    A = announcement_pair()
    D, w = b_metric([x for pair in pairs for x in pair], A)
    eps = F(1, 4)
    delta = dynamics.continuity_modulus(A, D, w, eps)
    report = dynamics.probe_continuity(A, D, w, eps, delta, pairs)
    assert report.ok and report.checked == report.in_scope == 10


def test_probe_random_pairs():
    rng = random.Random(48)
    pairs = []
    for _ in range(30):
        x = random_model(rng, SIG)
        pairs.append((x, bisimilar_copy(rng, x) if rng.random() < 0.3 else random_model(rng, SIG)))
    A = toggle()
    D, w = b_metric([x for pair in pairs for x in pair], A)
    for eps in (F(1, 2), F(1, 4)):
        delta = dynamics.continuity_modulus(A, D, w, eps)
        assert dynamics.probe_continuity(A, D, w, eps, delta, pairs).ok


def test_probe_reports_oversized_delta():
    pairs = [(model_a(), not_p())]
    A = announcement_pair()
    D, w = b_metric([model_a(), not_p()], A)
    report = dynamics.probe_continuity(A, D, w, F(1, 64), 1, pairs)
    assert not report.ok
    (v,) = report.violations
    assert v.index == 0 and v.input_distance.lower < 1 and v.output_distance.upper >= F(1, 64)


# -------------------------------------------------------------- file format


def test_action_model_file_round_trip():
    rng = random.Random(49)
    for _ in range(20):
        A = random_action_model(rng, SIG2)
        B = dynamics.loads_action_model(dynamics.dumps_action_model(A))
        assert B.actions == A.actions and B.designated == A.designated
        assert B.relations == A.relations and B.post == A.post
        assert all(B.pre[s] == A.pre[s] for s in A.actions)


def test_action_model_file_defaults():
    text = "sig atoms: p\nsig agents: a\nactions: s t\nrel a: s->s\npre s: p\ndesignated: s\n"
    A = dynamics.loads_action_model(text)
    assert A.pre["t"] == TOP and A.post["s"] == ConjunctiveClause()
    assert A.relations["a"] == {("s", "s")}
    y = dynamics.product_update(model_c(), A)
    assert bisim.are_bisimilar(y, model_a())


@pytest.mark.parametrize(
    "text",
    [
        "sig atoms: p\nsig agents: a\ndesignated: s\n",
        "sig atoms: p\nsig agents: a\nactions: s\n",
        "sig atoms: p\nsig agents: a\nactions: s\nrel a: s-s\ndesignated: s\n",
        "sig atoms: p\nsig agents: a\nactions: s\npre s: (p\ndesignated: s\n",
        "sig atoms: p\nsig agents: a\nactions: s\npost s: p | ~p\ndesignated: s\n",
        "sig atoms: p\nsig agents: a\nactions: s\nwhat: s\ndesignated: s\n",
        "sig atoms: p\nsig agents: a\nactions: s\ndesignated: t\n",
        "sig atoms: p\nsig agents: a\nactions: s\nno colon here\n",
    ],
)
def test_action_model_file_errors(text):
    with pytest.raises(FormulaSyntaxError):
        dynamics.loads_action_model(text)


def test_negated_precondition_is_kept_verbatim():
    A = dynamics.make_action_model(SIG, ["s"], pre={"s": Neg(parse("p", SIG))})
    assert A.pre["s"] == parse("~p", SIG)
