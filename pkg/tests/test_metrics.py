import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import SIG, SIG2, chain, model_a, model_b, model_c, pointed_models
from modalmetric import bisim, metrics
from modalmetric.errors import BudgetExceeded, ConditionError, ConvergenceError, FormulaSyntaxError, SignatureError
from modalmetric.formula import TOP, Atom, parse
from modalmetric.generate import random_metric_space, random_model
from modalmetric.kripke import make_model, satisfies

F = Fraction


def descriptor(*texts, sig=SIG):
    return metrics.Descriptor.finite([parse(t, sig) for t in texts], sig)


def test_finite_distance_examples():
    D = descriptor("p", "<a>T")
    w = metrics.WeightFunction.finite([F(1, 2), F(1, 4)])
    iv = metrics.distance(model_a(), model_b(), D, w)
    assert (iv.lower, iv.upper) == (F(1, 4), F(1, 4))
    assert metrics.distance(model_a(), model_a(), D, w).upper == 0
    assert str(iv) == "1/4 1/4"


def test_hamming_example():
    D, w = metrics.hamming_descriptor(SIG2, 2)
    x = make_model(SIG2, ["s"], {}, {"p": ["s"]}, point="s")
    y = make_model(SIG2, ["s"], {}, {"p": ["s"], "q": ["s"]}, point="s")
    assert metrics.distance(x, y, D, w).lower == 1
    D1, w1 = metrics.hamming_descriptor(SIG, 1)
    assert metrics.distance(model_a(), model_b(), D1, w1).upper == 0
    with pytest.raises(ValueError):
        metrics.hamming_descriptor(SIG, 2)


def test_hamming_matches_vector_comparison():
    rng = random.Random(5)
    D, w = metrics.hamming_descriptor(SIG2, 2)
    for _ in range(100):
        x, y = random_model(rng, SIG2), random_model(rng, SIG2)
        expected = sum(
            (x.point in x.model.valuation[p]) != (y.point in y.model.valuation[p]) for p in SIG2.atoms
        )
        assert metrics.distance(x, y, D, w).lower == expected


def test_distance_signature_mismatch():
    D = descriptor("p")
    w = metrics.WeightFunction.finite([1])
    other = make_model(SIG2, ["s"], point="s")
    with pytest.raises(SignatureError):
        metrics.distance(model_a(), other, D, w)


def test_finite_descriptor_rejects_equivalent_entries():
    with pytest.raises(ConditionError):
        descriptor("p", "~~p")
    with pytest.raises(ConditionError):
        descriptor("<a>p", "~[a]~p")


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        metrics.WeightFunction.finite([1, 0])


def test_quotient_examples():
    a, b = model_a(), model_b()
    assert len(metrics.quotient([a, b], descriptor("p"))) == 1
    space = metrics.quotient([a, b], descriptor("p", "<a>T"))
    assert len(space) == 2
    assert space[0].representative is a
    assert len(metrics.quotient([a, b, model_c()], [TOP])) == 1
    with pytest.raises(ValueError):
        metrics.quotient([], descriptor("p"))


def test_quotient_members_agree_with_representative():
    rng = random.Random(8)
    D = descriptor("p", "<a>p", "[a]<a>T")
    models = [random_model(rng, SIG) for _ in range(40)]
    space = metrics.quotient(models, D)
    assert sum(len(x.members) for x in space) == 40
    for point in space:
        for y in point.members:
            for f in D.entries:
                assert satisfies(y, f) == satisfies(point.representative, f)


def test_db_and_dg_examples():
    a, b = model_a(), model_b()
    assert metrics.bisim_metric_dB(a, a) == 0
    assert metrics.bisim_metric_dB(a, b) == 1
    assert metrics.bisim_metric_dB(chain(2), chain(3)) == F(1, 2)
    assert metrics.goranko_metric_dg(a, a) == 0
    assert metrics.goranko_metric_dg(a, b) == F(1, 2)
    not_p = make_model(SIG, ["s"], point="s")
    assert metrics.goranko_metric_dg(a, not_p) == 1
    # failure already at depth 0 still gives the maximal d_B
    assert metrics.bisim_metric_dB(a, not_p) == 1


def test_b_weights_telescope():
    w = metrics.bisim_weights()
    for N in range(1, 30):
        assert sum(2 * w.weight(k) for k in range(N, 400)) + F(1, 400) == w.tail_bound(N)
    assert w.first_level_below(F(1, 16)) == 17


def test_b_distance_examples():
    a, b = model_a(), model_b()
    D, w = metrics.bisim_descriptor_b(SIG, [a, b])
    iv = metrics.distance(a, b, D, w, F(1, 16))
    assert iv.contains(1) and iv.width < F(1, 16)
    iv = metrics.distance(a, a, D, w, F(1, 16))
    assert iv.contains(0) and iv.lower == 0


def test_b_distance_brackets_db():
    rng = random.Random(12)
    pairs = [(random_model(rng, SIG), random_model(rng, SIG)) for _ in range(40)]
    D, w = metrics.bisim_descriptor_b(SIG, [x for pair in pairs for x in pair])
    for x, y in pairs:
        iv = metrics.distance(x, y, D, w, F(1, 64))
        assert iv.contains(metrics.bisim_metric_dB(x, y))
        assert iv.width < F(1, 64)


def test_b_levels_hold_one_formula_per_class():
    models = [model_a(), model_b(), model_c(), chain(2), chain(3)]
    D, _ = metrics.bisim_descriptor_b(SIG, models)
    for n in range(1, 4):
        assert len(D.level(n)) == len(set(bisim.bisim_classes(models, n)))
        for f in D.level(n):
            assert f.depth <= n


def test_infinite_descriptor_needs_tolerance():
    D, w = metrics.bisim_descriptor_b(SIG, [model_a()])
    with pytest.raises(ValueError):
        metrics.distance(model_a(), model_a(), D, w)


def test_non_convergent_tail_is_reported():
    D = metrics.Descriptor(SIG, lambda n: [Atom("p")] if n == 0 else [], first_level=0)
    w = metrics.WeightFunction(weight=lambda n: F(1), tail_bound=lambda n: F(1))
    with pytest.raises(ConvergenceError):
        metrics.distance(model_a(), model_b(), D, w, F(1, 2), max_levels=50)


def test_close_to_home_weights():
    w = metrics.close_to_home_weights(SIG)
    assert w.weight(0) == F(1, 4)
    assert w.weight(1) == F(1, 2016)
    assert 252 * w.weight(1) == F(1, 8)
    assert w.tail_bound(1) == F(1, 4)
    assert w.tail_bound(2) == F(1, 2016)
    # the tail from level 1 never reaches a single level-0 weight
    assert 252 * w.weight(1) + w.tail_bound(2) < w.weight(0)
    # past representable counts the bound freezes instead of failing
    assert w.tail_bound(10) == w.tail_bound(4)


def test_close_to_home_levels():
    D, _ = metrics.close_to_home_descriptor(SIG)
    assert len(D.level(0)) == 4
    assert len(D.level(1)) == 252
    for f in D.level(1)[:20]:
        assert bisim.shallowest_depth(f, SIG) == 1
    with pytest.raises(BudgetExceeded):
        D.level(2)


def test_close_to_home_ordering_small():
    D, w = metrics.close_to_home_descriptor(SIG)
    x = model_b()
    y = make_model(SIG, ["t"], {"a": [("t", "t")]}, {}, point="t")  # differs on p
    z = make_model(SIG, ["t", "r"], {"a": [("t", "r")]}, {"p": ["t", "r"]}, point="t")
    assert bisim.first_difference(x, z) == 2
    dxy = metrics.distance(x, y, D, w, F(1, 1024))
    dxz = metrics.distance(x, z, D, w, F(1, 1024))
    assert dxy.lower > dxz.upper


def test_embedding_examples():
    e = metrics.embed_finite_space(["x", "y", "z"], {("x", "y"): 1, ("x", "z"): 2, ("y", "z"): 2})
    W = {"".join(sorted(k)): v for k, v in e.weights.items()}
    assert W == {"x": F(1, 2), "y": F(1, 2), "z": 1, "xy": 1, "xz": F(1, 2), "yz": F(1, 2)}
    assert e.c == 1
    assert [(x, y, dw) for x, y, _, dw, _ in e.table()] == [("x", "y", 2), ("x", "z", 3), ("y", "z", 3)]
    e = metrics.embed_finite_space(["x", "y", "z"], {("x", "y"): 1, ("x", "z"): 1, ("y", "z"): 1})
    assert set(e.weights.values()) == {F(1, 2)} and e.c == 1
    assert all(e.distance(x, y) == 2 for x, y in itertools.combinations("xyz", 2))


def test_embedding_accepts_matrix():
    e = metrics.embed_finite_space(["x", "y", "z"], [[0, 1, 2], [1, 0, 2], [2, 2, 0]])
    assert e.c == 1


@pytest.mark.parametrize(
    "points, d",
    [
        (["x", "y"], {("x", "y"): 1}),
        (["x", "y", "z"], {("x", "y"): 1, ("x", "z"): 1, ("y", "z"): 3}),
        (["x", "y", "z"], {("x", "y"): 0, ("x", "z"): 1, ("y", "z"): 1}),
        (["x", "y", "z"], {("x", "y"): 1, ("x", "z"): 1}),
        (["x", "y", "z"], [[0, 1, 1], [2, 0, 1], [1, 1, 0]]),
        (["x", "x", "z"], {("x", "z"): 1}),
    ],
)
def test_embedding_rejects_bad_input(points, d):
    with pytest.raises(ConditionError):
        metrics.embed_finite_space(points, d)


@settings(max_examples=40)
@given(st.integers(3, 6), st.randoms(use_true_random=False))
def test_embedding_is_a_shift(n, rnd):
    points, d = random_metric_space(rnd, n)
    e = metrics.embed_finite_space(points, d)
    assert all(v > 0 for v in e.weights.values())
    for x, y, dv, dw, diff in e.table():
        assert diff == e.c


def test_embedding_shift_can_be_negative():
    # equal distances above 2: every d_w is 2, so the shift is 2 - 3
    e = metrics.embed_finite_space(["x", "y", "z"], {("x", "y"): 3, ("x", "z"): 3, ("y", "z"): 3})
    assert e.c == -1
    assert all(diff == e.c for *_, diff in e.table())


def test_descriptor_file():
    text = "metric: custom\n# entries\np @ 1/2\n(p & [a]p) @ 1/8\n<a>T\n"
    df = metrics.loads_descriptor(text, SIG)
    assert df.metric == "custom"
    assert df.weights == (F(1, 2), F(1, 8), None)
    D, w = metrics.descriptor_from_file(df, SIG)
    assert [w.weight(n) for n in range(3)] == [F(1, 2), F(1, 8), 1]
    assert metrics.loads_descriptor("metric: bisim\n", SIG).formulas == ()
    with pytest.raises(FormulaSyntaxError):
        metrics.loads_descriptor("p @ x\n", SIG)
    with pytest.raises(FormulaSyntaxError):
        metrics.loads_descriptor("p @ -1\n", SIG)
    with pytest.raises(FormulaSyntaxError):
        metrics.loads_descriptor("(p &\n", SIG)


@st.composite
def instances(draw):
    rnd = draw(st.randoms(use_true_random=False))
    sig = SIG2 if draw(st.booleans()) else SIG
    models = [draw(pointed_models(sig, 4)) for _ in range(draw(st.integers(2, 5)))]
    from modalmetric.generate import random_formula

    entries = bisim.dedupe_formulas([random_formula(rnd, sig, 2, 4) for _ in range(6)], sig)
    weights = [F(rnd.randint(1, 9), rnd.randint(1, 9)) for _ in entries]
    return sig, models, entries, weights


@settings(max_examples=60, deadline=None)
@given(instances())
def test_metric_axioms_on_quotient(inst):
    sig, models, entries, weights = inst
    D = metrics.Descriptor.finite(entries, sig, check=False)
    w = metrics.WeightFunction.finite(weights)
    space = metrics.quotient(models, D)
    m = metrics.distance_matrix(space, D, w)
    n = len(space)
    for i in range(n):
        assert m[i][i] == 0
        for j in range(n):
            assert m[i][j] == m[j][i]
            assert (m[i][j] == 0) == (i == j)
            for k in range(n):
                assert m[i][k] <= m[i][j] + m[j][k]


def test_threshold_stop_keeps_a_valid_bracket():
    rng = random.Random(14)
    pairs = [(random_model(rng, SIG), random_model(rng, SIG)) for _ in range(15)]
    pairs += [(x, x) for x, _ in pairs[:3]]
    D, w = metrics.bisim_descriptor_b(SIG, [x for pair in pairs for x in pair])
    cut = F(1, 4)
    for x, y in pairs:
        full = metrics.distance(x, y, D, w, F(1, 64))
        early = metrics.distance(x, y, D, w, F(1, 64), threshold=cut)
        assert early.lower <= full.lower and early.upper >= full.upper
        assert early.contains(metrics.bisim_metric_dB(x, y))
        # the early bracket decides the comparison with the threshold
        assert (early.lower >= cut) == (full.lower >= cut) or early == full
        assert early.lower >= cut or early.upper < cut or early == full
