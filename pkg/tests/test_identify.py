import itertools
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcid.cbn import canonical_dag, observable_kernel, oracle_do, random_model
from tcid.graph import NotFixableError, fix_graph, fixable, graph, latent_project, reachable_intrinsic
from tcid.identify import (
    BOW,
    Fix,
    IdentifyError,
    IdResult,
    Marginalize,
    ObsRef,
    Product,
    bow_models,
    bow_witness,
    emit_formula,
    evaluate,
    fix_chain,
    fix_kernel,
    fix_kernel_division,
    fix_sequence,
    identify_and_check,
    interventional_gap,
    markov_blanket,
    one_line_identify,
    oracle_sweep,
    targets,
)
from tcid.instances import bow, frontdoor, frontdoor_model
from tcid.kernel import FiniteKernel, FiniteSpace, disintegrate, marginalize

from test_graph import all_fixing_orders, random_admg


def positive_obs(g, seed, cards=2):
    m = random_model(canonical_dag(g), random.Random(seed), cards)
    return observable_kernel(m)


class TestFixKernel:
    def test_single_node(self):
        k = FiniteKernel.distribution(FiniteSpace.of(r=(0, 1)), {0: F(1, 3), 1: F(2, 3)})
        out = fix_kernel(k, "r", graph(observed="r"))
        assert out.target.names == () and out.source.names == ("r",)
        assert all(x == 1 for x in out.table.flat)

    def test_front_door_c(self):
        obs = observable_kernel(frontdoor_model())
        fixed = fix_kernel(obs, "c", frontdoor())
        pa = marginalize(obs, ["a"])
        pb = disintegrate(marginalize(obs, ["a", "b", "c"]), ["a", "c"])
        for a, b, c in itertools.product((0, 1), repeat=3):
            want = pa.mass({"a": a}) * pb.mass({"b": b}, {"a": a, "c": c})
            assert fixed.mass({"a": a, "b": b}, {"c": c}) == want
        assert fixed == fix_kernel_division(obs, "c", frontdoor())

    def test_front_door_orders_agree(self):
        obs = observable_kernel(frontdoor_model())
        g = frontdoor()
        k1, _ = fix_sequence(obs, ["c", "a"], g)
        orders = list(all_fixing_orders(g, frozenset({"b"})))
        assert ("c", "a") in orders
        for order in orders:
            assert fix_sequence(obs, order, g)[0] == k1

    def test_errors(self):
        obs = observable_kernel(frontdoor_model())
        with pytest.raises(NotFixableError):
            fix_kernel(obs, "a", frontdoor())
        with pytest.raises(IdentifyError):
            fix_kernel(obs, "c", bow())

    def test_markov_blanket(self):
        assert markov_blanket(frontdoor(), "b") == {"a", "c"}
        assert markov_blanket(frontdoor(), "c") == {"a"}

    def test_division_needs_positivity(self):
        k = FiniteKernel.distribution(FiniteSpace.of(r=(0, 1)), {0: 1, 1: 0})
        with pytest.raises(IdentifyError):
            fix_kernel_division(k, "r", graph(observed="r"))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 4), st.integers(0, 1))
def test_division_form_agrees(seed, n, n_in):
    g = random_admg(random.Random(seed), n, n_in)
    obs = positive_obs(g, seed)
    for r in sorted(g.observed):
        if fixable(g, r):
            assert fix_kernel(obs, r, g) == fix_kernel_division(obs, r, g)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(2, 5))
def test_fixing_confluence(seed, n):
    g = random_admg(random.Random(seed), n, 0, 0.5)
    obs = positive_obs(g, seed)
    rng = random.Random(seed)
    D = frozenset(v for v in sorted(g.observed) if rng.random() < 0.5) or frozenset(sorted(g.observed)[-1:])
    kernels = [fix_sequence(obs, order, g)[0] for order in itertools.islice(all_fixing_orders(g, D), 24)]
    assert all(k == kernels[0] for k in kernels[1:])


class TestFormula:
    def test_obsref(self):
        assert emit_formula(ObsRef(graph(observed="a", inputs=["I"], directed=[("I", "a")]))) == "P(x_V ‖ x_I)"
        assert emit_formula(ObsRef(frontdoor())) == "P(x_V)"

    def test_front_door(self):
        res = one_line_identify(frontdoor(), {"b"}, {"a"})
        assert res.identifiable
        assert res.formula_string() == "Σ_{x_c} φ_{a,b}(P(x_V)) · φ_{a,c}(P(x_V))"
        assert emit_formula(res.formula, nested=True) == "Σ_{x_c} φ_a(φ_b(P(x_V))) · φ_a(φ_c(P(x_V)))"

    def test_nested_rendering(self):
        chain = fix_chain(frontdoor(), ("c", "a"))
        assert emit_formula(chain, nested=True) == "φ_a(φ_c(P(x_V)))"
        assert emit_formula(chain) == "φ_{a,c}(P(x_V))"

    def test_marginalize_over_nothing(self):
        e = Marginalize(frozenset(), ObsRef(frontdoor()))
        assert emit_formula(e) == "P(x_V)"
        obs = observable_kernel(frontdoor_model())
        assert evaluate(e, obs, set()) == obs.reorder(target=sorted(obs.target.names))

    def test_targets(self):
        res = one_line_identify(frontdoor(), {"b"}, {"a"})
        assert targets(res.formula) == {"b"}
        assert targets(fix_chain(frontdoor(), ("c", "a"))) == {"b"}

    def test_fix_nodes_validate(self):
        with pytest.raises(IdentifyError):
            Fix("a", ObsRef(frontdoor()), frontdoor())

    def test_result_invariants(self):
        with pytest.raises(IdentifyError):
            IdResult("identifiable")
        with pytest.raises(IdentifyError):
            IdResult("not_identifiable", formula=ObsRef(bow()))

    def test_graph_coherence(self):
        e = fix_chain(frontdoor(), ("c", "a"))
        assert e.graph == fix_graph(frontdoor(), "c") and e.child.graph == frontdoor()

    def test_product_rendering(self):
        p = Product((ObsRef(frontdoor()), ObsRef(frontdoor())))
        assert emit_formula(p) == "P(x_V) · P(x_V)"


class TestIdentify:
    def test_bow(self):
        res = one_line_identify(bow(), {"b"}, {"a"})
        assert not res.identifiable and res.failing_district == {"b"}
        assert res.formula_string() is None

    def test_downstream_intervention(self):
        g = graph(observed="ab", directed=[("a", "b")])
        res = one_line_identify(g, {"a"}, {"b"})
        assert res.identifiable
        obs = positive_obs(g, 1)
        got = evaluate(res.formula, obs, {"b"})
        pa = marginalize(obs, ["a"])
        for a, b in itertools.product((0, 1), repeat=2):
            assert got.mass({"a": a}, {"b": b}) == pa.mass({"a": a})

    def test_unconfounded_effect(self):
        g = graph(observed="ab", directed=[("a", "b")])
        obs = positive_obs(g, 2)
        res = one_line_identify(g, {"b"}, {"a"})
        assert evaluate(res.formula, obs, {"a"}) == disintegrate(obs, ["a"])

    def test_front_door_against_oracle(self):
        m = frontdoor_model()
        res, ok = identify_and_check(m, {"b"}, {"a"})
        assert res.identifiable and ok

    def test_errors(self):
        with pytest.raises(IdentifyError):
            one_line_identify(frontdoor(), {"a"}, {"a"})
        with pytest.raises(IdentifyError):
            one_line_identify(frontdoor(), set(), {"a"})
        with pytest.raises(IdentifyError):
            one_line_identify(BOW, {"b"}, {"a"})

    def test_evaluate_rejects_non_positive(self):
        g = graph(observed="ab", directed=[("a", "b")])
        res = one_line_identify(g, {"b"}, {"a"})
        k = FiniteKernel.distribution(FiniteSpace.of(a=(0, 1), b=(0, 1)), {(0, 0): 1})
        with pytest.raises(IdentifyError):
            evaluate(res.formula, k, {"a"})

    def test_inputs(self):
        g = graph(observed="abc", inputs=["I"], directed=[("I", "a"), ("a", "c"), ("c", "b")], bidirected=[("a", "b")])
        m = random_model(canonical_dag(g), random.Random(5), 2)
        res, ok = identify_and_check(m, {"b"}, {"a"})
        assert res.formula_string() == "Σ_{x_c} φ_{a,b}(P(x_V ‖ x_I)) · φ_{a,c}(P(x_V ‖ x_I))"
        assert ok


def test_small_oracle_sweep():
    graphs = [frontdoor(), bow(), graph(observed="abc", directed=[("a", "b"), ("b", "c")], bidirected=[("a", "c")])]
    rep = oracle_sweep(graphs, models_per_graph=3, seed=9)
    assert rep.graphs == 3 and rep.checks > 0 and not rep.mismatches


@pytest.mark.parametrize("seed", range(12))
def test_ternary_oracle(seed):
    g = random_admg(random.Random(seed), 4, 0, 0.5)
    rep = oracle_sweep([g], models_per_graph=1, seed=seed, cards=3)
    assert not rep.mismatches


class TestBowWitness:
    FROZEN = dict(
        pu=F(1, 4),
        pa=(F(1, 4), F(3, 4)),
        pb=((F(1, 4), F(1, 4)), (F(1, 4), F(3, 4))),
    )

    def test_frozen_constants(self):
        m1, m2 = bow_models(**self.FROZEN)
        assert observable_kernel(m1) == observable_kernel(m2)
        assert interventional_gap(m1, m2) == F(1, 8)
        assert interventional_gap(m1, m2) >= F(1, 20)

    def test_search_reproduces_constants(self):
        m1, m2 = bow_witness()
        f1, f2 = bow_models(**self.FROZEN)
        assert observable_kernel(m1) == observable_kernel(f1)
        assert oracle_do(m1, {"a"}) == oracle_do(f1, {"a"})
        assert oracle_do(m2, {"a"}) == oracle_do(f2, {"a"})

    def test_bow_not_identifiable(self):
        assert not one_line_identify(latent_project(BOW), {"b"}, {"a"}).identifiable
        assert reachable_intrinsic(latent_project(BOW), {"b"}).status == "not_reachable"
