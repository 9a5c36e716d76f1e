import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcid.cbn import random_ldag
from tcid.graph import (
    GraphError,
    MixedGraph,
    NodeKind,
    NotFixableError,
    admgs_up_to_isomorphism,
    fix_graph,
    fixable,
    graph,
    id_separated,
    input_name,
    latent_project,
    manipulate_hard,
    manipulate_soft,
    reachable_intrinsic,
    structural,
)
from tcid.instances import asymmetry_graph, bow, chain, frontdoor, frontdoor_dag, triangle


def random_admg(rng: random.Random, n_obs: int, n_in: int = 0, p: float = 0.5) -> MixedGraph:
    obs = list("abcde"[:n_obs])
    rng.shuffle(obs)
    ins = [f"I{i}" for i in range(n_in)]
    directed = [(x, y) for i, x in enumerate(obs) for y in obs[i + 1:] if rng.random() < p]
    directed += [(i, y) for i in ins for y in obs if rng.random() < p]
    bidirected = [(x, y) for x, y in itertools.combinations(obs, 2) if rng.random() < p / 2]
    return graph(observed=obs, inputs=ins, directed=directed, bidirected=bidirected)


admg_seeds = st.tuples(st.integers(0, 10**9), st.integers(1, 5), st.integers(0, 2))


def _admg(seed_tuple):
    seed, n, k = seed_tuple
    return random_admg(random.Random(seed), n, k)


# -- brute-force reference for id-separation


def _edges(g: MixedGraph):
    """Edges as ``(u, v, arrowhead_at_u, arrowhead_at_v)`` in both orientations."""
    out = []
    for u, v in g.directed:
        out += [(u, v, False, True), (v, u, True, False)]
    for u, v in g.bidirected:
        out += [(u, v, True, True), (v, u, True, True)]
    return out


def brute_force_separated(g: MixedGraph, A, B, C) -> bool:
    A, B, C = set(A), set(B), set(C)
    targets = B | g.inputs
    edges = _edges(g)
    adj = {n: [e for e in edges if e[0] == n] for n in g.nodes}

    def blocked(nodes, marks):
        if nodes[0] in C or nodes[-1] in C:
            return True
        for i in range(1, len(nodes) - 1):
            collider = marks[i - 1][1] and marks[i][0]
            v = nodes[i]
            if collider and not (g.descendants(v) & C):
                continue
            if collider:
                continue
            if v in C:
                return True
        for i in range(1, len(nodes) - 1):
            collider = marks[i - 1][1] and marks[i][0]
            if collider and not (g.descendants(nodes[i]) & C):
                return True
        return False

    for a in A:
        if a in targets and a not in C:
            return False
        stack = [([a], [])]
        while stack:
            nodes, marks = stack.pop()
            last = nodes[-1]
            if len(nodes) > 1 and last in targets and not blocked(nodes, marks):
                return False
            for _, v, hu, hv in adj[last]:
                if v not in nodes:
                    stack.append((nodes + [v], marks + [(hu, hv)]))
    return True


class TestConstruction:
    def test_invariants(self):
        with pytest.raises(GraphError):
            graph(observed="ab", directed=[("a", "b"), ("b", "a")])
        with pytest.raises(GraphError):
            graph(observed="a", inputs=["I"], directed=[("a", "I")])
        with pytest.raises(GraphError):
            graph(observed="a", inputs=["I"], bidirected=[("a", "I")])
        with pytest.raises(GraphError):
            graph(observed="ab", latent=["u"], directed=[("u", "a")], bidirected=[("a", "b")])
        with pytest.raises(GraphError):
            graph(observed="a", directed=[("a", "a")])

    def test_bidirected_edges_are_unordered(self):
        assert graph(observed="ab", bidirected=[("b", "a")]) == graph(observed="ab", bidirected=[("a", "b")])

    def test_json_round_trip(self):
        g = asymmetry_graph()
        text = g.to_json()
        assert MixedGraph.from_json(text) == g
        assert MixedGraph.from_json(text).to_json() == text

    def test_unknown_nodes_rejected(self):
        with pytest.raises(GraphError):
            triangle().parents("z")


class TestLatentProjection:
    def test_positivity_example_graph(self):
        g = graph(observed="abc", latent=["u"], directed=[("u", "b"), ("u", "c"), ("b", "c"), ("c", "a")])
        p = latent_project(g)
        assert p.directed == {("b", "c"), ("c", "a")}
        assert p.bidirected == {("b", "c")}
        assert not p.latent

    def test_no_latents_is_identity(self):
        assert latent_project(triangle()) == triangle()

    def test_front_door(self):
        assert latent_project(frontdoor_dag()) == frontdoor()

    def test_latent_chains(self):
        g = graph(observed="ab", latent=["u", "w"], directed=[("a", "u"), ("u", "w"), ("w", "b"), ("u", "b")])
        assert latent_project(g).directed == {("a", "b")}
        assert latent_project(g).bidirected == set()

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_commutes_with_hard_manipulation(self, seed):
        rng = random.Random(seed)
        g = random_ldag(rng, 4, 2, 1)
        A = {v for v in sorted(g.observed) if rng.random() < 0.5}
        assert latent_project(manipulate_hard(g, A)) == manipulate_hard(latent_project(g), A)


class TestManipulation:
    def test_hard_on_triangle(self):
        h = manipulate_hard(triangle(), {"a"})
        assert h.kind("a") is NodeKind.INPUT
        assert h.directed == {("a", "b"), ("c", "b")}

    def test_empty_sets(self):
        assert manipulate_hard(triangle(), set()) == triangle()
        assert manipulate_soft(triangle(), set()) == triangle()

    def test_soft_on_triangle(self):
        s = manipulate_soft(triangle(), {"b"})
        assert s.kind("I_b") is NodeKind.INPUT
        assert s.directed == triangle().directed | {("I_b", "b")}

    def test_errors(self):
        with pytest.raises(GraphError):
            manipulate_hard(frontdoor_dag(), {"u"})
        with pytest.raises(GraphError):
            manipulate_hard(triangle(), {"z"})
        with pytest.raises(GraphError):
            manipulate_soft(manipulate_soft(triangle(), {"a"}), {"a"})

    def test_hard_removes_bidirected(self):
        h = manipulate_hard(bow(), {"b"})
        assert h.bidirected == set() and h.directed == set()

    @settings(max_examples=60, deadline=None)
    @given(admg_seeds, st.integers(0, 10**9))
    def test_commutations(self, seeds, split_seed):
        g = _admg(seeds)
        rng = random.Random(split_seed)
        labels = {v: rng.randrange(3) for v in g.observed}
        A1 = {v for v, l in labels.items() if l == 1}
        A2 = {v for v, l in labels.items() if l == 2}
        assert manipulate_hard(manipulate_hard(g, A1), A2) == manipulate_hard(g, A1 | A2)
        assert manipulate_soft(manipulate_soft(g, A1), A2) == manipulate_soft(g, A1 | A2)
        assert manipulate_hard(manipulate_soft(g, A1), A2) == manipulate_soft(manipulate_hard(g, A2), A1)


class TestStructural:
    def test_front_door(self):
        r = structural(frontdoor())
        assert sorted(map(sorted, r.districts)) == [["a", "b"], ["c"]]
        assert r.descendants["a"] == {"a", "b", "c"}
        assert r.topological_order == ("a", "c", "b")

    def test_singleton(self):
        r = structural(graph(observed="a"))
        assert r.districts == [frozenset("a")] and r.ancestors["a"] == {"a"}

    def test_asymmetry_ancestors(self):
        assert structural(asymmetry_graph()).ancestors["a"] == {"a", "b", "c", "I_a", "I_b", "I_c"}

    def test_lexicographic_ties(self):
        assert structural(graph(observed="cba")).topological_order == ("a", "b", "c")


class TestIdSeparation:
    def test_asymmetry_caption(self):
        g = asymmetry_graph()
        assert id_separated(g, {"a"}, {"b"}, {"c", "I_a"})
        assert not id_separated(g, {"b"}, {"a"}, {"c", "I_a"})

    def test_empty_source(self):
        assert id_separated(triangle(), set(), {"a"}, set())

    def test_soft_triangle(self):
        assert id_separated(manipulate_soft(triangle(), {"a"}), {"c"}, {"I_a"}, set())

    def test_endpoint_conventions(self):
        g = chain()
        assert id_separated(g, {"a"}, {"a"}, {"a"})
        assert not id_separated(g, {"a"}, {"a"}, set())
        assert id_separated(g, {"a"}, {"c"}, {"a"})

    def test_inputs_are_always_targets(self):
        g = graph(observed="a", inputs=["I"], directed=[("I", "a")])
        assert not id_separated(g, {"a"}, set(), set())
        assert id_separated(g, {"a"}, set(), {"I"})

    def test_requires_latent_free_graph(self):
        with pytest.raises(GraphError):
            id_separated(frontdoor_dag(), {"a"}, {"b"}, set())

    @settings(max_examples=150, deadline=None)
    @given(admg_seeds, st.integers(0, 10**9))
    def test_matches_path_enumeration(self, seeds, set_seed):
        g = _admg(seeds)
        rng = random.Random(set_seed)
        nodes = sorted(g.nodes)
        A = {n for n in nodes if rng.random() < 0.3}
        B = {n for n in nodes if rng.random() < 0.3}
        C = {n for n in nodes if rng.random() < 0.3}
        assert id_separated(g, A, B, C) == brute_force_separated(g, A, B, C)

    @settings(max_examples=60, deadline=None)
    @given(admg_seeds, st.integers(0, 10**9))
    def test_fewer_targets_stay_separated(self, seeds, set_seed):
        g = _admg(seeds)
        rng = random.Random(set_seed)
        nodes = sorted(g.nodes)
        A = {n for n in nodes if rng.random() < 0.3}
        B = {n for n in nodes if rng.random() < 0.5}
        C = {n for n in nodes if rng.random() < 0.3} - A
        if id_separated(g, A, B, C):
            for r in range(len(B) + 1):
                for sub in itertools.combinations(sorted(B), r):
                    assert id_separated(g, A, set(sub), C)


class TestFixing:
    def test_front_door_fixability(self):
        g = frontdoor()
        assert fixable(g, "c") and fixable(g, "b") and not fixable(g, "a")

    def test_isolated_node(self):
        assert fixable(graph(observed="r"), "r")
        assert fix_graph(graph(observed="r"), "r").kind("r") is NodeKind.INPUT

    def test_bow(self):
        assert not fixable(bow(), "a")

    def test_fix_graph(self):
        h = fix_graph(frontdoor(), "c")
        assert h.kind("c") is NodeKind.INPUT
        assert h.directed == {("c", "b")} and h.bidirected == {("a", "b")}
        with pytest.raises(NotFixableError):
            fix_graph(frontdoor(), "a")

    def test_fixable_needs_observed(self):
        with pytest.raises(GraphError):
            fixable(asymmetry_graph(), "I_a")


class TestReachability:
    def test_front_door(self):
        r = reachable_intrinsic(frontdoor(), {"c"})
        assert r.status == "intrinsic" and r.order == ("b", "a")
        r = reachable_intrinsic(frontdoor(), {"b"})
        assert r.status == "intrinsic" and r.order == ("c", "a")

    def test_whole_vertex_set(self):
        r = reachable_intrinsic(frontdoor(), {"a", "b", "c"})
        assert r.status == "reachable_only" and r.order == ()
        assert reachable_intrinsic(bow(), {"a", "b"}).status == "intrinsic"

    def test_bow(self):
        assert reachable_intrinsic(bow(), {"b"}).status == "not_reachable"

    def test_errors(self):
        with pytest.raises(GraphError):
            reachable_intrinsic(frontdoor(), {"z"})
        with pytest.raises(GraphError):
            reachable_intrinsic(frontdoor_dag(), {"a"})


def all_fixing_orders(g: MixedGraph, D: frozenset):
    """Every complete valid fixing sequence of the observed nodes outside ``D``."""
    rest = g.observed - D
    if not rest:
        yield ()
        return
    for r in sorted(rest):
        if fixable(g, r):
            for tail in all_fixing_orders(fix_graph(g, r), D):
                yield (r,) + tail


def _dead_end(g: MixedGraph, D: frozenset) -> bool:
    """Whether some fixing sequence gets stuck before reaching ``D``."""
    rest = g.observed - D
    if not rest:
        return False
    options = [r for r in sorted(rest) if fixable(g, r)]
    if not options:
        return True
    return any(_dead_end(fix_graph(g, r), D) for r in options)


def test_greedy_tie_break_is_irrelevant():
    """Exhaustive on every ADMG with up to four observed nodes and every target set."""
    checked = 0
    for n in range(1, 5):
        for g in admgs_up_to_isomorphism(n):
            for r in range(1, n + 1):
                for D in itertools.combinations(sorted(g.observed), r):
                    D = frozenset(D)
                    greedy = reachable_intrinsic(g, D)
                    orders = list(all_fixing_orders(g, D))
                    assert greedy.reachable == bool(orders)
                    if greedy.reachable:
                        assert not _dead_end(g, D)
                    checked += 1
    assert checked > 5000


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_greedy_tie_break_on_five_nodes(seed):
    g = random_admg(random.Random(seed), 5, 0, 0.6)
    rng = random.Random(seed + 1)
    D = frozenset(v for v in sorted(g.observed) if rng.random() < 0.4) or frozenset({sorted(g.observed)[0]})
    greedy = reachable_intrinsic(g, D)
    assert greedy.reachable == any(True for _ in all_fixing_orders(g, D))
    if greedy.reachable:
        assert not _dead_end(g, D)


def test_fix_graph_output_is_valid():
    for g in admgs_up_to_isomorphism(3):
        for r in sorted(g.observed):
            if fixable(g, r):
                h = fix_graph(g, r)
                assert h.kind(r) is NodeKind.INPUT
                MixedGraph(h.nodes, h.directed, h.bidirected)


def test_isomorphism_class_counts():
    assert [len(admgs_up_to_isomorphism(n)) for n in range(1, 5)] == [1, 4, 40, 1567]


def test_input_name():
    assert input_name("a") == "I_a"
