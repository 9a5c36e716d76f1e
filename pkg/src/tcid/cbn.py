"""Causal Bayesian networks with latent and input nodes over finite domains."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from gmpy2 import mpq

from .graph import GraphError, MixedGraph, NodeKind, input_name, manipulate_hard, manipulate_soft
from .kernel import (
    FiniteKernel,
    FiniteSpace,
    KernelError,
    extend_source,
    marginalize,
    product,
)

STAR = "*"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LiCbn:
    """An L-iDAG with a domain per node and a mechanism per non-input node.

    ``mechanisms[v]`` is a kernel from the parents of ``v`` to ``v``.
    """

    graph: MixedGraph
    spaces: Mapping[str, tuple[Hashable, ...]]
    mechanisms: Mapping[str, FiniteKernel]

    def __post_init__(self):
        g = self.graph
        if g.bidirected:
            raise ModelError("an L-iCBN graph carries no bidirected edges; use latent nodes")
        spaces = {n: tuple(d) for n, d in self.spaces.items()}
        object.__setattr__(self, "spaces", spaces)
        object.__setattr__(self, "mechanisms", dict(self.mechanisms))
        if set(spaces) != set(g.nodes):
            raise ModelError(f"spaces must cover exactly the graph nodes {sorted(g.nodes)}")
        for n, dom in spaces.items():
            if not dom:
                raise ModelError(f"empty domain for {n!r}")
            if STAR in dom and not (g.kind(n) is NodeKind.INPUT and n.startswith("I_")):
                raise ModelError(f"the symbol {STAR!r} is reserved and may not appear in the domain of {n!r}")
        for n, kind in g.nodes.items():
            if kind is NodeKind.INPUT:
                if n in self.mechanisms:
                    raise ModelError(f"input node {n!r} must not have a mechanism")
                continue
            if n not in self.mechanisms:
                raise ModelError(f"missing mechanism for {n!r}")
            k = self.mechanisms[n]
            if set(k.source.names) != set(g.parents(n)):
                raise ModelError(
                    f"mechanism of {n!r} reads {sorted(k.source.names)}, parents are {sorted(g.parents(n))}"
                )
            if k.target.names != (n,) or k.target.domain(n) != spaces[n]:
                raise ModelError(f"mechanism of {n!r} must target {n!r} over {spaces[n]}")
            for p in k.source.names:
                if k.source.domain(p) != spaces[p]:
                    raise ModelError(f"mechanism of {n!r} reads {p!r} over the wrong domain")
        extra = set(self.mechanisms) - set(g.nodes)
        if extra:
            raise ModelError(f"mechanisms for unknown nodes {sorted(extra)}")

    def space(self, nodes: Iterable[str]) -> FiniteSpace:
        return FiniteSpace(tuple((n, self.spaces[n]) for n in nodes))

    @property
    def input_space(self) -> FiniteSpace:
        return self.space(sorted(self.graph.inputs))

    # -- JSON

    def to_dict(self) -> dict:
        d = self.graph.to_dict()
        d["spaces"] = {n: [str(v) for v in dom] for n, dom in sorted(self.spaces.items())}
        d["mechanisms"] = {n: k.to_dict() for n, k in sorted(self.mechanisms.items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> LiCbn:
        g = MixedGraph.from_dict(data)
        try:
            spaces = {n: tuple(d) for n, d in data["spaces"].items()}
            mechanisms = {n: FiniteKernel.from_dict(k) for n, k in data["mechanisms"].items()}
        except (KeyError, AttributeError, TypeError) as exc:
            raise ModelError(f"malformed model JSON: {exc!r}") from exc
        return cls(g, spaces, mechanisms)

    @classmethod
    def from_json(cls, text: str) -> LiCbn:
        return cls.from_dict(json.loads(text))


def observable_kernel(m: LiCbn) -> FiniteKernel:
    """``P(X_V || X_I)``: product of mechanisms with latent nodes summed out.

    Latents are summed out as soon as all their children have been
    multiplied in, which keeps intermediate tables small.
    """
    g = m.graph
    acc = FiniteKernel.unit()
    done: set[str] = set()
    pending_latents: set[str] = set()
    for v in g.topological_order:
        if g.kind(v) is NodeKind.INPUT:
            continue
        acc = product(m.mechanisms[v], acc)
        done.add(v)
        if g.kind(v) is NodeKind.LATENT:
            pending_latents.add(v)
        ready = {l for l in pending_latents if g.children(l) <= done}
        if ready:
            acc = marginalize(acc, [n for n in acc.target.names if n not in ready])
            pending_latents -= ready
    if pending_latents:
        acc = marginalize(acc, [n for n in acc.target.names if n not in pending_latents])
    acc = extend_source(acc, m.input_space)
    observed = [v for v in g.topological_order if g.kind(v) is NodeKind.OBSERVED]
    return acc.reorder(source=sorted(g.inputs), target=observed)


def _check_observed(m: LiCbn, A: Iterable[str]) -> set[str]:
    A = set(A)
    for a in A:
        try:
            kind = m.graph.kind(a)
        except GraphError as exc:
            raise ModelError(str(exc)) from None
        if kind is not NodeKind.OBSERVED:
            raise ModelError(f"interventions target observed nodes, {a!r} is {kind.value}")
    return A


def intervene_hard(m: LiCbn, A: Iterable[str]) -> LiCbn:
    A = _check_observed(m, A)
    if not A:
        return m
    g = manipulate_hard(m.graph, A)
    mech = {n: k for n, k in m.mechanisms.items() if n not in A}
    return LiCbn(g, m.spaces, mech)


def intervene_soft(m: LiCbn, A: Iterable[str]) -> LiCbn:
    """Attach an input ``I_a`` to each ``a``; ``I_a = *`` keeps the old mechanism."""
    A = _check_observed(m, A)
    if not A:
        return m
    g = manipulate_soft(m.graph, A)
    spaces = dict(m.spaces)
    mech = dict(m.mechanisms)
    for a in sorted(A):
        ia = input_name(a)
        spaces[ia] = m.spaces[a] + (STAR,)
        old = m.mechanisms[a]
        source = old.source + FiniteSpace(((ia, spaces[ia]),))

        def q(s, old=old, a=a, ia=ia):
            if s[ia] == STAR:
                return old.row({n: s[n] for n in old.source.names})
            return {(s[ia],): 1}

        mech[a] = FiniteKernel.from_function(source, old.target, q)
    return LiCbn(g, spaces, mech)


def oracle_do(m: LiCbn, A: Iterable[str]) -> FiniteKernel:
    """Ground-truth interventional kernel ``P(X_{V\\A} || X_I, do(X_A))``."""
    A = _check_observed(m, A)
    k = observable_kernel(intervene_hard(m, A))
    return k.reorder(source=sorted(m.graph.inputs | A))


def q_factor_oracle(m: LiCbn, D: Iterable[str]) -> FiniteKernel:
    D = _check_observed(m, D)
    return oracle_do(m, m.graph.observed - D)


# -- random instances


def random_cpt(
    rng: random.Random,
    source: FiniteSpace,
    target: FiniteSpace,
    positive: bool = True,
    denominator: int = 12,
) -> FiniteKernel:
    """Rows of integer weights in ``[lo, denominator]`` normalized exactly."""
    lo = 1 if positive else 0

    def row(_):
        w = [rng.randint(lo, denominator) for _ in range(target.size)]
        if not any(w):
            w[rng.randrange(len(w))] = 1
        total = sum(w)
        return {pt: mpq(x, total) for pt, x in zip(target.points(), w)}

    return FiniteKernel.from_function(source, target, row)


def random_model(
    g: MixedGraph,
    rng: random.Random,
    cards: Mapping[str, int] | int = 2,
    positive: bool = True,
    denominator: int = 12,
) -> LiCbn:
    """Random mechanisms on a fixed L-iDAG with integer domains ``0..card-1``."""
    spaces = {}
    for n in g.nodes:
        c = cards if isinstance(cards, int) else cards[n]
        spaces[n] = tuple(range(c))
    mech = {}
    for v in g.topological_order:
        if g.kind(v) is NodeKind.INPUT:
            continue
        pa = sorted(g.parents(v))
        src = FiniteSpace(tuple((p, spaces[p]) for p in pa))
        mech[v] = random_cpt(rng, src, FiniteSpace(((v, spaces[v]),)), positive, denominator)
    return LiCbn(g, spaces, mech)


def random_ldag(
    rng: random.Random,
    n_observed: int,
    n_latent: int = 0,
    n_inputs: int = 0,
    edge_prob: float = 0.5,
    observed_names: Sequence[str] = "abcdefgh",
) -> MixedGraph:
    """Random L-iDAG; latent nodes get at least two children when possible."""
    obs = list(observed_names[:n_observed])
    lat = [f"u{i}" for i in range(n_latent)]
    ins = [f"I{i}" for i in range(n_inputs)]
    order = obs + lat
    rng.shuffle(order)
    edges = set()
    for i, x in enumerate(order):
        for y in order[i + 1:]:
            if rng.random() < edge_prob:
                edges.add((x, y))
    for l in lat:
        later = [y for y in order[order.index(l) + 1:] if y in obs]
        kids = [y for x, y in edges if x == l]
        while len(kids) < 2 and len(set(later) - set(kids)) > 0:
            y = rng.choice(sorted(set(later) - set(kids)))
            edges.add((l, y))
            kids.append(y)
    for i in ins:
        for y in obs + lat:
            if rng.random() < edge_prob:
                edges.add((i, y))
    nodes = {n: NodeKind.OBSERVED for n in obs}
    nodes.update({n: NodeKind.LATENT for n in lat})
    nodes.update({n: NodeKind.INPUT for n in ins})
    return MixedGraph(nodes, edges)


def canonical_dag(admg: MixedGraph) -> MixedGraph:
    """L-iDAG with one latent parent ``U_a_b`` per bidirected edge ``a <-> b``."""
    nodes = admg.nodes
    edges = set(admg.directed)
    for a, b in sorted(admg.bidirected):
        u = f"U_{a}_{b}"
        if u in nodes:
            raise GraphError(f"node id {u!r} already exists")
        nodes[u] = NodeKind.LATENT
        edges |= {(u, a), (u, b)}
    return MixedGraph(nodes, edges)


def corpus_model(index: int, seed: int = 0, positive: bool = True) -> LiCbn:
    """The ``index``-th model of a seeded corpus of small random L-iCBNs.

    Up to four observed, two latent and one input node, with each domain
    binary or ternary. The per-instance seed is ``"{seed}/{index}"``, so any
    single failure can be regenerated on its own.
    """
    rng = random.Random(f"{seed}/{index}")
    n_obs = rng.choice((2, 3, 3, 4, 4, 4))
    n_lat = rng.choice((0, 1, 2))
    n_in = rng.choice((0, 1))
    g = random_ldag(rng, n_obs, n_lat, n_in, edge_prob=rng.choice((0.3, 0.5, 0.7)))
    cards = {n: rng.choice((2, 2, 3)) for n in sorted(g.nodes)}
    return random_model(g, rng, cards, positive=positive)
