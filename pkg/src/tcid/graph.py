"""Directed mixed graphs with input, observed and latent nodes.

Graphs are immutable values. Every manipulation returns a new graph.
"""

from __future__ import annotations

import enum
import itertools
import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping


class GraphError(ValueError):
    """Raised for malformed graphs or invalid node references."""


class NotFixableError(GraphError):
    pass


class NodeKind(str, enum.Enum):
    INPUT = "input"
    OBSERVED = "observed"
    LATENT = "latent"


def _bi(u: str, v: str) -> tuple[str, str]:
    return (u, v) if u <= v else (v, u)


class MixedGraph:
    """Acyclic directed mixed graph with node kinds.

    Parameters
    ----------
    nodes:
        Mapping from node id to :class:`NodeKind` (or its string value).
    directed:
        Iterable of ``(tail, head)`` pairs.
    bidirected:
        Iterable of unordered pairs; stored with sorted endpoints.
    """

    __slots__ = ("_nodes", "_directed", "_bidirected", "_pa", "_ch", "_sib", "_topo")

    def __init__(
        self,
        nodes: Mapping[str, NodeKind | str],
        directed: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[tuple[str, str]] = (),
    ):
        self._nodes = {str(n): NodeKind(k) for n, k in nodes.items()}
        self._directed = frozenset((str(u), str(v)) for u, v in directed)
        self._bidirected = frozenset(_bi(str(u), str(v)) for u, v in bidirected)
        self._pa: dict[str, set[str]] = {n: set() for n in self._nodes}
        self._ch: dict[str, set[str]] = {n: set() for n in self._nodes}
        self._sib: dict[str, set[str]] = {n: set() for n in self._nodes}
        self._validate()
        self._topo = self._topological_order()

    def _validate(self) -> None:
        for n in self._nodes:
            if not n:
                raise GraphError("node ids must be non-empty")
        for u, v in self._directed:
            for x in (u, v):
                if x not in self._nodes:
                    raise GraphError(f"unknown node {x!r} in directed edge {u}->{v}")
            if u == v:
                raise GraphError(f"self loop on {u!r}")
            if self._nodes[v] is NodeKind.INPUT:
                raise GraphError(f"input node {v!r} has an incoming edge from {u!r}")
            self._pa[v].add(u)
            self._ch[u].add(v)
        for u, v in self._bidirected:
            for x in (u, v):
                if x not in self._nodes:
                    raise GraphError(f"unknown node {x!r} in bidirected edge {u}<->{v}")
                if self._nodes[x] is NodeKind.INPUT:
                    raise GraphError(f"bidirected edge {u}<->{v} touches input node {x!r}")
            if u == v:
                raise GraphError(f"bidirected self loop on {u!r}")
            self._sib[u].add(v)
            self._sib[v].add(u)
        if self._bidirected and self.latent:
            raise GraphError("graphs with latent nodes must not carry bidirected edges")

    def _topological_order(self) -> tuple[str, ...]:
        # Kahn's algorithm, smallest available id first
        indeg = {n: len(self._pa[n]) for n in self._nodes}
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in self._ch[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort()
        if len(order) != len(self._nodes):
            raise GraphError("directed part contains a cycle")
        return tuple(order)

    # -- basic accessors

    @property
    def nodes(self) -> dict[str, NodeKind]:
        return dict(self._nodes)

    @property
    def directed(self) -> frozenset[tuple[str, str]]:
        return self._directed

    @property
    def bidirected(self) -> frozenset[tuple[str, str]]:
        return self._bidirected

    def kind(self, node: str) -> NodeKind:
        try:
            return self._nodes[node]
        except KeyError:
            raise GraphError(f"unknown node {node!r}") from None

    def _of_kind(self, kind: NodeKind) -> frozenset[str]:
        return frozenset(n for n, k in self._nodes.items() if k is kind)

    @property
    def inputs(self) -> frozenset[str]:
        return self._of_kind(NodeKind.INPUT)

    @property
    def observed(self) -> frozenset[str]:
        return self._of_kind(NodeKind.OBSERVED)

    @property
    def latent(self) -> frozenset[str]:
        return self._of_kind(NodeKind.LATENT)

    def parents(self, node: str) -> frozenset[str]:
        self.kind(node)
        return frozenset(self._pa[node])

    def children(self, node: str) -> frozenset[str]:
        self.kind(node)
        return frozenset(self._ch[node])

    def siblings(self, node: str) -> frozenset[str]:
        self.kind(node)
        return frozenset(self._sib[node])

    @property
    def topological_order(self) -> tuple[str, ...]:
        """Topological order of the directed part, ties broken by node id."""
        return self._topo

    def ancestors(self, nodes: str | Iterable[str]) -> frozenset[str]:
        """Reflexive ancestral closure."""
        return self._closure(nodes, self._pa)

    def descendants(self, nodes: str | Iterable[str]) -> frozenset[str]:
        """Reflexive descendant closure."""
        return self._closure(nodes, self._ch)

    def _closure(self, nodes, step) -> frozenset[str]:
        start = {nodes} if isinstance(nodes, str) else set(nodes)
        for n in start:
            self.kind(n)
        seen = set(start)
        stack = list(start)
        while stack:
            for m in step[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return frozenset(seen)

    def districts(self) -> list[frozenset[str]]:
        """Bidirected-connected components of the observed nodes, sorted."""
        seen: set[str] = set()
        out = []
        for n in sorted(self.observed):
            if n in seen:
                continue
            comp = {n}
            queue = deque([n])
            while queue:
                for m in self._sib[queue.popleft()]:
                    if m not in comp and self._nodes[m] is NodeKind.OBSERVED:
                        comp.add(m)
                        queue.append(m)
            seen |= comp
            out.append(frozenset(comp))
        return sorted(out, key=lambda d: sorted(d))

    def district(self, node: str) -> frozenset[str]:
        if self.kind(node) is not NodeKind.OBSERVED:
            raise GraphError(f"district of non-observed node {node!r}")
        for d in self.districts():
            if node in d:
                return d
        raise AssertionError("unreachable")

    def subgraph(self, keep: Iterable[str]) -> MixedGraph:
        """Induced subgraph on ``keep``; node kinds are preserved."""
        keep = set(keep)
        for n in keep:
            self.kind(n)
        return MixedGraph(
            {n: k for n, k in self._nodes.items() if n in keep},
            [(u, v) for u, v in self._directed if u in keep and v in keep],
            [(u, v) for u, v in self._bidirected if u in keep and v in keep],
        )

    # -- value semantics

    def _key(self):
        return (frozenset(self._nodes.items()), self._directed, self._bidirected)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        parts = [f"{u}->{v}" for u, v in sorted(self._directed)]
        parts += [f"{u}<->{v}" for u, v in sorted(self._bidirected)]
        kinds = ",".join(f"{n}:{k.value[0]}" for n, k in sorted(self._nodes.items()))
        return f"MixedGraph([{kinds}] {' '.join(parts)})"

    # -- JSON

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n, "kind": k.value} for n, k in sorted(self._nodes.items())],
            "directed": [list(e) for e in sorted(self._directed)],
            "bidirected": [list(e) for e in sorted(self._bidirected)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> MixedGraph:
        try:
            nodes = {}
            for entry in data["nodes"]:
                if entry["id"] in nodes:
                    raise GraphError(f"duplicate node id {entry['id']!r}")
                nodes[entry["id"]] = NodeKind(entry["kind"])
            directed = [tuple(e) for e in data.get("directed", [])]
            bidirected = [tuple(e) for e in data.get("bidirected", [])]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"malformed graph JSON: {exc}") from exc
        for e in directed + bidirected:
            if len(e) != 2:
                raise GraphError(f"edge must have two endpoints: {list(e)}")
        return cls(nodes, directed, bidirected)

    @classmethod
    def from_json(cls, text: str) -> MixedGraph:
        return cls.from_dict(json.loads(text))


def graph(
    observed: Iterable[str] = (),
    directed: Iterable[tuple[str, str]] = (),
    bidirected: Iterable[tuple[str, str]] = (),
    inputs: Iterable[str] = (),
    latent: Iterable[str] = (),
) -> MixedGraph:
    """Convenience constructor; nodes mentioned only in edges default to observed."""
    nodes: dict[str, NodeKind] = {}
    for n in inputs:
        nodes[n] = NodeKind.INPUT
    for n in latent:
        nodes[n] = NodeKind.LATENT
    for n in observed:
        nodes[n] = NodeKind.OBSERVED
    directed = list(directed)
    bidirected = list(bidirected)
    for e in directed + bidirected:
        for n in e:
            nodes.setdefault(n, NodeKind.OBSERVED)
    return MixedGraph(nodes, directed, bidirected)


def latent_project(g: MixedGraph) -> MixedGraph:
    """Marginalize the latent nodes of an L-iDAG into an iADMG."""
    if g.bidirected:
        raise GraphError("latent projection expects a graph without bidirected edges")
    lat = g.latent
    keep = {n: k for n, k in g.nodes.items() if k is not NodeKind.LATENT}
    directed = set()
    for a in keep:
        # directed paths a -> l1 -> ... -> b with latent interior
        stack = list(g.children(a))
        seen = set()
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            if x in lat:
                stack.extend(g.children(x))
            else:
                directed.add((a, x))
    bidirected = set()
    for l in lat:
        # observed endpoints reachable from l through latent-only interiors
        reach = set()
        stack = list(g.children(l))
        seen = set()
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            if x in lat:
                stack.extend(g.children(x))
            else:
                reach.add(x)
        reach = sorted(x for x in reach if keep[x] is NodeKind.OBSERVED)
        for i, a in enumerate(reach):
            for b in reach[i + 1:]:
                bidirected.add((a, b))
    return MixedGraph(keep, directed, bidirected)


def manipulate_hard(g: MixedGraph, a_set: Iterable[str]) -> MixedGraph:
    """Hard manipulation: observed nodes of ``a_set`` become inputs and lose arrowheads."""
    a_set = set(a_set)
    for a in a_set:
        if g.kind(a) is NodeKind.LATENT:
            raise GraphError(f"cannot manipulate latent node {a!r}")
    hit = {a for a in a_set if g.kind(a) is NodeKind.OBSERVED}
    if not hit:
        return g
    nodes = g.nodes
    for a in hit:
        nodes[a] = NodeKind.INPUT
    directed = [(u, v) for u, v in g.directed if v not in hit]
    bidirected = [(u, v) for u, v in g.bidirected if u not in hit and v not in hit]
    return MixedGraph(nodes, directed, bidirected)


def input_name(node: str) -> str:
    """Id of the soft-intervention input attached to ``node``."""
    return f"I_{node}"


def manipulate_soft(g: MixedGraph, a_set: Iterable[str]) -> MixedGraph:
    """Soft manipulation: add an input ``I_a -> a`` for every ``a`` in ``a_set``."""
    a_set = set(a_set)
    if not a_set:
        return g
    nodes = g.nodes
    directed = set(g.directed)
    for a in sorted(a_set):
        if g.kind(a) is not NodeKind.OBSERVED:
            raise GraphError(f"soft manipulation of non-observed node {a!r}")
        ia = input_name(a)
        if ia in nodes:
            raise GraphError(f"node id {ia!r} already exists")
        nodes[ia] = NodeKind.INPUT
        directed.add((ia, a))
    return MixedGraph(nodes, directed, g.bidirected)


@dataclass(frozen=True)
class StructuralReport:
    ancestors: dict[str, frozenset[str]]
    descendants: dict[str, frozenset[str]]
    districts: list[frozenset[str]]
    topological_order: tuple[str, ...]


def structural(g: MixedGraph) -> StructuralReport:
    return StructuralReport(
        ancestors={n: g.ancestors(n) for n in g.nodes},
        descendants={n: g.descendants(n) for n in g.nodes},
        districts=g.districts(),
        topological_order=g.topological_order,
    )


def _as_set(g: MixedGraph, nodes: Iterable[str]) -> frozenset[str]:
    out = frozenset([nodes] if isinstance(nodes, str) else nodes)
    for n in out:
        g.kind(n)
    return out


def id_separated(g: MixedGraph, A: Iterable[str], B: Iterable[str], C: Iterable[str]) -> bool:
    """Whether every path from ``A`` to ``B`` or any input node is d-blocked by ``C``.

    Endpoints are non-colliders, so a path ending in ``C`` is blocked. A node
    of ``A`` that is itself a target is connected to itself unless it lies in ``C``.
    """
    A, B, C = _as_set(g, A), _as_set(g, B), _as_set(g, C)
    if g.latent:
        raise GraphError("id-separation is defined on latent-free graphs; project first")
    targets = (B | g.inputs) - C
    start = A - C
    if start & targets:
        return False
    # Walks where colliders lie in C and non-colliders do not are equivalent
    # to d-connecting paths. State: (node, arrived with arrowhead at node).
    seen: set[tuple[str, bool]] = set()
    stack: list[tuple[str, bool | None]] = [(a, None) for a in start]
    while stack:
        v, head_in = stack.pop()
        if head_in is not None:
            if (v, head_in) in seen:
                continue
            seen.add((v, head_in))
        # edges leaving v: (neighbour, arrowhead at v?, arrowhead at neighbour?)
        moves = [(c, False, True) for c in g._ch[v]]
        moves += [(p, True, False) for p in g._pa[v]]
        moves += [(s, True, True) for s in g._sib[v]]
        for w, head_at_v, head_at_w in moves:
            collider = bool(head_in) and head_at_v
            if collider and v not in C:
                continue
            if not collider and head_in is not None and v in C:
                continue
            if w in targets:
                return False
            if (w, head_at_w) not in seen:
                stack.append((w, head_at_w))
    return True


def fixable(g: MixedGraph, r: str) -> bool:
    if g.kind(r) is not NodeKind.OBSERVED:
        raise GraphError(f"fixability is defined for observed nodes, got {r!r}")
    return g.district(r) & g.descendants(r) == {r}


def fix_graph(g: MixedGraph, r: str) -> MixedGraph:
    if not fixable(g, r):
        raise NotFixableError(f"node {r!r} is not fixable")
    return manipulate_hard(g, {r})


@dataclass(frozen=True)
class Reachability:
    status: str  # "not_reachable" | "reachable_only" | "intrinsic"
    order: tuple[str, ...]
    graph: MixedGraph | None = None

    @property
    def reachable(self) -> bool:
        return self.status != "not_reachable"

    @property
    def intrinsic(self) -> bool:
        return self.status == "intrinsic"


def reachable_intrinsic(g: MixedGraph, D: Iterable[str]) -> Reachability:
    """Greedily fix the observed nodes outside ``D``.

    Returns the fixing order (smallest fixable id first) and whether ``D``
    is reachable, and intrinsic, i.e. a single district once reached.
    """
    D = _as_set(g, D)
    if g.latent:
        raise GraphError("reachability is defined on latent-free graphs")
    if not D <= g.observed:
        raise GraphError(f"{sorted(D - g.observed)} are not observed nodes")
    order = []
    cur = g
    while True:
        rest = sorted(cur.observed - D)
        if not rest:
            break
        r = next((x for x in rest if fixable(cur, x)), None)
        if r is None:
            return Reachability("not_reachable", tuple(order), None)
        order.append(r)
        cur = manipulate_hard(cur, {r})
    intrinsic = len(D) > 0 and len(cur.districts()) == 1
    return Reachability("intrinsic" if intrinsic else "reachable_only", tuple(order), cur)


def admgs_up_to_isomorphism(n: int, names: str = "abcdefgh") -> list[MixedGraph]:
    """All ADMGs on ``n`` observed nodes, one representative per isomorphism class.

    Every acyclic graph has a topological labelling, so it suffices to list
    edge sets pointing from lower to higher index and keep the
    lexicographically smallest relabelling as the class key.
    """
    pairs = list(itertools.combinations(range(n), 2))
    perms = list(itertools.permutations(range(n)))
    seen: set = set()
    out = []
    for dmask in range(1 << len(pairs)):
        d = [p for i, p in enumerate(pairs) if dmask >> i & 1]
        for bmask in range(1 << len(pairs)):
            b = [p for i, p in enumerate(pairs) if bmask >> i & 1]
            key = min(
                (
                    tuple(sorted((pi[x], pi[y]) for x, y in d)),
                    tuple(sorted(tuple(sorted((pi[x], pi[y]))) for x, y in b)),
                )
                for pi in perms
            )
            if key in seen:
                continue
            seen.add(key)
            out.append(
                graph(
                    observed=names[:n],
                    directed=[(names[x], names[y]) for x, y in key[0]],
                    bidirected=[(names[x], names[y]) for x, y in key[1]],
                )
            )
    return out
