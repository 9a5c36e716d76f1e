"""Kernel fixing, the one-line identification formula and its exact evaluation."""

from __future__ import annotations

import itertools
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .cbn import LiCbn, observable_kernel, oracle_do
from .graph import (
    GraphError,
    MixedGraph,
    NodeKind,
    NotFixableError,
    fix_graph,
    fixable,
    graph,
    reachable_intrinsic,
)
from .kernel import (
    FiniteKernel,
    FiniteSpace,
    KernelError,
    _broadcast,
    _transpose_to,
    disintegrate,
    extend_source,
    marginalize,
    pointwise_product,
    product,
    restrict_source,
    strictly_positive,
)


class IdentifyError(ValueError):
    pass


# -- fixing on kernels


def _check_kernel_matches(k: FiniteKernel, g: MixedGraph) -> None:
    if set(k.target.names) != set(g.observed) or set(k.source.names) != set(g.inputs):
        raise IdentifyError(
            f"kernel {k!r} does not match graph: targets must be {sorted(g.observed)}, "
            f"sources {sorted(g.inputs)}"
        )


def fix_kernel(k: FiniteKernel, r: str, g: MixedGraph) -> FiniteKernel:
    """Fix ``r`` by conditioning its proper descendants on everything else.

    The result is ``P(X_{De(r) - r} | X_{NonDe + r} || X_W) (x) P(X_NonDe || X_W)``,
    a kernel in which ``r`` has moved from the target to the source.
    """
    _check_kernel_matches(k, g)
    if r not in k.target:
        raise IdentifyError(f"{r!r} is not a target variable")
    if not fixable(g, r):
        raise NotFixableError(f"node {r!r} is not fixable")
    de = g.descendants(r) & g.observed
    nonde = g.observed - de
    cond = disintegrate(k, nonde | {r})
    return product(cond, marginalize(k, nonde))


def markov_blanket(g: MixedGraph, r: str) -> frozenset[str]:
    """District of ``r`` together with the district's parents, without ``r``."""
    d = g.district(r)
    pa = set().union(*(g.parents(v) for v in d))
    return frozenset((d | pa) - {r})


def fix_kernel_division(k: FiniteKernel, r: str, g: MixedGraph) -> FiniteKernel:
    """The same operation as a division ``q / q(x_r | x_Mb)``; needs positive mass."""
    _check_kernel_matches(k, g)
    if not fixable(g, r):
        raise NotFixableError(f"node {r!r} is not fixable")
    if not strictly_positive(k):
        raise IdentifyError("division form requires a strictly positive kernel")
    mb = markov_blanket(g, r) & g.observed
    cond = disintegrate(marginalize(k, mb | {r}), mb)
    den = _broadcast(cond.table, cond.names, k.names)
    table = k.table / den
    source = k.source + k.target.select({r})
    target = k.target.without({r})
    return FiniteKernel(source, target, _transpose_to(table, k.names, source.names + target.names))


def fix_sequence(k: FiniteKernel, order: Sequence[str], g: MixedGraph) -> tuple[FiniteKernel, MixedGraph]:
    for r in order:
        k = fix_kernel(k, r, g)
        g = fix_graph(g, r)
    return k, g


# -- formula trees


@dataclass(frozen=True)
class ObsRef:
    graph: MixedGraph

    def render(self, nested: bool = False) -> str:
        return "P(x_V ‖ x_I)" if self.graph.inputs else "P(x_V)"


@dataclass(frozen=True)
class Fix:
    """Fix ``node`` in ``child``; ``graph`` is the context the child lives in."""

    node: str
    child: "IdentExpr"
    graph: MixedGraph

    def __post_init__(self):
        if not fixable(self.graph, self.node):
            raise IdentifyError(f"{self.node!r} is not fixable in its recorded graph")

    def chain(self) -> tuple[list[str], "IdentExpr"]:
        """Fixing order (innermost first) and the expression underneath."""
        nodes: list[str] = []
        e: IdentExpr = self
        while isinstance(e, Fix):
            nodes.append(e.node)
            e = e.child
        return nodes[::-1], e

    def render(self, nested: bool = False) -> str:
        if nested:
            return f"φ_{self.node}({self.child.render(True)})"
        order, base = self.chain()
        sub = order[0] if len(order) == 1 else "{" + ",".join(sorted(order)) + "}"
        return f"φ_{sub}({base.render()})"


@dataclass(frozen=True)
class Product:
    children: tuple
    order: str = "topological"

    def render(self, nested: bool = False) -> str:
        return " · ".join(c.render(nested) for c in self.children)


@dataclass(frozen=True)
class Marginalize:
    vars: frozenset
    child: "IdentExpr"

    def render(self, nested: bool = False) -> str:
        inner = self.child.render(nested)
        if not self.vars:
            return inner
        return f"Σ_{{{','.join('x_' + v for v in sorted(self.vars))}}} {inner}"


IdentExpr = Union[ObsRef, Fix, Product, Marginalize]


def emit_formula(expr: IdentExpr, nested: bool = False) -> str:
    """Deterministic rendering; ``nested`` spells out each fixing step."""
    return expr.render(nested)


def targets(expr: IdentExpr) -> frozenset[str]:
    if isinstance(expr, ObsRef):
        return frozenset(expr.graph.observed)
    if isinstance(expr, Fix):
        return targets(expr.child) - {expr.node}
    if isinstance(expr, Product):
        return frozenset().union(*(targets(c) for c in expr.children))
    return targets(expr.child) - expr.vars


@dataclass(frozen=True)
class IdResult:
    status: str
    formula: IdentExpr | None = None
    failing_district: frozenset | None = None
    graph: MixedGraph | None = None

    def __post_init__(self):
        if (self.status == "identifiable") != (self.formula is not None):
            raise IdentifyError("identifiable results carry a formula, and only they do")
        if (self.status == "not_identifiable") != (self.failing_district is not None):
            raise IdentifyError("non-identifiable results name a failing district")

    @property
    def identifiable(self) -> bool:
        return self.status == "identifiable"

    def formula_string(self) -> str | None:
        return None if self.formula is None else emit_formula(self.formula)


@lru_cache(maxsize=4096)
def _reach(g: MixedGraph, d: frozenset):
    return reachable_intrinsic(g, d)


@lru_cache(maxsize=4096)
def fix_chain(g: MixedGraph, order: tuple[str, ...]) -> IdentExpr:
    e: IdentExpr = ObsRef(g)
    cur = g
    for r in order:
        e = Fix(r, e, cur)
        cur = fix_graph(cur, r)
    return e


def one_line_identify(g: MixedGraph, A: Iterable[str], B: Iterable[str]) -> IdResult:
    """Identify ``P(X_A || do(X_B))`` from the observable kernel of ``g``."""
    A, B = frozenset(A), frozenset(B)
    if g.latent:
        raise IdentifyError("identification runs on latent-free graphs; project first")
    if not A or not B:
        raise IdentifyError("treatment and outcome sets must be non-empty")
    if A & B:
        raise IdentifyError(f"treatment and outcome overlap in {sorted(A & B)}")
    for n in A | B:
        if g.kind(n) is not NodeKind.OBSERVED:
            raise IdentifyError(f"{n!r} is not an observed node")
    rest = g.subgraph(g.observed - B)
    anc = rest.ancestors(A) & g.observed
    districts = g.subgraph(anc).districts()
    topo = {v: i for i, v in enumerate(g.topological_order)}
    districts.sort(key=lambda d: min(topo[v] for v in d))
    factors = []
    for d in districts:
        reach = _reach(g, frozenset(d))
        if not reach.intrinsic:
            return IdResult("not_identifiable", failing_district=frozenset(d), graph=g)
        factors.append(fix_chain(g, reach.order))
    body = factors[0] if len(factors) == 1 else Product(tuple(factors))
    return IdResult("identifiable", formula=Marginalize(frozenset(anc - A), body), graph=g)


# -- evaluation


@dataclass
class _EvalCtx:
    obs: FiniteKernel
    cache: dict = field(default_factory=dict)


def _eval(expr: IdentExpr, ctx: _EvalCtx) -> FiniteKernel:
    if isinstance(expr, ObsRef):
        _check_kernel_matches(ctx.obs, expr.graph)
        return ctx.obs
    if isinstance(expr, Fix):
        steps = []
        e: IdentExpr = expr
        while isinstance(e, Fix):
            steps.append(e)
            e = e.child
        key = tuple(f.node for f in reversed(steps))
        if key not in ctx.cache:
            k = _eval(e, ctx)
            for f in reversed(steps):
                k = fix_kernel(k, f.node, f.graph)
            ctx.cache[key] = _local(k, e.graph)
        return ctx.cache[key]
    if isinstance(expr, Product):
        return pointwise_product([_eval(c, ctx) for c in expr.children])
    k = _eval(expr.child, ctx)
    if isinstance(expr.child, ObsRef):
        k = _local(k, expr.child.graph)
    return marginalize(k, [n for n in k.target.names if n not in expr.vars])


def _local(k: FiniteKernel, g: MixedGraph) -> FiniteKernel:
    """Drop source coordinates outside ``Pa(D) | inputs``, asserting independence."""
    D = set(k.target.names)
    pa = set().union(*(g.parents(v) for v in D)) if D else set()
    try:
        return restrict_source(k, (pa - D) | g.inputs)
    except KernelError as exc:
        raise IdentifyError(f"district factor on {sorted(D)} is not local: {exc}") from exc


def evaluate(expr: IdentExpr, obs: FiniteKernel, B: Iterable[str], cache: dict | None = None) -> FiniteKernel:
    """Evaluate an identification formula on an observable kernel.

    Returns the kernel from ``X_B`` and the inputs to ``X_A``. The observable
    kernel must be strictly positive.
    """
    if not strictly_positive(obs):
        raise IdentifyError("evaluation requires a strictly positive observable kernel")
    ctx = _EvalCtx(obs, {} if cache is None else cache)
    k = _eval(expr, ctx)
    B = set(B)
    extra = FiniteSpace(tuple((n, obs.target.domain(n)) for n in sorted(B)))
    k = extend_source(k, extra)
    stray = set(k.source.names) - B - set(obs.source.names)
    if stray:
        raise IdentifyError(f"evaluated formula still reads {sorted(stray)}")
    return k.reorder(source=sorted(k.source.names), target=sorted(k.target.names))


def identify_and_check(m: LiCbn, A: Iterable[str], B: Iterable[str], proj: MixedGraph | None = None) -> tuple[IdResult, bool | None]:
    """Run the algorithm on the projected graph and compare with the oracle."""
    from .graph import latent_project

    proj = proj or latent_project(m.graph)
    res = one_line_identify(proj, A, B)
    if not res.identifiable:
        return res, None
    got = evaluate(res.formula, observable_kernel(m), B)
    want = marginalize(oracle_do(m, B), A)
    return res, got == want


# -- non-identifiability witness for the bow graph


BOW = graph(observed=["a", "b"], latent=["u"], directed=[("u", "a"), ("u", "b"), ("a", "b")])


def bow_models(pu: Fraction, pa: Sequence[Fraction], pb: Sequence[Sequence[Fraction]]) -> tuple[LiCbn, LiCbn]:
    """Two bow-graph models with the same observational law.

    The first uses ``P(u=1) = pu``, ``P(a=1|u) = pa[u]``, ``P(b=1|a,u) = pb[a][u]``.
    The second lets the latent record ``a`` itself, so that ``b`` depends on
    ``u`` only through ``a`` and the confounding disappears under intervention.
    """
    spaces = {"u": (0, 1), "a": (0, 1), "b": (0, 1)}

    def bern(p):
        return {(0,): 1 - p, (1,): p}

    U, A, Bs = FiniteSpace.of(u=(0, 1)), FiniteSpace.of(a=(0, 1)), FiniteSpace.of(b=(0, 1))
    m1 = LiCbn(
        BOW,
        spaces,
        {
            "u": FiniteKernel.distribution(U, bern(pu)),
            "a": FiniteKernel.from_function(U, A, lambda s: bern(pa[s["u"]])),
            "b": FiniteKernel.from_function(A + U, Bs, lambda s: bern(pb[s["a"]][s["u"]])),
        },
    )
    pa1 = (1 - pu) * pa[0] + pu * pa[1]

    def pb_given_a(a):
        w = [(1 - pu) * (pa[0] if a else 1 - pa[0]), pu * (pa[1] if a else 1 - pa[1])]
        return (w[0] * pb[a][0] + w[1] * pb[a][1]) / (w[0] + w[1])

    m2 = LiCbn(
        BOW,
        spaces,
        {
            "u": FiniteKernel.distribution(U, bern(pa1)),
            "a": FiniteKernel.deterministic(U, A, lambda s: s["u"]),
            "b": FiniteKernel.from_function(A + U, Bs, lambda s: bern(pb_given_a(s["a"]))),
        },
    )
    return m1, m2


def interventional_gap(m1: LiCbn, m2: LiCbn) -> Fraction:
    """``|P_1(b=1 || do(a=1)) - P_2(b=1 || do(a=1))|`` as an exact fraction."""
    d1, d2 = oracle_do(m1, {"a"}), oracle_do(m2, {"a"})
    return Fraction(abs(d1.mass({"b": 1}, {"a": 1}) - d2.mass({"b": 1}, {"a": 1})))


def bow_witness(min_gap: Fraction = Fraction(1, 20)) -> tuple[LiCbn, LiCbn]:
    """Search a small grid of strictly positive rational CPTs for the largest gap.

    The first grid point attaining the maximum wins; equal observables and
    the gap are re-verified exactly on the returned models.
    """
    grid = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]
    best = None
    for pu, pa0, pa1, b00, b01, b10, b11 in itertools.product(grid, [Fraction(1, 4), Fraction(3, 4)], [Fraction(1, 4), Fraction(3, 4)], *[grid] * 4):
        pa = (pa0, pa1)
        pb = ((b00, b01), (b10, b11))
        # closed-form gap, cheap to scan; the winner is verified on real models
        w = [(1 - pu) * pa[0], pu * pa[1]]
        obs = (w[0] * pb[1][0] + w[1] * pb[1][1]) / (w[0] + w[1])
        do = (1 - pu) * pb[1][0] + pu * pb[1][1]
        gap = abs(do - obs)
        if best is None or gap > best[0]:
            best = (gap, pu, pa, pb)
    gap, pu, pa, pb = best
    m1, m2 = bow_models(pu, pa, pb)
    if observable_kernel(m1) != observable_kernel(m2):
        raise IdentifyError("witness search produced different observables")
    if interventional_gap(m1, m2) < min_gap:
        raise IdentifyError("witness search found no gap above the bound")
    return m1, m2


@dataclass
class OracleSweep:
    graphs: int = 0
    queries: int = 0
    identifiable: int = 0
    checks: int = 0
    mismatches: list = field(default_factory=list)


def disjoint_pairs(nodes: Iterable[str]) -> list[tuple[frozenset, frozenset]]:
    """All ``(A, B)`` of disjoint non-empty subsets of ``nodes``."""
    nodes = sorted(nodes)
    out = []
    for labels in itertools.product(range(3), repeat=len(nodes)):
        A = frozenset(v for v, l in zip(nodes, labels) if l == 1)
        B = frozenset(v for v, l in zip(nodes, labels) if l == 2)
        if A and B:
            out.append((A, B))
    return out


def oracle_sweep(graphs: Iterable[MixedGraph], models_per_graph: int = 20, seed: int = 0, cards: int = 2) -> OracleSweep:
    """Compare evaluated formulas with the interventional oracle.

    Each graph is realised by its canonical latent DAG; every identifiable
    ``(A, B)`` is checked on ``models_per_graph`` strictly positive models
    seeded by ``(seed, graph index, model index)``.
    """
    import random

    from .cbn import canonical_dag, random_model

    rep = OracleSweep()
    for gi, g in enumerate(graphs):
        rep.graphs += 1
        results = [(A, B, one_line_identify(g, A, B)) for A, B in disjoint_pairs(g.observed)]
        rep.queries += len(results)
        ok = [(A, B, r.formula) for A, B, r in results if r.identifiable]
        rep.identifiable += len(ok)
        if not ok:
            continue
        dag = canonical_dag(g)
        for mi in range(models_per_graph):
            m = random_model(dag, random.Random(f"{seed}/{gi}/{mi}"), cards=cards)
            obs = observable_kernel(m)
            cache: dict = {}
            dos: dict = {}
            for A, B, f in ok:
                if B not in dos:
                    dos[B] = oracle_do(m, B)
                rep.checks += 1
                if evaluate(f, obs, B, cache) != marginalize(dos[B], A):
                    rep.mismatches.append((g, A, B, mi))
    return rep
