"""Global Markov property and causal-calculus rules checked on finite models.

Each rule is evaluated three ways: the graphical id-separation condition, a
discrete positivity condition (strictly positive mass), and exact equality of
the two kernels the rule relates, compared on rows where both conditioning
masses are positive.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .cbn import LiCbn, observable_kernel, oracle_do
from .graph import MixedGraph, id_separated, input_name, latent_project, manipulate_hard, manipulate_soft
from .kernel import (
    FiniteKernel,
    _broadcast,
    absolutely_continuous,
    compose,
    disintegrate,
    extend_source,
    marginalize,
    product,
    strictly_positive,
)
from .tci import TransitionalSpace, tci_check


class CalculusError(ValueError):
    pass


# -- Markov property


@dataclass
class MarkovReport:
    violations: list[tuple] = field(default_factory=list)
    checked: int = 0
    separated: int = 0
    total: int = 0
    exhausted: bool = False
    unfaithful: list[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def disjoint_triples(nodes: Iterable[str], require_b: bool = False) -> Iterator[tuple[frozenset, frozenset, frozenset]]:
    """All disjoint ``(A, B, C)`` over ``nodes`` with ``A`` non-empty."""
    nodes = sorted(nodes)
    for labels in itertools.product(range(4), repeat=len(nodes)):
        A = frozenset(n for n, l in zip(nodes, labels) if l == 1)
        B = frozenset(n for n, l in zip(nodes, labels) if l == 2)
        C = frozenset(n for n, l in zip(nodes, labels) if l == 3)
        if A and (B or not require_b):
            yield A, B, C


def verify_markov(
    m: LiCbn,
    max_subsets: int | None = None,
    seed: int = 0,
    log_unfaithful: bool = False,
    max_nodes: int = 7,
) -> MarkovReport:
    """Check ``A _|_id B | C  =>  X_A _||_ X_B | X_C`` for disjoint triples.

    With a budget smaller than the number of triples, a seeded random sample
    of that size is checked and ``exhausted`` is set.
    """
    g = latent_project(m.graph)
    nodes = sorted(g.inputs | g.observed)
    if len(nodes) > max_nodes and max_subsets is None:
        raise CalculusError(f"{len(nodes)} nodes exceed the enumeration limit of {max_nodes}; pass a budget")
    space = TransitionalSpace.from_coordinates(observable_kernel(m))
    triples = list(disjoint_triples(nodes))
    report = MarkovReport(total=len(triples))
    if max_subsets is not None and len(triples) > max_subsets:
        triples = random.Random(seed).sample(triples, max_subsets)
        report.exhausted = True
    for A, B, C in triples:
        report.checked += 1
        sep = id_separated(g, A, B, C)
        if not sep and not log_unfaithful:
            continue
        cert = tci_check(space, sorted(A), sorted(B), sorted(C))
        if sep:
            report.separated += 1
            if not cert.holds:
                report.violations.append((A, B, C, cert.violation))
        elif cert.holds:
            report.unfaithful.append((A, B, C))
    return report


# -- rules


@dataclass
class RuleReport:
    rule: str
    graphical_ok: bool
    positivity_ok: bool
    equality_ok: bool | None = None
    counterexample: dict | None = None
    support_equality: bool | None = None
    excluded_rows: int = 0
    sets: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.equality_ok is not None and not (self.graphical_ok and self.positivity_ok):
            raise CalculusError("equality is only claimed when both conditions hold")

    @property
    def applicable(self) -> bool:
        return self.graphical_ok and self.positivity_ok

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "graphical_ok": self.graphical_ok,
            "positivity_ok": self.positivity_ok,
            "equality_ok": self.equality_ok,
            "support_equality": self.support_equality,
            "excluded_rows": self.excluded_rows,
            "counterexample": None if self.counterexample is None else {k: str(v) for k, v in self.counterexample.items()},
            "sets": {k: sorted(v) for k, v in self.sets.items()},
        }


class Oracle:
    """Per-model cache of interventional kernels and the projected graph."""

    def __init__(self, m: LiCbn):
        self.m = m
        self.graph: MixedGraph = latent_project(m.graph)
        self.inputs = frozenset(m.graph.inputs)
        self._do: dict[frozenset, FiniteKernel] = {}

    def do(self, D: Iterable[str]) -> FiniteKernel:
        D = frozenset(D)
        if D not in self._do:
            self._do[D] = oracle_do(self.m, D)
        return self._do[D]

    def marginal(self, keep: Iterable[str], do: Iterable[str] = ()) -> FiniteKernel:
        return marginalize(self.do(do), keep)

    def conditional(self, A, given, do=()) -> tuple[FiniteKernel, FiniteKernel]:
        """``P(X_A | X_given || do(X_do))`` and the conditioning marginal."""
        joint = self.marginal(set(A) | set(given), do)
        return disintegrate(joint, given), marginalize(joint, given)


def _as_oracle(m: LiCbn | Oracle) -> Oracle:
    return m if isinstance(m, Oracle) else Oracle(m)


def _check_sets(o: Oracle, **sets) -> dict[str, frozenset]:
    out = {k: frozenset(v) for k, v in sets.items()}
    seen: set[str] = set()
    for name, s in out.items():
        if s & seen:
            raise CalculusError(f"sets must be disjoint; {sorted(s & seen)} repeated in {name}")
        bad = s - o.graph.observed
        if bad:
            raise CalculusError(f"{name} contains non-observed nodes {sorted(bad)}")
        seen |= s
    return out


def _mask(k: FiniteKernel, marg: FiniteKernel) -> np.ndarray:
    """Boolean table over ``k``'s source: conditioning mass positive."""
    names = k.source.names
    ext = extend_source(marg, k.source.without(marg.target.names))
    pos = np.asarray(ext.table != 0, dtype=bool)
    return np.broadcast_to(_broadcast(pos, ext.names, names), k.source.shape)


def compare_on_support(
    left: FiniteKernel, left_marg: FiniteKernel, right: FiniteKernel, right_marg: FiniteKernel
) -> tuple[bool, dict | None, int]:
    """Compare two conditionals on rows where both conditioning masses are positive.

    Returns ``(equal, first_offending_source_point, excluded_row_count)``.
    """
    right = extend_source(right, left.source.without(right.source.names))
    if not left.same_spaces(right):
        raise CalculusError("conditionals live on different spaces")
    mask = _mask(left, left_marg) & _mask(left, right_marg)
    rt = left.aligned(right)
    ns = len(left.source)
    excluded = 0
    for sidx in left.source.indices():
        if not mask[sidx]:
            excluded += 1
            continue
        a = left.table[sidx]
        b = rt[sidx]
        if not bool(np.all(a == b)):
            return False, dict(zip(left.source.names, left.source.value_at(sidx))), excluded
    return True, None, excluded


def _report(rule, graphical, positive, o_eq, sets) -> RuleReport:
    eq, cex, excluded = o_eq if o_eq is not None else (None, None, 0)
    return RuleReport(
        rule=rule,
        graphical_ok=graphical,
        positivity_ok=positive,
        equality_ok=eq if (graphical and positive) else None,
        counterexample=cex,
        support_equality=eq,
        excluded_rows=excluded,
        sets=sets,
    )


def rule1(m: LiCbn | Oracle, A, B, C=(), D=(), always_compare: bool = True) -> RuleReport:
    """Insertion/deletion of observations."""
    o = _as_oracle(m)
    s = _check_sets(o, A=A, B=B, C=C, D=D)
    A, B, C, D = s["A"], s["B"], s["C"], s["D"]
    g = manipulate_hard(o.graph, D)
    graphical = id_separated(g, A, B, C | D | o.inputs)
    positive = strictly_positive(o.marginal(B | C, D))
    res = None
    if graphical and (positive or always_compare):
        left, lm = o.conditional(A, B | C, D)
        right, rm = o.conditional(A, C, D)
        res = compare_on_support(left, lm, right, rm)
    return _report("R1", graphical, positive, res, s)


def _soft_hard(o: Oracle, B, D) -> tuple[MixedGraph, frozenset]:
    g = manipulate_hard(manipulate_soft(o.graph, B), D)
    return g, frozenset(input_name(b) for b in B)


def rule2(m: LiCbn | Oracle, A, B, C=(), D=(), always_compare: bool = True) -> RuleReport:
    """Action/observation exchange."""
    o = _as_oracle(m)
    s = _check_sets(o, A=A, B=B, C=C, D=D)
    A, B, C, D = s["A"], s["B"], s["C"], s["D"]
    g, IB = _soft_hard(o, B, D)
    graphical = id_separated(g, A, IB, B | C | D | o.inputs)
    positive = strictly_positive(o.marginal(B | C, D)) and strictly_positive(o.marginal(C, B | D))
    res = None
    if graphical and (positive or always_compare):
        left, lm = o.conditional(A, C, B | D)
        right, rm = o.conditional(A, B | C, D)
        res = compare_on_support(left, lm, right, rm)
    return _report("R2", graphical, positive, res, s)


def rule3(m: LiCbn | Oracle, A, B, C=(), D=(), always_compare: bool = True) -> RuleReport:
    """Insertion/deletion of actions."""
    o = _as_oracle(m)
    s = _check_sets(o, A=A, B=B, C=C, D=D)
    A, B, C, D = s["A"], s["B"], s["C"], s["D"]
    g, IB = _soft_hard(o, B, D)
    graphical = id_separated(g, A, IB, C | D | o.inputs)
    positive = strictly_positive(o.marginal(C, B | D)) and strictly_positive(o.marginal(C, D))
    res = None
    if graphical and (positive or always_compare):
        left, lm = o.conditional(A, C, B | D)
        right, rm = o.conditional(A, C, D)
        res = compare_on_support(left, lm, right, rm)
    return _report("R3", graphical, positive, res, s)


def adjusted_kernels(o: Oracle, A, B, F) -> tuple[FiniteKernel, FiniteKernel]:
    """``P(X_A | X_F, X_B) (x) P(X_F)`` and ``P(X_A | X_F, X_B) o P(X_F)``."""
    cond = disintegrate(o.marginal(A | B | F), B | F)
    pf = o.marginal(F)
    return product(cond, pf), compose(cond, pf)


def backdoor(m: LiCbn | Oracle, A, B, F=(), always_compare: bool = True) -> RuleReport:
    """Back-door adjustment through ``F``, compared where ``P(x_B) > 0``."""
    o = _as_oracle(m)
    s = _check_sets(o, A=A, B=B, F=F)
    A, B, F = s["A"], s["B"], s["F"]
    g = manipulate_soft(o.graph, B)
    IB = frozenset(input_name(b) for b in B)
    graphical = id_separated(g, F, IB, o.inputs) and id_separated(g, A, IB, B | F | o.inputs)
    pfb = o.marginal(F | B)
    positive = absolutely_continuous(product(o.marginal(F), o.marginal(B)), pfb)
    res = None
    if graphical and (positive or always_compare):
        joint_adj, marg_adj = adjusted_kernels(o, A, B, F)
        pb = o.marginal(B)
        unit = marginalize(pb, ())
        res1 = compare_on_support(o.marginal(A | F, B), pb, joint_adj, unit)
        res2 = compare_on_support(o.marginal(A, B), pb, marg_adj, unit)
        res = res1 if not res1[0] else res2
    return _report("BackDoor", graphical, positive, res, s)


def calculus_sweep(m: LiCbn, max_size: int = 4) -> list[RuleReport]:
    """All three rules and back-door adjustment over disjoint sets of observed nodes."""
    o = Oracle(m)
    V = sorted(o.graph.observed)
    out = []
    for labels in itertools.product(range(5), repeat=len(V)):
        sets = [frozenset(v for v, l in zip(V, labels) if l == i) for i in range(1, 5)]
        A, B, C, D = sets
        if not A or sum(map(len, sets)) > max_size:
            continue
        if B:
            out.append(rule1(o, A, B, C, D))
            out.append(rule2(o, A, B, C, D))
            out.append(rule3(o, A, B, C, D))
            if not D:
                out.append(backdoor(o, A, B, C))
    return out
