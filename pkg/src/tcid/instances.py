"""Small named graphs and models used by the tests, the gallery and the CLI."""

from __future__ import annotations

from fractions import Fraction as F

from .cbn import LiCbn
from .graph import MixedGraph, graph
from .kernel import FiniteKernel, FiniteSpace

BIN = (0, 1)


def bern(p) -> dict:
    return {(0,): 1 - F(p), (1,): F(p)}


def chain() -> MixedGraph:
    return graph(observed="abc", directed=[("a", "b"), ("b", "c")])


def triangle() -> MixedGraph:
    """``c -> a``, ``c -> b``, ``a -> b``: ``c`` confounds the effect of ``a`` on ``b``."""
    return graph(observed="abc", directed=[("c", "a"), ("c", "b"), ("a", "b")])


def bow() -> MixedGraph:
    return graph(observed="ab", directed=[("a", "b")], bidirected=[("a", "b")])


def frontdoor() -> MixedGraph:
    return graph(observed="abc", directed=[("a", "c"), ("c", "b")], bidirected=[("a", "b")])


def frontdoor_dag() -> MixedGraph:
    return graph(observed="abc", latent=["u"], directed=[("u", "a"), ("u", "b"), ("a", "c"), ("c", "b")])


def asymmetry_graph() -> MixedGraph:
    """Inputs on every node, with ``b -> c -> a``."""
    return graph(
        inputs=["I_a", "I_b", "I_c"],
        observed="abc",
        directed=[("I_a", "a"), ("I_b", "b"), ("I_c", "c"), ("b", "c"), ("c", "a")],
    )


def _space(**d) -> FiniteSpace:
    return FiniteSpace(tuple(d.items()))


def asymmetry_model() -> LiCbn:
    """Binary, deterministic: ``b = I_b``, ``c = b xor I_c``, ``a = c xor I_a``.

    Given ``(c, I_a)`` the value of ``a`` is fixed, so ``a`` is conditionally
    independent of ``b``; but ``b`` still varies with the inputs ``I_b, I_c``
    for fixed ``(a, c, I_a)``, so the reverse statement fails.
    """
    g = asymmetry_graph()
    spaces = {n: BIN for n in g.nodes}
    mech = {
        "b": FiniteKernel.deterministic(_space(I_b=BIN), _space(b=BIN), lambda s: s["I_b"]),
        "c": FiniteKernel.deterministic(_space(b=BIN, I_c=BIN), _space(c=BIN), lambda s: s["b"] ^ s["I_c"]),
        "a": FiniteKernel.deterministic(_space(c=BIN, I_a=BIN), _space(a=BIN), lambda s: s["c"] ^ s["I_a"]),
    }
    return LiCbn(g, spaces, mech)


# fixed rational front-door mechanisms: P(u=1), P(a=1|u), P(c=1|a), P(b=1|c,u)
FRONTDOOR_CPTS = {
    "u": F(2, 5),
    "a": {0: F(1, 4), 1: F(3, 4)},
    "c": {0: F(1, 5), 1: F(2, 3)},
    "b": {(0, 0): F(1, 6), (0, 1): F(1, 2), (1, 0): F(3, 7), (1, 1): F(5, 6)},
}


def frontdoor_model() -> LiCbn:
    p = FRONTDOOR_CPTS
    g = frontdoor_dag()
    spaces = {n: BIN for n in g.nodes}
    mech = {
        "u": FiniteKernel.distribution(_space(u=BIN), bern(p["u"])),
        "a": FiniteKernel.from_function(_space(u=BIN), _space(a=BIN), lambda s: bern(p["a"][s["u"]])),
        "c": FiniteKernel.from_function(_space(a=BIN), _space(c=BIN), lambda s: bern(p["c"][s["a"]])),
        "b": FiniteKernel.from_function(
            _space(c=BIN, u=BIN), _space(b=BIN), lambda s: bern(p["b"][(s["c"], s["u"])])
        ),
    }
    return LiCbn(g, spaces, mech)


def triangle_model(pc=F(1, 3), pa=(F(1, 4), F(2, 3)), pb=((F(1, 5), F(1, 2)), (F(3, 5), F(5, 6)))) -> LiCbn:
    """Binary triangle with ``P(c=1)``, ``P(a=1|c)`` and ``P(b=1|a,c)`` given as ``pb[a][c]``."""
    g = triangle()
    spaces = {n: BIN for n in g.nodes}
    mech = {
        "c": FiniteKernel.distribution(_space(c=BIN), bern(pc)),
        "a": FiniteKernel.from_function(_space(c=BIN), _space(a=BIN), lambda s: bern(pa[s["c"]])),
        "b": FiniteKernel.from_function(
            _space(a=BIN, c=BIN), _space(b=BIN), lambda s: bern(pb[s["a"]][s["c"]])
        ),
    }
    return LiCbn(g, spaces, mech)


def backdoor_failure_model() -> LiCbn:
    """Triangle in which ``a`` is pinned to 0 whenever ``c = 0``.

    The cell ``(a=1, c=0)`` has no observational mass, so the adjustment
    formula must fall back on an arbitrary conditional there, while the
    mechanism of ``b`` at that cell is a point mass at 1.
    """
    return triangle_model(pc=F(1, 2), pa=(F(0), F(1, 2)), pb=((F(1, 4), F(1, 3)), (F(1), F(2, 3))))
