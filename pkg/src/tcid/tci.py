"""Transitional conditional independence on finite transitional probability spaces.

``X _||_ Y | Z`` w.r.t. ``K(W || T)`` holds iff a single kernel ``Q(X || Z)``,
free of ``T`` and ``Y``, satisfies ``K(X,Y,Z || T) = Q(X || Z) (x) K(Y,Z || T)``.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from gmpy2 import mpq

from .kernel import FiniteKernel, FiniteSpace, KernelError, marginalize, product


class TciError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    """A transitional random variable: a map on joint ``(w, t)`` points.

    Either a projection onto ``coords`` or ``fn(point_dict)`` with an explicit
    finite ``codomain``. Projection values are tuples of coordinate values.
    """

    coords: tuple[str, ...] = ()
    fn: Callable[[Mapping[str, Any]], Hashable] | None = None
    codomain: tuple[Hashable, ...] | None = None

    def __call__(self, point: Mapping[str, Any]) -> Hashable:
        if self.fn is None:
            return tuple(point[c] for c in self.coords)
        return self.fn(point)


class TransitionalSpace:
    """A finite kernel ``K(W || T)`` together with named transitional variables."""

    def __init__(self, kernel: FiniteKernel, variables: Mapping[str, Sequence[str] | Variable] | None = None):
        self.kernel = kernel
        self.variables: dict[str, Variable] = {}
        coords = set(kernel.source.names) | set(kernel.target.names)
        for name, v in (variables or {}).items():
            if not isinstance(v, Variable):
                v = Variable(coords=tuple([v] if isinstance(v, str) else v))
            if v.fn is None:
                bad = set(v.coords) - coords
                if bad:
                    raise TciError(f"variable {name!r} projects onto unknown coordinates {sorted(bad)}")
            elif v.codomain is None:
                raise TciError(f"variable {name!r} needs a codomain")
            self.variables[name] = v

    @classmethod
    def from_coordinates(cls, kernel: FiniteKernel) -> TransitionalSpace:
        """Declare one projection variable per source and target coordinate."""
        names = kernel.source.names + kernel.target.names
        return cls(kernel, {n: (n,) for n in names})

    def declare(self, name: str, var: Sequence[str] | Variable) -> TransitionalSpace:
        vs = dict(self.variables)
        vs[name] = var
        return TransitionalSpace(self.kernel, vs)

    def variable(self, spec: str | Sequence[str] | None) -> tuple[str, Variable]:
        """Resolve a name, a list of names (tupled together) or ``None`` (constant)."""
        if spec is None or (not isinstance(spec, str) and len(spec) == 0):
            return "*", Variable(fn=lambda _: (), codomain=((),))
        if isinstance(spec, str):
            if spec not in self.variables:
                raise TciError(f"undeclared variable {spec!r}")
            return spec, self.variables[spec]
        parts = [self.variable(s) for s in spec]
        if all(v.fn is None for _, v in parts):
            coords = tuple(c for _, v in parts for c in v.coords)
            return ",".join(n for n, _ in parts), Variable(coords=coords)
        return ",".join(n for n, _ in parts), Variable(
            fn=lambda p, parts=parts: tuple(v(p) for _, v in parts),
            codomain=tuple(itertools.product(*(self.codomain(v) for _, v in parts))),
        )

    def codomain(self, v: Variable) -> tuple[Hashable, ...]:
        if v.fn is not None:
            return tuple(v.codomain)
        doms = {**self.kernel.source.domains, **self.kernel.target.domains}
        return tuple(itertools.product(*(doms[c] for c in v.coords)))

    def cells(self, used: Iterable[str] | None = None):
        """Yield ``(source_index, point_dict, mass)`` for positive-mass cells.

        ``used`` lists the coordinates the caller needs; other target
        coordinates are summed out first.
        """
        k = self.kernel
        if used is not None:
            k = marginalize(k, [n for n in k.target.names if n in set(used)])
        snames, tnames = k.source.names, k.target.names
        ns = len(snames)
        for idx in zip(*np.nonzero(k.table != 0)) if k.table.ndim else ([()] if k.table[()] != 0 else []):
            idx = tuple(int(i) for i in idx)
            sval = k.source.value_at(idx[:ns])
            tval = k.target.value_at(idx[ns:])
            point = dict(zip(snames, sval))
            point.update(zip(tnames, tval))
            yield idx[:ns], point, k.table[idx]

    def _used(self, *vs: Variable) -> list[str] | None:
        if any(v.fn is not None for v in vs):
            return None
        return [c for v in vs for c in v.coords]

    def joint(self, specs: Sequence[str | Sequence[str] | None]) -> FiniteKernel:
        """The kernel ``K(V_1, ..., V_n || T)`` of the listed variables.

        Target variables are named by their labels (suffixed on repeats).
        """
        resolved = [self.variable(s) for s in specs]
        labels = []
        for name, _ in resolved:
            label = name
            while label in labels or label in self.kernel.source.names:
                label += "'"
            labels.append(label)
        target = FiniteSpace(tuple((lab, self.codomain(v)) for lab, (_, v) in zip(labels, resolved)))
        source = self.kernel.source
        table = np.full(source.shape + target.shape, mpq(0), dtype=object)
        for sidx, point, m in self.cells(self._used(*(v for _, v in resolved))):
            tidx = target.index_of([v(point) for _, v in resolved])
            table[sidx + tidx] += m
        return FiniteKernel(source, target, table, check=False)


@dataclass
class TciCertificate:
    holds: bool
    witness_q: FiniteKernel | None = None
    violation: tuple | None = None
    unconstrained: list = field(default_factory=list)

    def __post_init__(self):
        assert self.holds == (self.witness_q is not None)
        assert self.holds != (self.violation is not None)

    def __bool__(self) -> bool:
        return self.holds


def tci_check(
    s: TransitionalSpace,
    X: str | Sequence[str],
    Y: str | Sequence[str] | None,
    Z: str | Sequence[str] | None = None,
) -> TciCertificate:
    """Decide ``X _||_ Y | Z`` exactly and return a witness or a violation.

    The violation is ``(z, (t1, y1), (t2, y2))``: two positive-mass
    conditioning cells sharing ``z`` whose conditionals over ``X`` differ.
    Witness rows for ``z`` values never observed with positive mass are uniform.
    """
    xname, xv = s.variable(X)
    yname, yv = s.variable(Y)
    zname, zv = s.variable(Z)
    # (t, y, z) -> {x: mass}
    groups: dict[tuple, dict] = defaultdict(lambda: defaultdict(mpq))
    for sidx, point, m in s.cells(s._used(xv, yv, zv)):
        t = s.kernel.source.value_at(sidx)
        groups[(t, yv(point), zv(point))][xv(point)] += m
    common: dict[Hashable, tuple[tuple, dict]] = {}
    for (t, y, z), row in groups.items():
        total = sum(row.values())
        cond = {x: m / total for x, m in row.items() if m != 0}
        if z in common:
            ref_ty, ref = common[z]
            if ref != cond:
                return TciCertificate(False, violation=(z, ref_ty, (t, y)))
        else:
            common[z] = ((t, y), cond)
    xdom = s.codomain(xv)
    zdom = s.codomain(zv)
    xlabel = xname if xname != zname else xname + "'"
    target = FiniteSpace(((xlabel, xdom),))
    source = FiniteSpace(((zname, zdom),))
    unconstrained = [z for z in zdom if z not in common]

    def row(sp):
        z = sp[zname]
        if z in common:
            return {(x,): m for x, m in common[z][1].items()}
        return {(x,): mpq(1, len(xdom)) for x in xdom}

    q = FiniteKernel.from_function(source, target, row)
    return TciCertificate(True, witness_q=q, unconstrained=unconstrained)


def tci_symmetric(s: TransitionalSpace, X, Y, Z=None) -> bool:
    return tci_check(s, X, Y, Z).holds or tci_check(s, Y, X, Z).holds


def reconstruct(s: TransitionalSpace, cert: TciCertificate, X, Y, Z=None) -> bool:
    """Check ``Q(X || Z) (x) K(Y, Z || T) == K(X, Y, Z || T)`` exactly."""
    if not cert.holds:
        raise TciError("no witness to check")
    q = cert.witness_q
    zname = q.source.names[0]
    xlabel = q.target.names[0]
    joint = s.joint([X, Y, Z])
    jx, jy, jz = joint.target.names
    yz = marginalize(joint, [jy, jz])
    q = FiniteKernel(FiniteSpace(((jz, q.source.domain(zname)),)), FiniteSpace(((jx, q.target.domain(xlabel)),)), q.table, check=False)
    return product(q, yz) == joint


def statistic_check(
    model: FiniteKernel,
    S: Callable[[Mapping[str, Any]], Hashable],
    codomain: Sequence[Hashable],
    mode: str,
    aux: Sequence[str] = (),
) -> TciCertificate:
    """Ancillarity, sufficiency or adequacy of the statistic ``S`` as a TCI.

    ``model`` is ``P(X, Y || theta)``; ``aux`` names the target coordinates
    forming ``Y`` (adequacy only). ``S`` maps a target point dict to a value
    in ``codomain``.
    """
    theta = model.source.names
    aux = tuple(aux)
    data = tuple(n for n in model.target.names if n not in aux)
    codomain = tuple(codomain)
    for pt in model.target.points():
        try:
            val = S(dict(zip(model.target.names, pt)))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TciError(f"statistic is not total: fails on {pt!r}: {exc}") from exc
        if val not in codomain:
            raise TciError(f"statistic value {val!r} at {pt!r} outside its codomain")
    space = TransitionalSpace(
        model,
        {"theta": theta, "X": data, "Y": aux, "S": Variable(fn=S, codomain=codomain)},
    )
    if mode == "ancillary":
        return tci_check(space, "S", "theta")
    if mode == "sufficient":
        return tci_check(space, "X", "theta", "S")
    if mode == "adequate":
        if not aux:
            raise TciError("adequacy needs auxiliary target coordinates")
        return tci_check(space, "X", ["theta", "Y"], "S")
    raise TciError(f"unknown mode {mode!r}")
