"""Exact Markov kernels between finite product spaces.

A kernel ``K(Y || T)`` is stored as a dense ``numpy`` object array of
``gmpy2.mpq`` rationals whose axes are the source variables followed by the
target variables. Variables are always matched by name, never by position.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np
from gmpy2 import mpq

Rational = type(mpq(0))
ZERO = mpq(0)
ONE = mpq(1)


class KernelError(ValueError):
    """Raised for malformed kernels or incompatible kernel operations."""


def rational(x: Any) -> Rational:
    """Coerce ints, fractions, ``"p/q"`` strings and mpq values to an exact rational."""
    if isinstance(x, Rational):
        return x
    if isinstance(x, bool):
        raise KernelError("booleans are not probabilities")
    if isinstance(x, (int, Fraction)):
        return mpq(x)
    if isinstance(x, str):
        try:
            return mpq(x.strip())
        except ValueError:
            raise KernelError(f"cannot parse rational {x!r}") from None
    if isinstance(x, float):
        raise KernelError(f"refusing inexact float {x!r}; pass a Fraction or 'p/q' string")
    try:
        return mpq(x)
    except (TypeError, ValueError):
        raise KernelError(f"cannot convert {x!r} to a rational") from None


_to_rational = np.frompyfunc(rational, 1, 1)


def _as_object(table: Any, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.asarray(table, dtype=object)
    if arr.shape != shape:
        raise KernelError(f"table has shape {arr.shape}, expected {shape}")
    if arr.shape == ():
        out = np.empty((), dtype=object)
        out[()] = rational(arr[()])
        return out
    return _to_rational(arr).astype(object)


@dataclass(frozen=True)
class FiniteSpace:
    """Ordered product of named finite domains; ``FiniteSpace(())`` is the one-point space."""

    vars: tuple[tuple[str, tuple[Hashable, ...]], ...] = ()

    def __post_init__(self):
        norm = tuple((str(n), tuple(d)) for n, d in self.vars)
        object.__setattr__(self, "vars", norm)
        names = [n for n, _ in norm]
        if len(set(names)) != len(names):
            raise KernelError(f"duplicate variable names in {names}")
        for n, d in norm:
            if not d:
                raise KernelError(f"variable {n!r} has an empty domain")
            if len(set(d)) != len(d):
                raise KernelError(f"variable {n!r} has repeated domain values")

    @classmethod
    def _trusted(cls, vars: tuple) -> FiniteSpace:
        # sub-spaces of an already validated space skip re-validation
        out = object.__new__(cls)
        object.__setattr__(out, "vars", vars)
        return out

    @classmethod
    def of(cls, **domains: Sequence[Hashable]) -> FiniteSpace:
        return cls(tuple(domains.items()))

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.vars)

    @property
    def domains(self) -> dict[str, tuple[Hashable, ...]]:
        return dict(self.vars)

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(d) for _, d in self.vars)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.vars)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def domain(self, name: str) -> tuple[Hashable, ...]:
        try:
            return self.domains[name]
        except KeyError:
            raise KernelError(f"unknown variable {name!r}") from None

    def points(self) -> Iterator[tuple[Hashable, ...]]:
        return itertools.product(*(d for _, d in self.vars))

    def indices(self) -> Iterator[tuple[int, ...]]:
        return np.ndindex(*self.shape) if self.vars else iter([()])

    def value_at(self, idx: tuple[int, ...]) -> tuple[Hashable, ...]:
        return tuple(d[i] for (_, d), i in zip(self.vars, idx))

    def index_of(self, point: Mapping[str, Hashable] | Sequence[Hashable]) -> tuple[int, ...]:
        if isinstance(point, Mapping):
            point = [point[n] for n in self.names]
        if len(point) != len(self.vars):
            raise KernelError(f"point {point!r} does not match space {self.names}")
        try:
            return tuple(d.index(v) for (_, d), v in zip(self.vars, point))
        except ValueError:
            raise KernelError(f"point {point!r} outside space {self.vars}") from None

    def select(self, names: Iterable[str]) -> FiniteSpace:
        """Sub-space on ``names``, keeping this space's order."""
        names = set(names)
        return FiniteSpace._trusted(tuple((n, d) for n, d in self.vars if n in names))

    def without(self, names: Iterable[str]) -> FiniteSpace:
        names = set(names)
        return FiniteSpace._trusted(tuple((n, d) for n, d in self.vars if n not in names))

    def __add__(self, other: FiniteSpace) -> FiniteSpace:
        if not other.vars:
            return self
        if not self.vars:
            return other
        if set(self.names) & set(other.names):
            raise KernelError(f"duplicate variable names in {self.names + other.names}")
        return FiniteSpace._trusted(self.vars + other.vars)

    def merge(self, other: FiniteSpace) -> FiniteSpace:
        """Union of variables, checking that shared names carry equal domains."""
        mine = self.domains
        extra = []
        for n, d in other.vars:
            if n in mine:
                if mine[n] != d:
                    raise KernelError(f"variable {n!r} has conflicting domains {mine[n]} vs {d}")
            else:
                extra.append((n, d))
        return FiniteSpace._trusted(self.vars + tuple(extra)) if extra else self


def _broadcast(table: np.ndarray, names: Sequence[str], all_names: Sequence[str]) -> np.ndarray:
    """View ``table`` (axes ``names``) as broadcastable over axes ``all_names``."""
    pos = {n: i for i, n in enumerate(names)}
    present = [n for n in all_names if n in pos]
    arr = np.transpose(table, [pos[n] for n in present]) if names else table
    shape = []
    it = iter(arr.shape)
    for n in all_names:
        shape.append(next(it) if n in pos else 1)
    return arr.reshape(shape)


def _transpose_to(table: np.ndarray, names: Sequence[str], order: Sequence[str]) -> np.ndarray:
    pos = {n: i for i, n in enumerate(names)}
    if not names:
        return table
    return np.transpose(table, [pos[n] for n in order])


class FiniteKernel:
    """Row-stochastic kernel ``K(target || source)`` with exact rational masses."""

    __slots__ = ("source", "target", "table")

    def __init__(self, source: FiniteSpace, target: FiniteSpace, table: Any, check: bool = True):
        if set(source.names) & set(target.names):
            raise KernelError(
                f"source and target share variables {sorted(set(source.names) & set(target.names))}"
            )
        self.source = source
        self.target = target
        arr = _as_object(table, source.shape + target.shape) if check else _arr(table)
        arr.flags.writeable = False
        self.table = arr
        if check:
            self._check_rows()

    def _check_rows(self) -> None:
        if any(x < 0 for x in self.table.flat):
            raise KernelError("negative mass in kernel table")
        sums = self.row_sums()
        bad = [s for s in np.asarray(sums, dtype=object).flat if s != ONE]
        if bad:
            raise KernelError(f"kernel rows must sum to 1, found sums {sorted(set(map(str, bad)))[:5]}")

    def row_sums(self) -> np.ndarray:
        nt = len(self.target)
        if nt == 0:
            return self.table
        return self.table.sum(axis=tuple(range(len(self.source), len(self.source) + nt)))

    # -- constructors

    @classmethod
    def from_function(
        cls,
        source: FiniteSpace,
        target: FiniteSpace,
        fn: Callable[[dict], Mapping[tuple, Any]],
    ) -> FiniteKernel:
        """Build from ``fn(source_point_dict) -> {target_point_tuple: mass}``."""
        table = np.full(source.shape + target.shape, ZERO, dtype=object)
        for sidx in source.indices():
            spt = dict(zip(source.names, source.value_at(sidx)))
            for tpt, m in fn(spt).items():
                if not isinstance(tpt, tuple):
                    tpt = (tpt,)
                table[sidx + target.index_of(tpt)] += rational(m)
        return cls(source, target, table)

    @classmethod
    def deterministic(
        cls, source: FiniteSpace, target: FiniteSpace, fn: Callable[[dict], Any]
    ) -> FiniteKernel:
        return cls.from_function(source, target, lambda s: {_tup(fn(s)): ONE})

    @classmethod
    def distribution(cls, target: FiniteSpace, masses: Mapping[Any, Any]) -> FiniteKernel:
        return cls.from_function(FiniteSpace(), target, lambda _: {_tup(k): v for k, v in masses.items()})

    @classmethod
    def uniform(cls, target: FiniteSpace, source: FiniteSpace = FiniteSpace()) -> FiniteKernel:
        n = target.size
        table = np.full(source.shape + target.shape, mpq(1, n), dtype=object)
        return cls(source, target, table)

    @classmethod
    def dirac(cls, target: FiniteSpace, point: Any, source: FiniteSpace = FiniteSpace()) -> FiniteKernel:
        return cls.deterministic(source, target, lambda _: point)

    @classmethod
    def unit(cls, source: FiniteSpace = FiniteSpace()) -> FiniteKernel:
        """The kernel to the one-point space."""
        table = np.full(source.shape, ONE, dtype=object) if source.vars else _scalar(ONE)
        return cls(source, FiniteSpace(), table)

    @classmethod
    def identity(cls, source: FiniteSpace, rename: Mapping[str, str]) -> FiniteKernel:
        """Copy kernel from ``source`` to renamed copies of its variables."""
        target = FiniteSpace(tuple((rename[n], d) for n, d in source.vars))
        return cls.deterministic(source, target, lambda s: tuple(s[n] for n in source.names))

    # -- access

    @property
    def names(self) -> tuple[str, ...]:
        return self.source.names + self.target.names

    def mass(self, target: Mapping[str, Any] | Sequence[Any], source: Mapping[str, Any] | Sequence[Any] = ()) -> Rational:
        return self.table[self.source.index_of(source) + self.target.index_of(target)]

    def row(self, source: Mapping[str, Any] | Sequence[Any] = ()) -> dict[tuple, Rational]:
        sidx = self.source.index_of(source)
        return {
            self.target.value_at(t): self.table[sidx + t] for t in self.target.indices()
        }

    def items(self) -> Iterator[tuple[tuple, tuple, Rational]]:
        """Yield ``(source_point, target_point, mass)`` for every cell."""
        for sidx in self.source.indices():
            for tidx in self.target.indices():
                yield self.source.value_at(sidx), self.target.value_at(tidx), self.table[sidx + tidx]

    def reorder(self, source: Sequence[str] | None = None, target: Sequence[str] | None = None) -> FiniteKernel:
        source = list(self.source.names if source is None else source)
        target = list(self.target.names if target is None else target)
        if sorted(source) != sorted(self.source.names) or sorted(target) != sorted(self.target.names):
            raise KernelError("reorder must be a permutation of the existing variables")
        sdom, tdom = self.source.domains, self.target.domains
        table = _transpose_to(self.table, self.names, source + target)
        return FiniteKernel(
            FiniteSpace._trusted(tuple((n, sdom[n]) for n in source)),
            FiniteSpace._trusted(tuple((n, tdom[n]) for n in target)),
            table,
            check=False,
        )

    def same_spaces(self, other: FiniteKernel) -> bool:
        return (
            dict(self.source.vars) == dict(other.source.vars)
            and dict(self.target.vars) == dict(other.target.vars)
        )

    def aligned(self, other: FiniteKernel) -> np.ndarray:
        """``other``'s table transposed into this kernel's axis order."""
        if not self.same_spaces(other):
            raise KernelError(
                f"space mismatch: {self.source.names}->{self.target.names} vs "
                f"{other.source.names}->{other.target.names}"
            )
        return _transpose_to(other.table, other.names, self.names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteKernel):
            return NotImplemented
        if not self.same_spaces(other):
            return False
        return bool(np.all(self.table == self.aligned(other)))

    __hash__ = None

    def __repr__(self) -> str:
        return f"FiniteKernel({','.join(self.target.names) or '*'} || {','.join(self.source.names) or '*'})"

    # -- JSON

    def to_dict(self) -> dict:
        def key(space, pt):
            return ",".join(f"{n}={v}" for n, v in zip(space.names, pt))

        mass = {}
        for sidx in self.source.indices():
            spt = self.source.value_at(sidx)
            mass[key(self.source, spt)] = {
                key(self.target, self.target.value_at(t)): str(self.table[sidx + t])
                for t in self.target.indices()
            }
        return {
            "source": [[n, [str(v) for v in d]] for n, d in self.source.vars],
            "target": [[n, [str(v) for v in d]] for n, d in self.target.vars],
            "mass": mass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> FiniteKernel:
        try:
            source = FiniteSpace(tuple((n, tuple(d)) for n, d in data.get("source", [])))
            target = FiniteSpace(tuple((n, tuple(d)) for n, d in data["target"]))
            table = np.full(source.shape + target.shape, ZERO, dtype=object)
            for skey, row in data["mass"].items():
                sidx = source.index_of(_parse_key(skey, source))
                for tkey, m in row.items():
                    table[sidx + target.index_of(_parse_key(tkey, target))] = rational(m)
        except (KeyError, TypeError, AttributeError) as exc:
            raise KernelError(f"malformed kernel JSON: {exc!r}") from exc
        return cls(source, target, table)

    @classmethod
    def from_json(cls, text: str) -> FiniteKernel:
        return cls.from_dict(json.loads(text))


def _scalar(x) -> np.ndarray:
    out = np.empty((), dtype=object)
    out[()] = x
    return out


def _arr(x) -> np.ndarray:
    """Object ndarray view of ``x``; numpy returns bare scalars from 0-d object ops."""
    if isinstance(x, np.ndarray):
        return x if x.dtype == object else x.astype(object)
    return _scalar(x)


def _tup(x) -> tuple:
    return x if isinstance(x, tuple) else (x,)


def _parse_key(key: str, space: FiniteSpace) -> dict:
    if not key:
        if space.vars:
            raise KernelError(f"empty point key for space {space.names}")
        return {}
    out = {}
    for part in key.split(","):
        name, _, value = part.partition("=")
        if name not in space:
            raise KernelError(f"unknown variable {name!r} in point key {key!r}")
        dom = space.domain(name)
        match = [v for v in dom if str(v) == value]
        if not match:
            raise KernelError(f"value {value!r} not in domain of {name!r}")
        out[name] = match[0]
    if set(out) != set(space.names):
        raise KernelError(f"point key {key!r} does not cover {space.names}")
    return out


# -- probability calculus


def marginalize(k: FiniteKernel, keep: Iterable[str]) -> FiniteKernel:
    """Marginal kernel on the target variables ``keep``."""
    keep = set(keep)
    missing = keep - set(k.target.names)
    if missing:
        raise KernelError(f"cannot keep {sorted(missing)}: not target variables of {k!r}")
    drop = tuple(
        len(k.source) + i for i, n in enumerate(k.target.names) if n not in keep
    )
    if not drop:
        return k
    table = _arr(k.table.sum(axis=drop))
    return FiniteKernel(k.source, k.target.select(keep), table, check=False)


def _combine(k1: FiniteKernel, k2: FiniteKernel, source: FiniteSpace, target: FiniteSpace) -> np.ndarray:
    all_names = source.names + target.names
    t = _arr(_broadcast(k1.table, k1.names, all_names) * _broadcast(k2.table, k2.names, all_names))
    shape = source.shape + target.shape
    return t if t.shape == shape else np.broadcast_to(t, shape).copy()


def product(k1: FiniteKernel, k2: FiniteKernel) -> FiniteKernel:
    """``K1(Z || U,X,T) (x) K2(X,Y || T,W)`` as a kernel ``(Z,X,Y || U,T,W)``."""
    overlap = set(k1.target.names) & set(k2.target.names)
    if overlap:
        raise KernelError(f"product of kernels with overlapping targets {sorted(overlap)}")
    cyc = set(k2.source.names) & set(k1.target.names)
    if cyc:
        raise KernelError(f"second factor is conditioned on first factor's targets {sorted(cyc)}")
    free1 = k1.source.without(k2.target.names)
    # consumed source variables must match the producing target's domain
    k2.target.merge(k1.source.select(k2.target.names))
    source = free1.merge(k2.source)
    target = k1.target + k2.target
    return FiniteKernel(source, target, _combine(k1, k2, source, target), check=False)


def compose(k1: FiniteKernel, k2: FiniteKernel) -> FiniteKernel:
    """``K1 o K2``: product followed by marginalization onto ``K1``'s targets."""
    return marginalize(product(k1, k2), k1.target.names)


def disintegrate(
    k: FiniteKernel, given: Iterable[str], fallback: FiniteKernel | None = None
) -> FiniteKernel:
    """Conditional kernel ``K(X | Y || T)`` where ``Y = given``.

    Rows whose conditioning mass is zero take ``fallback`` (a distribution on
    ``X``; uniform by default). The result's source is ``T`` then ``Y``.
    """
    given = set(given)
    missing = given - set(k.target.names)
    if missing:
        raise KernelError(f"cannot condition on {sorted(missing)}: not target variables")
    Y = k.target.select(given)
    X = k.target.without(given)
    if fallback is None:
        fallback = FiniteKernel.uniform(X)
    elif fallback.source.vars or dict(fallback.target.vars) != dict(X.vars):
        raise KernelError(f"fallback must be a distribution on {X.names}")
    source = k.source + Y
    order = source.names + X.names
    joint = _transpose_to(k.table, k.names, order)
    marg = marginalize(k, Y.names)
    den = _broadcast(marg.table, marg.names, order)
    zero = np.asarray(den == 0, dtype=bool)
    safe = np.where(zero, ONE, den).astype(object)
    cond = _arr(joint / safe)
    if zero.any():
        fb = _broadcast(fallback.reorder(target=X.names).table, X.names, order)
        cond = np.where(zero, fb, cond).astype(object)
    cond = np.broadcast_to(cond, source.shape + X.shape).copy() if cond.shape != source.shape + X.shape else cond
    return FiniteKernel(source, X, cond, check=False)


def pushforward(
    k: FiniteKernel, f: Callable[[tuple], Any], new_target: FiniteSpace
) -> FiniteKernel:
    """Image of each row under ``f``, a map from target points to ``new_target`` points."""
    m = np.zeros((k.target.size, new_target.size), dtype=object)
    for flat, pt in enumerate(k.target.points()):
        try:
            img = _tup(f(pt))
            j = np.ravel_multi_index(new_target.index_of(img), new_target.shape) if new_target.vars else 0
        except (KernelError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise KernelError(f"map is not total on target point {pt!r}: {exc}") from exc
        m[flat, j] = 1
    flat_table = k.table.reshape(k.source.shape + (k.target.size,))
    out = np.dot(flat_table, m) if k.source.vars else np.dot(flat_table.reshape(1, -1), m)[0]
    out = np.asarray(out, dtype=object).reshape(k.source.shape + new_target.shape)
    out = _to_rational(out).astype(object) if out.shape else _scalar(rational(out[()]))
    return FiniteKernel(k.source, new_target, out, check=False)


def strictly_positive(k: FiniteKernel) -> bool:
    return all(x > 0 for x in k.table.flat)


def absolutely_continuous(k: FiniteKernel, q: FiniteKernel) -> bool:
    """``k << q``: wherever ``q`` puts zero mass, so does ``k``."""
    qt = k.aligned(q)
    return not bool(np.any((qt == 0) & (k.table != 0)))


# -- helpers used throughout the package


def extend_source(k: FiniteKernel, extra: FiniteSpace) -> FiniteKernel:
    """View ``k`` as a kernel that additionally (and trivially) reads ``extra``."""
    new = extra.without(k.source.names)
    if set(new.names) & set(k.target.names):
        raise KernelError("cannot add target variables to the source")
    k.source.merge(extra)
    if not new.vars:
        return k
    source = k.source + new
    names = source.names + k.target.names
    t = np.broadcast_to(_broadcast(k.table, k.names, names), source.shape + k.target.shape).copy()
    return FiniteKernel(source, k.target, t, check=False)


def restrict_source(k: FiniteKernel, keep: Iterable[str]) -> FiniteKernel:
    """Drop source variables outside ``keep`` after checking the kernel ignores them."""
    keep = set(keep)
    drop = {n for n in k.source.names if n not in keep}
    if not drop:
        return k
    idx = tuple(0 if n in drop else slice(None) for n in k.source.names)
    first = _arr(k.table[idx])
    source = k.source.select(keep)
    probe = _broadcast(first, source.names + k.target.names, k.names)
    if not bool(np.all(k.table == probe)):
        raise KernelError(f"kernel depends on source variables {sorted(drop)}")
    return FiniteKernel(source, k.target, first.reshape(source.shape + k.target.shape), check=False)


def depends_on(k: FiniteKernel, var: str) -> bool:
    """Whether some row of ``k`` changes with source variable ``var``."""
    try:
        restrict_source(k, set(k.source.names) - {var})
    except KernelError:
        return True
    return False


def pointwise_product(kernels: Sequence[FiniteKernel]) -> FiniteKernel:
    """Multiply mass functions over the union of coordinates and check normalization.

    Targets must be pairwise disjoint. Sources that are another factor's
    target are integrated against it, so the result's source is the union of
    sources minus the union of targets.
    """
    targets: list[str] = []
    tspace = FiniteSpace()
    for k in kernels:
        if set(k.target.names) & set(targets):
            raise KernelError("pointwise product with overlapping targets")
        targets += k.target.names
        tspace = tspace + k.target
    sspace = FiniteSpace()
    for k in kernels:
        sspace = sspace.merge(k.source.without(targets))
    for k in kernels:
        tspace.merge(k.source.select(targets))
    names = sspace.names + tspace.names
    acc = None
    for k in kernels:
        b = _broadcast(k.table, k.names, names)
        acc = b if acc is None else _arr(acc * b)
    if acc is None:
        return FiniteKernel.unit()
    acc = np.broadcast_to(acc, sspace.shape + tspace.shape).copy()
    return FiniteKernel(sspace, tspace, acc, check=True)


def max_abs_difference(k1: FiniteKernel, k2: FiniteKernel) -> Rational:
    diff = k1.table - k1.aligned(k2)
    return max((abs(x) for x in np.asarray(diff, dtype=object).flat), default=ZERO)
