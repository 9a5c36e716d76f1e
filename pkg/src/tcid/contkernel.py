"""Closed-form continuous laws and the numerical checks built on them.

Nothing here is a general continuous-kernel engine. Each demo hard-codes
the densities of one counterexample and checks its claims by adaptive
quadrature (``scipy.integrate.quad``) or seeded Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special, stats


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureCfg:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-11
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")


def quad(f: Callable[[float], float], lo: float, hi: float, cfg: QuadratureCfg = QuadratureCfg(), points: Sequence[float] = ()) -> float:
    """Adaptive quadrature split at ``points``, confirmed by a doubled subdivision budget.

    Finite intervals are cut at every interior breakpoint so that each
    piece has its singularities (if any) at an endpoint.
    """
    if lo == hi:
        return 0.0
    cuts = sorted({p for p in points if lo < p < hi}) if math.isfinite(lo) and math.isfinite(hi) else []
    edges = [lo, *cuts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        vals = []
        for limit in (cfg.max_subdivisions, 2 * cfg.max_subdivisions):
            val, err, *rest = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=limit, full_output=1)
            vals.append(val)
        tol = max(1e3 * cfg.abs_tol, 1e3 * cfg.rel_tol * abs(vals[1]))
        if abs(vals[0] - vals[1]) > tol or not math.isfinite(vals[1]):
            raise QuadratureError(f"quadrature on [{a}, {b}] did not settle: {vals}")
        total += vals[1]
    return total


# -- one-dimensional laws


class Density1D:
    """A law on the real line; absolutely continuous ones expose ``pdf``."""

    atomless = True
    support: tuple[float, float]
    breakpoints: tuple[float, ...] = ()

    def pdf(self, x: float) -> float:
        raise NotImplementedError

    def total_mass(self, cfg: QuadratureCfg = QuadratureCfg()) -> float:
        return quad(self.pdf, *self.support, cfg=cfg, points=self.breakpoints)

    def mass(self, lo: float, hi: float, cfg: QuadratureCfg = QuadratureCfg()) -> float:
        a, b = max(lo, self.support[0]), min(hi, self.support[1])
        return 0.0 if a >= b else quad(self.pdf, a, b, cfg=cfg, points=self.breakpoints)


@dataclass(frozen=True)
class Uniform(Density1D):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("uniform law needs lo < hi; use DiracMixture for a point")

    @property
    def support(self):
        return (self.lo, self.hi)

    @property
    def breakpoints(self):
        return (self.lo, self.hi)

    def pdf(self, x):
        return 1.0 / (self.hi - self.lo) if self.lo <= x <= self.hi else 0.0

    def mass(self, lo, hi, cfg=QuadratureCfg()):
        return max(0.0, min(hi, self.hi) - max(lo, self.lo)) / (self.hi - self.lo)


@dataclass(frozen=True)
class Gaussian(Density1D):
    mean: float = 0.0
    var: float = 1.0

    @property
    def support(self):
        return (-math.inf, math.inf)

    def pdf(self, x):
        return math.exp(-((x - self.mean) ** 2) / (2 * self.var)) / math.sqrt(2 * math.pi * self.var)


@dataclass(frozen=True)
class DiracMixture(Density1D):
    points: tuple[float, ...]
    weights: tuple[float, ...]
    atomless = False

    def __post_init__(self):
        if len(self.points) != len(self.weights) or abs(sum(self.weights) - 1) > 1e-12:
            raise ValueError("Dirac mixture weights must match points and sum to 1")

    @property
    def support(self):
        return (min(self.points), max(self.points))

    def total_mass(self, cfg=QuadratureCfg()):
        return float(sum(self.weights))

    def mass(self, lo, hi, cfg=QuadratureCfg()):
        return float(sum(w for p, w in zip(self.points, self.weights) if lo <= p <= hi))


@dataclass(frozen=True)
class PiecewiseClosedForm(Density1D):
    name: str
    fn: Callable[[float], float] = field(compare=False)
    support: tuple[float, float] = (-math.inf, math.inf)
    breakpoints: tuple[float, ...] = ()

    def pdf(self, x):
        return self.fn(x)


def total_variation(p: Density1D, q: Density1D, cfg: QuadratureCfg = QuadratureCfg()) -> float:
    """Total-variation distance; a point mass and an atomless law are at distance 1."""
    if p == q:
        return 0.0
    if isinstance(p, DiracMixture) and isinstance(q, DiracMixture):
        pts = sorted(set(p.points) | set(q.points))
        wp = dict(zip(p.points, p.weights))
        wq = dict(zip(q.points, q.weights))
        return 0.5 * sum(abs(wp.get(x, 0.0) - wq.get(x, 0.0)) for x in pts)
    if isinstance(p, DiracMixture) or isinstance(q, DiracMixture):
        # atoms carry all the mass of one law and none of the other
        return 1.0
    lo = min(p.support[0], q.support[0])
    hi = max(p.support[1], q.support[1])
    pts = tuple(p.breakpoints) + tuple(q.breakpoints)
    return 0.5 * quad(lambda x: abs(p.pdf(x) - q.pdf(x)), lo, hi, cfg, pts)


# -- no pointwise identification


@dataclass(frozen=True)
class Point:
    """A treatment value with its rationality stated explicitly."""

    label: str
    value: float
    rational: bool


def _point_law(lo: float, hi: float) -> Density1D:
    return DiracMixture((lo,), (1.0,)) if lo == hi else Uniform(lo, hi)


def version_law(x: Point) -> Density1D:
    """The mechanism of ``b``: a point mass at rational ``x``, uniform on ``[0, x]`` otherwise."""
    if x.rational:
        return DiracMixture((x.value,), (1.0,))
    return _point_law(0.0, x.value)


def demo_no_pointwise(points: Sequence[Point] | None = None) -> dict:
    if points is None:
        points = [
            Point("1/2", 0.5, True),
            Point("1/3", float(Fraction(1, 3)), True),
            Point("3/4", 0.75, True),
            Point("sqrt(2)/2", math.sqrt(2) / 2, False),
            Point("0", 0.0, True),
        ]
    rows = []
    for x in points:
        do_law = version_law(x)
        chosen = _point_law(0.0, x.value)
        rows.append(
            {
                "x_a": x.label,
                "rational": x.rational,
                "interventional": type(do_law).__name__,
                "conditional_version": type(chosen).__name__,
                "tv": total_variation(do_law, chosen),
                "boundary": x.value == 0.0,
            }
        )
    return {"name": "no-pointwise", "rows": rows}


# -- failure of back-door adjustment


def backdoor_densities(x_a: float) -> tuple[PiecewiseClosedForm, PiecewiseClosedForm]:
    """Interventional and back-door-adjusted densities of ``X_b`` at treatment ``x_a``."""

    def f_do(x):
        d = 2 * abs(x - x_a)
        return -math.log(d) if 0 < d <= 1 else 0.0

    def f_adj(x):
        d = 2 * abs(x - x_a)
        out = 0.0
        if 0.5 <= d <= 1:
            out -= math.log(d)
        elif d < 0.5:
            out += math.log(2)
        if 0 < 2 * abs(x) < 0.5:
            out -= math.log(4 * abs(x))
        return out

    lo, hi = min(x_a - 0.5, -0.25), x_a + 0.5
    do_pts = (x_a - 0.5, x_a, x_a + 0.5)
    adj_pts = (x_a - 0.5, x_a - 0.25, x_a + 0.25, x_a + 0.5, -0.25, 0.0, 0.25)
    return (
        PiecewiseClosedForm("interventional", f_do, (x_a - 0.5, x_a + 0.5), do_pts),
        PiecewiseClosedForm("adjusted", f_adj, (lo, hi), adj_pts),
    )


def demo_backdoor_failure(x_a: float = 0.25, cfg: QuadratureCfg = QuadratureCfg()) -> dict:
    if not 0 < x_a <= 1:
        raise ValueError("x_a must lie in (0, 1]")
    f_do, f_adj = backdoor_densities(x_a)
    pts = tuple(f_do.breakpoints) + tuple(f_adj.breakpoints)
    lo, hi = f_adj.support
    l1 = quad(lambda x: abs(f_do.pdf(x) - f_adj.pdf(x)), lo, hi, cfg, pts)
    # both closed forms carry the same term where 1/2 <= 2|x_b - x_a| <= 1
    probe = [x_a + s * t for s in (-1, 1) for t in np.linspace(0.26, 0.49, 9)]
    shared = max(abs(f_do.pdf(x) - f_adj.pdf(x)) for x in probe if 2 * abs(x) >= 0.5)
    return {
        "name": "backdoor-failure",
        "x_a": x_a,
        "integral_interventional": f_do.total_mass(cfg),
        "integral_adjusted": f_adj.total_mass(cfg),
        "l1_distance": l1,
        "shared_region_max_diff": shared,
        "abs_tol": cfg.abs_tol,
        "rel_tol": cfg.rel_tol,
    }


# -- positivity is not necessary


def cond_density_observational(x_a: float, x_b: float, x_c: float) -> float:
    """``f(x_a | x_b, x_c)`` read off the generative model: ``a ~ N(c, 1)``."""
    return stats.norm.pdf(x_a, loc=x_c, scale=1.0)


def cond_density_interventional(x_a: float, x_c: float, x_b: float) -> float:
    """``f(x_a | x_c || do(x_b))``: under ``do(b)``, ``c = u x_b`` and ``a ~ N(c, 1)``."""
    return math.exp(-0.5 * (x_a - x_c) ** 2) / math.sqrt(2 * math.pi)


def c_given_do_b(x_b: float) -> Density1D:
    """``P(X_c || do(X_b = x_b))``: the law of ``u x_b`` for ``u`` uniform on ``[0, 1]``."""
    return _point_law(min(0.0, x_b), max(0.0, x_b))


def simulate_positivity_model(n: int, seed: int, do_b: float | None = None) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, n)
    b = rng.normal(u, 1.0) if do_b is None else np.full(n, float(do_b))
    c = u * b
    a = rng.normal(c, 1.0)
    return {"u": u, "b": b, "c": c, "a": a}


def _cf_deviation(a: np.ndarray, c: np.ndarray, ts: Sequence[float], bins: int) -> float:
    """Largest gap between binned ``E[exp(itX_a)]`` and the Gaussian-centred prediction.

    Within each equal-mass bin of ``x_c``, the prediction averages
    ``exp(i t x_c - t^2 / 2)`` over the bin, so bin width does not bias it.
    """
    edges = np.quantile(c, np.linspace(0, 1, bins + 1))
    idx = np.clip(np.searchsorted(edges, c, side="right") - 1, 0, bins - 1)
    worst = 0.0
    for t in ts:
        emp = np.exp(1j * t * a)
        pred = np.exp(1j * t * c - t * t / 2)
        for k in range(bins):
            sel = idx == k
            worst = max(worst, float(abs(emp[sel].mean() - pred[sel].mean())))
    return worst


def demo_positivity_not_necessary(
    cfg: QuadratureCfg = QuadratureCfg(), seed: int = 42, n: int = 1_000_000, bins: int = 20
) -> dict:
    grid = np.linspace(-3, 3, 25)
    diffs = [
        abs(cond_density_observational(xa, xb, xc) - cond_density_interventional(xa, xc, xb))
        for xa in grid
        for xb in (-1.0, 0.5, 1.0, 2.0)
        for xc in grid[::4]
    ]
    law = c_given_do_b(1.0)
    ts = (0.5, 1.0, 2.0)
    obs = simulate_positivity_model(n, seed)
    do = simulate_positivity_model(n, seed + 1, do_b=1.0)
    return {
        "name": "positivity",
        "grid_max_abs_diff": float(max(diffs)),
        "density_at_example": [float(cond_density_observational(0.3, 1.0, 0.3)), cond_density_interventional(0.3, 0.3, 1.0)],
        "c_do_b1_mass_2_3": law.mass(2.0, 3.0, cfg),
        "c_do_b1_mass_0_1": law.mass(0.0, 1.0, cfg),
        "mc_draws": n,
        "mc_seed": seed,
        "mc_sup_deviation_observational": _cf_deviation(obs["a"], obs["c"], ts, bins),
        "mc_sup_deviation_interventional": _cf_deviation(do["a"], do["c"], ts, bins),
    }


# -- shrinking-ball conditioning


def _clip(x, lo, hi):
    return min(max(x, lo), hi)


_GOLD = (1 + math.sqrt(5)) / 2

# (name, function, kinks); all bounded and Lipschitz
TEST_FUNCTIONS: tuple[tuple[str, Callable[[float], float], tuple[float, ...]], ...] = (
    ("clip(x)", lambda x: _clip(x, -1.0, 1.0), (-1.0, 1.0)),
    ("clip(x^2)", lambda x: _clip(x * x, 0.0, 1.0), (-1.0, 1.0)),
    ("clip(x^3)", lambda x: _clip(x ** 3, -1.0, 1.0), (-1.0, 1.0)),
    ("clip(x-1/2)", lambda x: _clip(x - 0.5, -1.0, 1.0), (-0.5, 1.5)),
    ("clip(x^2-x)", lambda x: _clip(x * x - x, -1.0, 1.0), (1 - _GOLD, _GOLD)),
    ("hat", lambda x: _clip(1.0 - abs(x), 0.0, 1.0), (-1.0, 0.0, 1.0)),
    ("sigmoid(x)", lambda x: float(special.expit(x)), ()),
    ("sigmoid(2x-1)", lambda x: float(special.expit(2 * x - 1)), ()),
    ("sigmoid(1-3x)", lambda x: float(special.expit(1 - 3 * x)), ()),
    ("tanh(x)", math.tanh, ()),
)


@dataclass(frozen=True)
class BivariateGaussian:
    """Standard bivariate normal with correlation ``rho``; ``X | Y=y ~ N(rho y, 1 - rho^2)``."""

    rho: float

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ValueError("correlation must lie strictly inside (-1, 1)")

    @property
    def sigma(self) -> float:
        return math.sqrt(1 - self.rho ** 2)

    def conditional(self, y: float) -> Gaussian:
        return Gaussian(self.rho * y, 1 - self.rho ** 2)

    def ball_mass(self, lo: float, hi: float) -> float:
        return float(special.ndtr(hi) - special.ndtr(lo))

    def ball_density(self, lo: float, hi: float) -> Callable[[float], float]:
        """Density of ``X`` given ``Y`` in ``[lo, hi]``, using ``Y | X=x ~ N(rho x, 1 - rho^2)``."""
        mass = self.ball_mass(lo, hi)
        if not mass > 0:
            raise QuadratureError("ball has no mass under the marginal")
        r, s = self.rho, self.sigma

        def f(x):
            inside = special.ndtr((hi - r * x) / s) - special.ndtr((lo - r * x) / s)
            return math.exp(-x * x / 2) / math.sqrt(2 * math.pi) * float(inside) / mass

        return f


def _against(phi, kinks, density, centre: float, cfg: QuadratureCfg) -> float:
    # mass beyond 12 standard deviations is far below any tolerance used here
    return quad(lambda x: phi(x) * density(x), centre - 12.0, centre + 12.0, cfg, kinks)


def shrinking_ball_conditional(
    joint: BivariateGaussian,
    y: float,
    deltas: Sequence[float] = (1e-1, 1e-2, 1e-3),
    cfg: QuadratureCfg = QuadratureCfg(),
) -> dict:
    """Compare ``K(X | Y in B(y, delta))`` against the continuous conditional.

    The error for each radius is the largest gap, over the fixed test
    functions, between the two integrals.
    """
    if joint.sigma <= 0:
        raise QuadratureError("degenerate joint density")
    target = joint.conditional(y)
    errors = []
    for delta in deltas:
        ball = joint.ball_density(y - delta, y + delta)
        worst = 0.0
        for _, phi, kinks in TEST_FUNCTIONS:
            got = _against(phi, kinks, ball, target.mean, cfg)
            want = _against(phi, kinks, target.pdf, target.mean, cfg)
            worst = max(worst, abs(got - want))
        errors.append(worst)
    return {
        "name": "shrinking-ball",
        "rho": joint.rho,
        "y": y,
        "deltas": list(deltas),
        "errors": errors,
        "test_functions": [n for n, _, _ in TEST_FUNCTIONS],
    }


NOISE_FLOOR = 1e-12


def decreasing_with_slack(errors: Sequence[float], slack: float = 0.10, floor: float = NOISE_FLOOR) -> bool:
    """Each error is at most ``(1 + slack)`` times the previous one, up to a noise floor."""
    return all(b <= (1 + slack) * a + floor for a, b in zip(errors, errors[1:]))


DEMOS = {
    "no-pointwise": lambda: demo_no_pointwise(),
    "backdoor-failure": lambda: {
        "name": "backdoor-failure",
        "rows": [demo_backdoor_failure(x) for x in (0.1, 0.25, 0.5, 0.75, 1.0)],
    },
    "positivity": lambda: demo_positivity_not_necessary(),
    "shrinking-ball": lambda: {
        "name": "shrinking-ball",
        "rows": [shrinking_ball_conditional(BivariateGaussian(r), 1.0) for r in (-0.5, 0.0, 0.5)],
    },
}
