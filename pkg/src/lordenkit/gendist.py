"""Mixed nonnegative distributions described through their generalized intensity.

A distribution is a continuous hazard ``h`` plus a finite set of atoms. Each atom
carries its conditional jump ``q = P(X = a | X >= a)`` and contributes the weight
``-log(1 - q)`` to the cumulative hazard, so that ``S(s) = exp(-Lambda(s))``
reconstructs any mixed law exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "ImproperDistributionError",
    "Zero", "Constant", "Weibull", "Uniform", "Pareto", "Delayed", "Shifted", "Grid", "Sum",
    "HazardSpec", "DistributionView", "Evaluation", "MomentResult", "OrderCheck",
    "exponential", "weibull", "uniform", "pareto", "delayed", "tabulated", "atoms_only",
    "as_view", "cumulative_hazard", "evaluate", "moment", "sample", "min_compose",
    "common_part_kappa", "stochastic_order_check",
]

DEFAULT_TOL = 1e-8
# survival level treated as "end of support" when building numerical grids
_TAIL_LEVEL = 1e-15


class ImproperDistributionError(ValueError):
    """Raised when a draw exceeds the total cumulative hazard of a defective law."""

    def __init__(self, msg="improper distribution"):
        super().__init__(msg)


def _arr(s):
    return np.asarray(s, dtype=float)


def _out(x, like):
    x = np.asarray(x, dtype=float)
    return float(x) if np.ndim(like) == 0 else x


# ---------------------------------------------------------------------------
# continuous hazard families
#
# Every family implements hazard, cumhaz, inverse (generalized inverse of the
# cumulative hazard, +inf where unreachable), shifted (hazard s -> h(s + u)),
# breakpoints and tail (coarse tail class used to certify divergence).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    def hazard(self, s):
        return np.zeros_like(_arr(s))

    def cumhaz(self, s):
        return np.zeros_like(_arr(s))

    def inverse(self, y):
        y = _arr(y)
        return np.where(y <= 0, 0.0, np.inf)

    def shifted(self, u):
        return self

    def breakpoints(self):
        return ()

    def tail(self):
        return ("none", 0.0)

    def to_dict(self):
        return {"family": "zero"}


@dataclass(frozen=True)
class Constant:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"constant hazard needs a finite positive rate, got {self.rate}")

    def hazard(self, s):
        return np.full_like(_arr(s), self.rate)

    def cumhaz(self, s):
        return self.rate * _arr(s)

    def inverse(self, y):
        return np.maximum(_arr(y), 0.0) / self.rate

    def shifted(self, u):
        return self

    def breakpoints(self):
        return ()

    def tail(self):
        return ("light", self.rate)

    def to_dict(self):
        return {"family": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Weibull:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Weibull shape and scale must be positive")

    def hazard(self, s):
        s = _arr(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.shape / self.scale) * (s / self.scale) ** (self.shape - 1.0)

    def cumhaz(self, s):
        return (_arr(s) / self.scale) ** self.shape

    def inverse(self, y):
        return self.scale * np.maximum(_arr(y), 0.0) ** (1.0 / self.shape)

    def shifted(self, u):
        return self if u == 0 else Shifted(self, u)

    def breakpoints(self):
        return ()

    def tail(self):
        return ("light", self.shape)

    def to_dict(self):
        return {"family": "weibull", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Uniform:
    """Hazard ``1/(b - s)`` on ``[0, b)``: the uniform law on ``[0, b]``."""

    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("uniform support end must be positive")

    def hazard(self, s):
        s = _arr(s)
        with np.errstate(divide="ignore"):
            return np.where(s < self.b, 1.0 / (self.b - np.minimum(s, self.b)), np.inf)

    def cumhaz(self, s):
        s = _arr(s)
        with np.errstate(divide="ignore"):
            return np.where(s < self.b, -np.log1p(-np.minimum(s, self.b) / self.b), np.inf)

    def inverse(self, y):
        y = np.maximum(_arr(y), 0.0)
        return self.b * -np.expm1(-y)

    def shifted(self, u):
        if u >= self.b:
            raise ValueError("shift beyond the end of the uniform support")
        return Uniform(self.b - u) if u > 0 else self

    def breakpoints(self):
        return (self.b,)

    def tail(self):
        return ("bounded", self.b)

    def to_dict(self):
        return {"family": "uniform", "b": self.b}


@dataclass(frozen=True)
class Pareto:
    """Hazard ``C/(1 + s)``; survival ``(1 + s)^-C``."""

    C: float

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("Pareto-type hazard needs C > 0")

    def hazard(self, s):
        return self.C / (1.0 + _arr(s))

    def cumhaz(self, s):
        return self.C * np.log1p(_arr(s))

    def inverse(self, y):
        return np.expm1(np.maximum(_arr(y), 0.0) / self.C)

    def shifted(self, u):
        return self if u == 0 else Shifted(self, u)

    def breakpoints(self):
        return ()

    def tail(self):
        return ("power", self.C)

    def to_dict(self):
        return {"family": "pareto", "C": self.C}


@dataclass(frozen=True)
class Delayed:
    """Zero hazard on ``[0, T)``, then ``base`` shifted to start at ``T``."""

    T: float
    base: object

    def __post_init__(self):
        if not self.T >= 0:
            raise ValueError("delay must be nonnegative")

    def hazard(self, s):
        s = _arr(s)
        return np.where(s >= self.T, self.base.hazard(np.maximum(s - self.T, 0.0)), 0.0)

    def cumhaz(self, s):
        return self.base.cumhaz(np.maximum(_arr(s) - self.T, 0.0))

    def inverse(self, y):
        y = _arr(y)
        return np.where(y > 0, self.T + self.base.inverse(y), 0.0)

    def shifted(self, u):
        if u < self.T:
            return Delayed(self.T - u, self.base)
        return self.base.shifted(u - self.T)

    def breakpoints(self):
        return (self.T,) + tuple(self.T + b for b in self.base.breakpoints())

    def tail(self):
        return self.base.tail()

    def to_dict(self):
        return {"family": "delayed", "T": self.T, "base": self.base.to_dict()}


@dataclass(frozen=True)
class Shifted:
    """Hazard ``s -> base.hazard(s + u)``: the residual-life hazard at age ``u``."""

    base: object
    u: float

    @cached_property
    def _offset(self):
        return float(self.base.cumhaz(self.u))

    def hazard(self, s):
        return self.base.hazard(_arr(s) + self.u)

    def cumhaz(self, s):
        return self.base.cumhaz(_arr(s) + self.u) - self._offset

    def inverse(self, y):
        y = np.maximum(_arr(y), 0.0)
        return np.maximum(self.base.inverse(y + self._offset) - self.u, 0.0)

    def shifted(self, u):
        return Shifted(self.base, self.u + u) if u > 0 else self

    def breakpoints(self):
        return tuple(b - self.u for b in self.base.breakpoints() if b > self.u)

    def tail(self):
        return self.base.tail()

    def to_dict(self):
        return {"family": "shifted", "u": self.u, "base": self.base.to_dict()}


@dataclass(frozen=True)
class Grid:
    """Tabulated hazard: linear interpolation, constant extrapolation past the last node."""

    s: tuple
    h: tuple
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if s.ndim != 1 or s.shape != h.shape or s.size < 1:
            raise ValueError("grid abscissae and ordinates must be equal-length 1-D sequences")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("grid abscissae must start at 0 and be strictly increasing")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise ValueError("grid ordinates must be finite and nonnegative")
        object.__setattr__(self, "s", tuple(s.tolist()))
        object.__setattr__(self, "h", tuple(h.tolist()))
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(s))])
        object.__setattr__(self, "_cum", cum)

    def hazard(self, s):
        return np.interp(_arr(s), self.s, self.h)

    def cumhaz(self, s):
        s = _arr(s)
        xs, hs = np.asarray(self.s), np.asarray(self.h)
        j = np.clip(np.searchsorted(xs, s, side="right") - 1, 0, xs.size - 1)
        d = s - xs[j]
        slope = np.zeros_like(hs)
        slope[:-1] = np.diff(hs) / np.diff(xs)
        return self._cum[j] + hs[j] * d + 0.5 * slope[j] * d * d

    def inverse(self, y):
        y = np.maximum(_arr(y), 0.0)
        xs, hs, cum = np.asarray(self.s), np.asarray(self.h), self._cum
        j = np.clip(np.searchsorted(cum, y, side="right") - 1, 0, xs.size - 1)
        r = y - cum[j]
        slope = np.zeros_like(hs)
        slope[:-1] = np.diff(hs) / np.diff(xs)
        a, b = 0.5 * slope[j], hs[j]
        disc = np.sqrt(np.maximum(b * b + 4.0 * a * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(r > 0, 2.0 * r / (b + disc), 0.0)
        return xs[j] + d

    def shifted(self, u):
        if u <= 0:
            return self
        xs = np.asarray(self.s)
        keep = xs > u
        new_s = np.concatenate([[0.0], xs[keep] - u])
        new_h = np.concatenate([[float(self.hazard(u))], np.asarray(self.h)[keep]])
        return Grid(tuple(new_s), tuple(new_h))

    def breakpoints(self):
        return self.s[1:]

    def tail(self):
        return ("light", self.h[-1]) if self.h[-1] > 0 else ("none", 0.0)

    def to_dict(self):
        return {"family": "grid", "s": list(self.s), "h": list(self.h)}


@dataclass(frozen=True)
class Sum:
    """Pointwise sum of continuous hazards (the law of a minimum of independent times)."""

    terms: tuple

    def hazard(self, s):
        return sum(t.hazard(s) for t in self.terms)

    def cumhaz(self, s):
        return sum(t.cumhaz(s) for t in self.terms)

    def inverse(self, y):
        y = np.maximum(_arr(y), 0.0)
        n = len(self.terms)
        hi = np.min([t.inverse(y) for t in self.terms], axis=0)
        lo = np.min([t.inverse(y / n) for t in self.terms], axis=0)
        lo = np.minimum(lo, hi)
        finite = np.isfinite(hi)
        lo, hi = np.where(finite, lo, 0.0), np.where(finite, hi, 0.0)
        for _ in range(200):
            if np.all(hi - lo <= 1e-12 * np.maximum(1.0, hi)):
                break
            mid = 0.5 * (lo + hi)
            up = self.cumhaz(mid) >= y
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        return np.where(finite, hi, np.inf)

    def shifted(self, u):
        return _canonical_sum([t.shifted(u) for t in self.terms]) if u > 0 else self

    def breakpoints(self):
        return tuple(sorted({b for t in self.terms for b in t.breakpoints()}))

    def tail(self):
        tails = [t.tail() for t in self.terms]
        bounded = [p for k, p in tails if k == "bounded"]
        if bounded:
            return ("bounded", min(bounded))
        light = [p for k, p in tails if k == "light"]
        if light:
            return ("light", max(light))
        powers = [p for k, p in tails if k == "power"]
        if powers:
            return ("power", sum(powers))
        return ("none", 0.0)

    def to_dict(self):
        return {"family": "sum", "terms": [t.to_dict() for t in self.terms]}


def _canonical_sum(terms):
    flat = []
    for t in terms:
        flat.extend(t.terms if isinstance(t, Sum) else [t])
    rate = sum(t.rate for t in flat if isinstance(t, Constant))
    cpar = sum(t.C for t in flat if isinstance(t, Pareto))
    rest = [t for t in flat if not isinstance(t, (Zero, Constant, Pareto))]
    if rate > 0:
        rest.insert(0, Constant(rate))
    if cpar > 0:
        rest.insert(0, Pareto(cpar))
    if not rest:
        return Zero()
    if len(rest) == 1:
        return rest[0]
    return Sum(tuple(rest))


# ---------------------------------------------------------------------------
# HazardSpec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HazardSpec:
    """Continuous hazard plus atoms ``(location, conditional_jump)``.

    Immutable and hashable; safe to share between workers.
    """

    continuous: object = field(default_factory=Zero)
    atoms: tuple = ()

    def __post_init__(self):
        atoms = tuple((float(a), float(q)) for a, q in self.atoms)
        locs = [a for a, _ in atoms]
        if any(a < 0 or not math.isfinite(a) for a in locs):
            raise ValueError("atom locations must be finite and nonnegative")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("atom locations must be strictly increasing")
        if any(not (0.0 < q < 1.0) for _, q in atoms):
            raise ValueError("atom conditional jumps must lie in (0, 1)")
        object.__setattr__(self, "atoms", atoms)

    @cached_property
    def atom_locations(self):
        return np.array([a for a, _ in self.atoms], dtype=float)

    @cached_property
    def atom_weights(self):
        return np.array([-math.log1p(-q) for _, q in self.atoms], dtype=float)

    @cached_property
    def _cum_weights(self):
        return np.concatenate([[0.0], np.cumsum(self.atom_weights)])

    def cumulative_hazard(self, s):
        s = _arr(s)
        if np.any(s < 0):
            raise ValueError("cumulative hazard is defined for s >= 0 only")
        k = np.searchsorted(self.atom_locations, s, side="right")
        return _out(self.continuous.cumhaz(s) + self._cum_weights[k], s)

    def inverse(self, y):
        """Smallest ``s`` with ``Lambda(s) >= y`` (``inf`` where never reached)."""
        y = _arr(y)
        cont = self.continuous
        if not self.atoms:
            return cont.inverse(y)
        locs, W = self.atom_locations, self._cum_weights
        base = cont.cumhaz(locs)
        lo, hi = base + W[:-1], base + W[1:]
        j = np.searchsorted(hi, y, side="left")
        in_atom = (j < locs.size) & (y > lo[np.minimum(j, locs.size - 1)])
        res = cont.inverse(y - W[j])
        return np.where(in_atom, locs[np.minimum(j, locs.size - 1)], res)

    def shifted(self, u):
        """Residual-life spec given survival past age ``u``."""
        if u < 0:
            raise ValueError("age must be nonnegative")
        if u == 0:
            return self
        atoms = tuple((a - u, q) for a, q in self.atoms if a > u)
        return HazardSpec(self.continuous.shifted(u), atoms)

    def breakpoints(self):
        return tuple(sorted(set(self.continuous.breakpoints()) | set(self.atom_locations.tolist())))

    @property
    def proper(self):
        return self.continuous.tail()[0] != "none"

    def to_dict(self):
        d = self.continuous.to_dict()
        d["atoms"] = [{"location": a, "q": q} for a, q in self.atoms]
        return d


def exponential(rate, atoms=()):
    return HazardSpec(Constant(rate), atoms)


def weibull(shape, scale, atoms=()):
    return HazardSpec(Weibull(shape, scale), atoms)


def uniform(b=1.0, atoms=()):
    return HazardSpec(Uniform(b), atoms)


def pareto(C, atoms=()):
    return HazardSpec(Pareto(C), atoms)


def delayed(T, spec):
    """Delay every part of ``spec`` (continuous hazard and atoms) by ``T``."""
    spec = spec if isinstance(spec, HazardSpec) else HazardSpec(spec)
    return HazardSpec(Delayed(T, spec.continuous), tuple((a + T, q) for a, q in spec.atoms))


def tabulated(s, h, atoms=()):
    return HazardSpec(Grid(tuple(s), tuple(h)), atoms)


def atoms_only(atoms):
    return HazardSpec(Zero(), atoms)


# ---------------------------------------------------------------------------
# DistributionView
# ---------------------------------------------------------------------------


class Evaluation(NamedTuple):
    F: float
    S: float
    f: float  # density at non-atom points, point mass at an atom
    atom: bool


class MomentResult(NamedTuple):
    value: float
    abserr: float
    diverged: bool

    def __float__(self):
        return self.value


class OrderCheck(NamedTuple):
    ok: bool
    s: float | None = None
    light_cdf: float | None = None
    middle_cdf: float | None = None
    heavy_cdf: float | None = None

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class DistributionView:
    """Numerical view of a :class:`HazardSpec`: CDF, survival, density, moments, draws."""

    spec: HazardSpec
    tol: float = DEFAULT_TOL

    @cached_property
    def atom_masses(self):
        sp = self.spec
        if not sp.atoms:
            return np.zeros(0)
        before = sp.continuous.cumhaz(sp.atom_locations) + sp._cum_weights[:-1]
        q = np.array([q for _, q in sp.atoms])
        return np.exp(-before) * q

    @cached_property
    def total_atom_mass(self):
        return float(self.atom_masses.sum())

    @cached_property
    def _cum_masses(self):
        return np.concatenate([[0.0], np.cumsum(self.atom_masses)])

    def sf(self, s):
        s = _arr(s)
        return _out(np.exp(-self.spec.cumulative_hazard(s)), s)

    def cdf(self, s):
        s = _arr(s)
        return _out(-np.expm1(-self.spec.cumulative_hazard(s)), s)

    def pdf(self, s):
        """Density of the continuous part (atoms excluded)."""
        s = _arr(s)
        lam = self.spec.cumulative_hazard(s)
        h = self.spec.continuous.hazard(s)
        with np.errstate(invalid="ignore"):
            dens = np.where(np.isfinite(lam) & np.isfinite(h), h * np.exp(-lam), 0.0)
        return _out(dens, s)

    def continuous_cdf(self, s):
        """``F(s)`` minus the atom masses located at or before ``s``."""
        s = _arr(s)
        k = np.searchsorted(self.spec.atom_locations, s, side="right")
        return _out(self.cdf(s) - self._cum_masses[k], s)

    def evaluate(self, s):
        if s < 0:
            raise ValueError("evaluate needs s >= 0")
        F, S = self.cdf(s), self.sf(s)
        hit = np.flatnonzero(self.spec.atom_locations == s)
        if hit.size:
            return Evaluation(F, S, float(self.atom_masses[hit[0]]), True)
        return Evaluation(F, S, self.pdf(s), False)

    def moment(self, order, tol=None):
        return moment(self, order, tol)

    @cached_property
    def mean(self):
        return self.moment(1).value

    def quantile_end(self, level=_TAIL_LEVEL):
        """Point beyond which the survival function is below ``level``."""
        return float(self.spec.inverse(-math.log(level)))

    def sample(self, rng, size=None):
        return sample(self, rng, size)


def as_view(x, tol=DEFAULT_TOL):
    if isinstance(x, DistributionView):
        return x
    if isinstance(x, HazardSpec):
        return DistributionView(x, tol)
    return DistributionView(HazardSpec(x), tol)


def _segments(points):
    pts = sorted({float(p) for p in points if p > 0 and math.isfinite(p)})
    edges = [0.0] + pts
    return list(zip(edges, edges[1:])) + [(edges[-1], math.inf)]


def _quad(fn, a, b, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fn, a, b, epsabs=tol, epsrel=1e-12, limit=500)
        except integrate.IntegrationWarning:
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(fn, a, b, epsabs=tol, epsrel=1e-12, limit=500)
    return val, err


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def cumulative_hazard(h, s):
    h = h.spec if isinstance(h, DistributionView) else h
    return h.cumulative_hazard(s)


def evaluate(view, s):
    return as_view(view).evaluate(s)


def moment(view, order, tol=None):
    """``E X^order`` as ``order * int_0^inf x^(order-1) S(x) dx``.

    Returns ``MomentResult(inf, ..., diverged=True)`` when the moment is
    certifiably infinite (improper law or a power tail with exponent <= order).
    """
    view = as_view(view)
    if order < 1 or int(order) != order:
        raise ValueError("moment order must be a positive integer")
    tol = view.tol if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    kind, p = view.spec.continuous.tail()
    if kind == "none" or (kind == "power" and p <= order):
        return MomentResult(math.inf, 0.0, True)

    def integrand(x):
        return order * x ** (order - 1) * view.sf(x)

    total, err = 0.0, 0.0
    for a, b in _segments(view.spec.breakpoints()):
        v, e = _quad(integrand, a, b, tol)
        total += v
        err += e
    if not math.isfinite(total):
        return MomentResult(math.inf, err, True)
    return MomentResult(total, err, False)


def sample(view, rng, size=None):
    """Inverse-cumulative-hazard draw: ``inf{s : Lambda(s) >= E}``, ``E ~ Exp(1)``."""
    spec = view.spec if isinstance(view, DistributionView) else view
    e = rng.standard_exponential(size)
    x = spec.inverse(e)
    if np.any(~np.isfinite(x)):
        raise ImproperDistributionError()
    return _out(x, e)


@lru_cache(maxsize=4096)
def min_compose(h1: HazardSpec, h2: HazardSpec) -> HazardSpec:
    """Hazard of ``min(X1, X2)`` for independent ``X1 ~ h1``, ``X2 ~ h2``."""
    merged = dict(h1.atoms)
    for a, q in h2.atoms:
        merged[a] = 1.0 - (1.0 - merged[a]) * (1.0 - q) if a in merged else q
    atoms = tuple(sorted(merged.items()))
    return HazardSpec(_canonical_sum([h1.continuous, h2.continuous]), atoms)


def _shared_atom_mass(views):
    first = views[0]
    total = 0.0
    for a, m in zip(first.spec.atom_locations, first.atom_masses):
        masses = [m]
        for v in views[1:]:
            hit = np.flatnonzero(np.abs(v.spec.atom_locations - a) <= 1e-12)
            if not hit.size:
                break
            masses.append(v.atom_masses[hit[0]])
        else:
            total += min(masses)
    return total


def common_part_kappa(*views, tol=DEFAULT_TOL):
    """``int min_i f_i(s) ds`` plus the minimum masses of atoms shared by all laws."""
    if len(views) == 1 and isinstance(views[0], (list, tuple)):
        views = tuple(views[0])
    views = [as_view(v) for v in views]
    if len(views) < 2:
        raise ValueError("need at least two distributions")
    if all(v.spec == views[0].spec for v in views[1:]):
        return 1.0
    points = set()
    for v in views:
        points.update(v.spec.breakpoints())
    # geometric splits toward 0: densities like s^(a-1) vary sharply there
    first = min([p for p in points if 0 < p < math.inf] + [1.0])
    points.update(first * 10.0 ** -np.arange(1, 13))

    def integrand(s):
        return min(v.pdf(s) for v in views)

    total = sum(_quad(integrand, a, b, tol)[0] for a, b in _segments(points))
    total += _shared_atom_mass(views)
    return float(min(max(total, 0.0), 1.0))


def stochastic_order_check(light, middle, heavy, grid, atol=1e-12):
    """Check ``G(s) >= F(s) >= Phi(s)`` on ``grid`` (light >= middle >= heavy CDFs)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be nonempty and sorted")
    g, f, p = (as_view(v).cdf(grid) for v in (light, middle, heavy))
    bad = (g < f - atol) | (f < p - atol)
    if not bad.any():
        return OrderCheck(True)
    i = int(np.argmax(bad))
    return OrderCheck(False, float(grid[i]), float(g[i]), float(f[i]), float(p[i]))


def hazard_dominated(lower, upper, grid, atol=1e-12):
    """First grid point where ``lower`` hazard exceeds ``upper`` hazard, or ``None``."""
    grid = np.asarray(grid, dtype=float)
    lo = lower.continuous.hazard(grid)
    hi = upper.continuous.hazard(grid)
    with np.errstate(invalid="ignore"):
        bad = lo > hi + atol * np.maximum(1.0, np.abs(hi))
    if bad.any():
        return float(grid[np.argmax(bad)])
    return None


def bracket_root(fn, a, b):
    """Root of a sign-changing scalar function on ``[a, b]``."""
    return optimize.brentq(fn, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)


def spec_from_dict(d) -> HazardSpec:
    atoms = tuple((float(x["location"]), float(x["q"])) for x in d.get("atoms", ()))
    return HazardSpec(continuous_from_dict(d), atoms)


def continuous_from_dict(d):
    fam = d.get("family")
    if fam == "zero":
        return Zero()
    if fam in ("exponential", "constant"):
        return Constant(float(d["rate"]))
    if fam == "weibull":
        return Weibull(float(d["shape"]), float(d["scale"]))
    if fam == "uniform":
        return Uniform(float(d.get("b", 1.0)))
    if fam == "pareto":
        return Pareto(float(d["C"]))
    if fam == "delayed":
        return Delayed(float(d["T"]), continuous_from_dict(d["base"]))
    if fam == "shifted":
        return Shifted(continuous_from_dict(d["base"]), float(d["u"]))
    if fam == "grid":
        return Grid(tuple(d["s"]), tuple(d["h"]))
    if fam == "sum":
        return _canonical_sum([continuous_from_dict(t) for t in d["terms"]])
    raise ValueError(f"unknown hazard family {fam!r}")


def views_grid(views: Sequence[DistributionView], resolution=1000):
    """Evaluation grid covering the bulk and tails of every law, plus breakpoints."""
    pts = {0.0}
    levels = np.linspace(0.0, 1.0, resolution + 1)[1:-1]
    ends = []
    for v in views:
        pts.update(v.spec.breakpoints())
        e = v.quantile_end()
        if not math.isfinite(e):
            raise ImproperDistributionError()
        ends.append(e)
        pts.update(v.spec.inverse(-np.log1p(-levels)).tolist())
        pts.update(v.spec.inverse(np.linspace(0.0, -math.log(_TAIL_LEVEL), resolution // 4)).tolist())
    end = max(ends)
    pts.update(np.linspace(0.0, end, resolution).tolist())
    arr = np.array(sorted(p for p in pts if math.isfinite(p) and 0.0 <= p <= end))
    return arr
