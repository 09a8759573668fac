"""Classical and quasi-renewal processes: simulation, recurrence times, renewal-function numerics."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .gendist import (
    DistributionView,
    HazardSpec,
    ImproperDistributionError,
    _quad,
    _segments,
    as_view,
    hazard_dominated,
    min_compose,
    moment,
)
from .streams import map_chunks

__all__ = [
    "Envelope", "RenewalPolicy", "IIDPolicy", "AlternatingPolicy", "MinCompositionPolicy", "CustomPolicy",
    "alternating_modulator", "PathRecord", "PathBatch", "AtomHistogram", "RenewalGrid",
    "SmithCheck", "simulate_path", "simulate_paths", "recurrence_samples", "period_samples", "overshoot_at",
    "undershoot_at", "renewal_function", "convolution_powers", "stationary_overshoot_cdf",
    "smith_limit_check", "empirical_overshoot_distribution", "audit_policy",
    "discrete_sum_cdf", "discrete_power_cdf", "discrete_order_check", "discrete_pmfs_between",
]


# ---------------------------------------------------------------------------
# envelopes and policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    """Lower/upper intensity bounds ``phi <= lambda_i <= Q`` for every renewal period.

    ``phi`` generates the heavy law Phi (stochastically largest period),
    ``Q`` the light law G. ``T`` is the delay horizon after which ``phi`` must be
    positive, ``k`` the moment order required of Phi.
    """

    phi: HazardSpec
    Q: HazardSpec
    T: float = 0.0
    k: int = 2
    check_grid: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("invalid envelope: " + "; ".join(problems))

    @property
    def grid(self):
        if self.check_grid is not None:
            return np.asarray(self.check_grid, dtype=float)
        return np.linspace(0.0, max(4.0 * self.T, self.T + 50.0), 5001)

    def problems(self):
        out = []
        if self.k < 2 or int(self.k) != self.k:
            out.append("moment order k must be an integer >= 2")
        if self.T < 0:
            out.append("delay horizon T must be nonnegative")
        if self.phi.atoms or self.Q.atoms:
            out.append("envelope intensities must be atom-free")
        if out:
            return out
        grid = self.grid
        if not math.isfinite(float(self.Q.continuous.hazard(0.0))):
            out.append("Q is not bounded near 0")
        bad = hazard_dominated(self.phi, self.Q, grid)
        if bad is not None:
            out.append(f"phi exceeds Q at s={bad:g}")
        if not self.phi.proper:
            out.append("integral of phi is finite")
        else:
            beyond = grid[grid > self.T]
            if beyond.size and np.any(self.phi.continuous.hazard(beyond) <= 0):
                out.append("phi vanishes beyond the delay horizon")
            if moment(self.phi, self.k).diverged:
                out.append(f"Phi has no finite moment of order k={self.k}")
        return out

    @property
    def heavy(self) -> DistributionView:
        return as_view(self.phi)

    @property
    def light(self) -> DistributionView:
        return as_view(self.Q)

    def admits(self, spec: HazardSpec, grid=None):
        """First ``s`` where ``spec`` leaves ``[phi, Q]``, or ``None`` if it stays inside."""
        grid = self.grid if grid is None else np.asarray(grid, dtype=float)
        if spec.atoms:
            return float(spec.atoms[0][0])
        low = hazard_dominated(self.phi, spec, grid)
        high = hazard_dominated(spec, self.Q, grid)
        hits = [x for x in (low, high) if x is not None]
        return min(hits) if hits else None


class RenewalPolicy:
    """Rule emitting the hazard of the ``i``-th renewal period (``i`` starts at 1).

    ``period_specs(i, history)`` receives the previous inter-times of a batch
    of paths as a ``(paths, i - 1)`` array and returns either one
    :class:`HazardSpec` shared by the batch or one spec per path.
    """

    envelope: Envelope | None = None
    iid = False

    def period_specs(self, i, history):
        raise NotImplementedError


@dataclass(frozen=True)
class IIDPolicy(RenewalPolicy):
    spec: HazardSpec
    envelope: Envelope | None = None
    iid = True

    def __post_init__(self):
        if isinstance(self.spec, DistributionView):
            object.__setattr__(self, "spec", self.spec.spec)

    def period_specs(self, i, history):
        return self.spec


@dataclass(frozen=True)
class MinCompositionPolicy(RenewalPolicy):
    """Period hazard ``phi + mu_i`` where ``mu_i = modulator(i, history)``.

    This is the law of ``min(zeta_i, theta_i)`` with ``zeta_i ~ phi`` and an
    independent ``theta_i ~ mu_i``.
    """

    base: HazardSpec
    modulator: Callable
    envelope: Envelope | None = None

    def period_specs(self, i, history):
        mu = self.modulator(i, history)
        if isinstance(mu, HazardSpec):
            return min_compose(self.base, mu)
        return [min_compose(self.base, m) for m in mu]


@dataclass(frozen=True)
class CustomPolicy(RenewalPolicy):
    rule: Callable
    envelope: Envelope | None = None

    def period_specs(self, i, history):
        return self.rule(i, history)


@dataclass(frozen=True)
class AlternatingPolicy(RenewalPolicy):
    """Periods cycle through ``specs`` (e.g. operational then repair durations), independent otherwise.

    ``phase`` selects the law of the first period.
    """

    specs: tuple
    envelope: Envelope | None = None
    phase: int = 0

    def __post_init__(self):
        specs = tuple(s.spec if isinstance(s, DistributionView) else s for s in self.specs)
        if not specs:
            raise ValueError("need at least one period law")
        object.__setattr__(self, "specs", specs)

    def period_specs(self, i, history):
        return self.specs[(i - 1 + self.phase) % len(self.specs)]


def alternating_modulator(*specs):
    """Modulator cycling through ``specs`` by period index, ignoring history."""
    specs = tuple(specs)

    def modulator(i, history):
        return specs[(i - 1) % len(specs)]

    return modulator


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _draw_periods(specs, rng, m, age=0.0):
    e = rng.standard_exponential(m)
    out = np.empty(m)
    if isinstance(specs, HazardSpec):
        groups = [(specs, slice(None))]
    else:
        if len(specs) != m:
            raise ValueError("policy returned the wrong number of period specs")
        by_id = {}
        for pos, sp in enumerate(specs):
            by_id.setdefault(id(sp), (sp, []))[1].append(pos)
        groups = [(sp, np.asarray(idx)) for sp, idx in by_id.values()]
    for sp, idx in groups:
        y = e[idx]
        if age > 0:
            y = y + float(sp.cumulative_hazard(age))
        out[idx] = sp.inverse(y) - age
    if not np.all(np.isfinite(out)):
        raise ImproperDistributionError()
    return out


def _simulate_chunk(policy, horizon, rng, n, initial_age=0.0):
    t = np.zeros(n)
    cols = []
    hist = np.empty((n, 16))
    active = np.arange(n)
    i = 1
    while active.size:
        specs = policy.period_specs(i, hist[active, : i - 1])
        age = initial_age if i == 1 else 0.0
        xi = _draw_periods(specs, rng, active.size, age)
        t_new = t[active] + xi
        col = np.full(n, np.inf)
        col[active] = t_new
        cols.append(col)
        t[active] = t_new
        if i > hist.shape[1]:
            hist = np.concatenate([hist, np.empty_like(hist)], axis=1)
        hist[active, i - 1] = xi + age
        active = active[t_new <= horizon]
        i += 1
    return np.column_stack(cols)


@dataclass(frozen=True)
class PathRecord:
    """One realized trajectory; the first event beyond ``horizon`` is retained."""

    event_times: np.ndarray
    horizon: float
    initial_age: float = 0.0

    @property
    def inter_times(self):
        return np.diff(np.concatenate([[0.0], self.event_times]))

    def overshoot_at(self, t):
        return overshoot_at(self, t)

    def undershoot_at(self, t):
        return undershoot_at(self, t)

    def to_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["index", "t_i", "xi_i"])
        for i, (ti, xi) in enumerate(zip(self.event_times, self.inter_times), start=1):
            w.writerow([i, f"{ti:.12g}", f"{xi:.12g}"])


def overshoot_at(path: PathRecord, t):
    """Backward recurrence time ``B_t = t - t_{N_t}`` (``t_0 = -initial_age``)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    ev = path.event_times
    c = int(np.searchsorted(ev, t, side="right"))
    if c >= ev.size:
        raise ValueError("horizon exhausted")
    last = ev[c - 1] if c > 0 else -path.initial_age
    return float(t - last)


def undershoot_at(path: PathRecord, t):
    """Forward recurrence time ``W_t = t_{N_t + 1} - t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    ev = path.event_times
    c = int(np.searchsorted(ev, t, side="right"))
    if c >= ev.size:
        raise ValueError("horizon exhausted")
    return float(ev[c] - t)


@dataclass(frozen=True)
class PathBatch:
    """Many trajectories as a padded ``(paths, events)`` array (``inf`` padding)."""

    event_times: np.ndarray
    horizon: float
    initial_age: float = 0.0

    def __len__(self):
        return self.event_times.shape[0]

    def counts(self, t):
        return (self.event_times <= t).sum(axis=1)

    def overshoot(self, t):
        return _overshoot(self.event_times, t, self.initial_age)

    def undershoot(self, t):
        return _undershoot(self.event_times, t)

    def path(self, i):
        ev = self.event_times[i]
        return PathRecord(ev[np.isfinite(ev)], self.horizon, self.initial_age)


def _overshoot(ev, t, age):
    c = (ev <= t).sum(axis=1)
    rows = np.arange(ev.shape[0])
    last = np.where(c > 0, ev[rows, np.maximum(c - 1, 0)], -age)
    return t - last


def _undershoot(ev, t):
    c = (ev <= t).sum(axis=1)
    if np.any(c >= ev.shape[1]):
        raise ValueError("horizon exhausted")
    nxt = ev[np.arange(ev.shape[0]), c]
    if not np.all(np.isfinite(nxt)):
        raise ValueError("horizon exhausted")
    return nxt - t


def simulate_path(policy: RenewalPolicy, horizon, rng, initial_age=0.0) -> PathRecord:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ev = _simulate_chunk(policy, horizon, rng, 1, initial_age)[0]
    return PathRecord(ev[np.isfinite(ev)], float(horizon), float(initial_age))


def simulate_paths(policy, horizon, n, seed=0, workers=None, initial_age=0.0) -> PathBatch:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    chunks = map_chunks(
        lambda rng, size: _simulate_chunk(policy, horizon, rng, size, initial_age),
        n, seed, "paths", workers,
    )
    width = max(c.shape[1] for c in chunks)
    ev = np.full((n, width), np.inf)
    row = 0
    for c in chunks:
        ev[row: row + c.shape[0], : c.shape[1]] = c
        row += c.shape[0]
    return PathBatch(ev, float(horizon), float(initial_age))


def recurrence_samples(policy, times, n, seed=0, workers=None, initial_age=0.0, tag="recurrence"):
    """Overshoot and undershoot samples, each shaped ``(n, len(times))``."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    horizon = max(float(times.max()), 1e-12)

    def work(rng, size):
        ev = _simulate_chunk(policy, horizon, rng, size, initial_age)
        B = np.column_stack([_overshoot(ev, t, initial_age) for t in times])
        W = np.column_stack([_undershoot(ev, t) for t in times])
        return B, W

    parts = map_chunks(work, n, seed, tag, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def period_samples(policy, n_periods, n, seed=0, workers=None, initial_age=0.0):
    """The first ``n_periods`` inter-times of ``n`` independent paths, shape ``(n, n_periods)``."""

    def work(rng, size):
        hist = np.empty((size, n_periods))
        for i in range(1, n_periods + 1):
            specs = policy.period_specs(i, hist[:, : i - 1])
            age = initial_age if i == 1 else 0.0
            hist[:, i - 1] = _draw_periods(specs, rng, size, age)
        return hist

    return np.concatenate(map_chunks(work, n, seed, "periods", workers))


def audit_policy(policy, envelope=None, n_paths=200, horizon=50.0, seed=0, grid=None):
    """Sampled audit: realized period hazards checked against the envelope on a grid.

    Returns a list of ``(period_index, s)`` violations (empty = pass).
    """
    envelope = envelope or policy.envelope
    if envelope is None:
        raise ValueError("no envelope to audit against")
    from .streams import stream

    rng = stream(seed, "audit")
    violations, seen = [], set()
    t = np.zeros(n_paths)
    hist = np.empty((n_paths, 0))
    active = np.arange(n_paths)
    i = 1
    while active.size:
        specs = policy.period_specs(i, hist[active])
        batch = [specs] if isinstance(specs, HazardSpec) else list(specs)
        for sp in batch:
            if id(sp) in seen:
                continue
            seen.add(id(sp))
            bad = envelope.admits(sp, grid)
            if bad is not None:
                violations.append((i, bad))
        xi = _draw_periods(specs, rng, active.size)
        col = np.full(n_paths, np.nan)
        col[active] = xi
        hist = np.column_stack([hist, col])
        t[active] += xi
        active = active[t[active] <= horizon]
        i += 1
    return violations


# ---------------------------------------------------------------------------
# histograms with atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomHistogram:
    """Binned law plus exact point masses. The last bin absorbs overflow."""

    edges: np.ndarray
    masses: np.ndarray
    atom_locations: np.ndarray
    atom_masses: np.ndarray
    n: int

    @classmethod
    def from_samples(cls, values, edges, atoms=(0.0,)):
        values = np.asarray(values, dtype=float)
        edges = np.asarray(edges, dtype=float)
        n = values.size
        key = np.round(values, 12)
        uniq, counts = np.unique(key, return_counts=True)
        forced = np.round(np.asarray(atoms, dtype=float), 12)
        is_atom = (counts >= 2) | np.isin(uniq, forced)
        locs, tallies = uniq[is_atom], counts[is_atom]
        rest = values[~np.isin(key, locs)]
        binned, _ = np.histogram(np.clip(rest, edges[0], edges[-1]), bins=edges)
        return cls(edges, binned / n, locs, tallies / n, n)

    @property
    def total(self):
        return float(self.masses.sum() + self.atom_masses.sum())

    def to_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "mass"])
        for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.masses):
            w.writerow([f"{lo:.12g}", f"{hi:.12g}", f"{m:.12g}"])
        w.writerow([])
        w.writerow(["location", "mass"])
        for a, m in zip(self.atom_locations, self.atom_masses):
            w.writerow([f"{a:.12g}", f"{m:.12g}"])


def empirical_overshoot_distribution(policy, t, n, bins=50, seed=0, workers=None, initial_age=0.0):
    """Histogram of ``B_t`` over ``n`` paths with exact tallies at 0, at ``t + age`` and at repeats."""
    if n < 1:
        raise ValueError("n must be at least 1")
    top = t + initial_age
    if np.ndim(bins) == 0:
        edges = np.linspace(0.0, top if top > 0 else 1.0, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    if t == 0:
        B = np.full(n, float(initial_age))
    else:
        B, _ = recurrence_samples(policy, [t], n, seed, workers, initial_age, tag="overshoot-hist")
        B = B[:, 0]
    return AtomHistogram.from_samples(B, edges, atoms=(0.0, top))


# ---------------------------------------------------------------------------
# renewal equation numerics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RenewalGrid:
    s: np.ndarray
    H: np.ndarray
    step: float
    snap_distance: float

    def at(self, x):
        return np.interp(x, self.s, self.H)

    def to_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["s", "H"])
        for s, h in zip(self.s, self.H):
            w.writerow([f"{s:.12g}", f"{h:.12g}"])


def _grid_increments(view, m, step):
    s = np.arange(m + 1) * step
    Fc = view.continuous_cdf(s)
    dFc = np.zeros(m + 1)
    dFc[1:] = np.diff(Fc)
    ma = np.zeros(m + 1)
    snap = 0.0
    for a, mass in zip(view.spec.atom_locations, view.atom_masses):
        node = int(round(a / step))
        if node <= m:
            ma[node] += mass
            snap = max(snap, abs(a - node * step))
    return s, Fc + np.cumsum(ma), dFc, ma, snap


def renewal_function(view, s_max, step):
    """Solve ``H = F + F * H`` on a uniform grid.

    Continuous increments use the trapezoid (Stieltjes) rule; atoms are snapped
    to the nearest node and contribute exact point-mass terms.
    """
    view = as_view(view)
    if not step > 0 or s_max < step:
        raise ValueError("need step > 0 and s_max >= step")
    mean = view.mean
    if not mean > step:
        raise ValueError("grid too coarse")
    m = int(round(s_max / step))
    s, Ft, dFc, ma, snap = _grid_increments(view, m, step)
    w = 0.5 * dFc + ma
    H = np.zeros(m + 1)
    H[0] = Ft[0] / (1.0 - ma[0])
    denom = 1.0 - 0.5 * dFc[1] - ma[0]
    for n in range(1, m + 1):
        acc = Ft[n] + np.dot(w[1: n + 1], H[n - 1:: -1])
        if n > 1:
            acc += 0.5 * np.dot(dFc[2: n + 1], H[n - 1: 0: -1])
        H[n] = acc / denom
    return RenewalGrid(s, H, float(step), snap)


def convolution_powers(view, n_max, s_max, step):
    """CDFs of ``F^{*1} .. F^{*n_max}`` on the renewal grid, shape ``(n_max, nodes)``."""
    view = as_view(view)
    m = int(round(s_max / step))
    s, Ft, dFc, ma, _ = _grid_increments(view, m, step)
    w = 0.5 * dFc + ma
    out = [Ft]
    for _ in range(n_max - 1):
        A = out[-1]
        nxt = np.convolve(w, A)[: m + 1] + 0.5 * np.convolve(dFc, A[1:])[: m + 1]
        out.append(np.minimum(nxt, 1.0))
    return np.vstack(out)


def stationary_overshoot_cdf(view, s):
    """``mu^-1 int_0^s (1 - F(u)) du``; ``nan`` when the mean is infinite."""
    view = as_view(view)
    if s < 0:
        raise ValueError("s must be nonnegative")
    m = view.moment(1)
    if m.diverged:
        return math.nan
    if s == 0:
        return 0.0
    pts = [p for p in view.spec.breakpoints() if p < s] + [s]
    total = 0.0
    for a, b in _segments(pts)[:-1]:
        total += _quad(view.sf, a, b, view.tol)[0]
    return min(total / m.value, 1.0)


@dataclass(frozen=True)
class SmithCheck:
    lhs: float
    rhs: float
    gap: float


def smith_limit_check(R, view, t_max, step=1e-3, support=None):
    """Compare ``int_0^t R(t - s) dH(s)`` at ``t = t_max`` with ``mu^-1 int R``.

    ``R`` is a vectorized nonnegative function on ``[0, inf)``; ``support``
    (optional) is the right end of its support, used for the integral.
    """
    view = as_view(view)
    grid = renewal_function(view, t_max, step)
    s, H = grid.s, grid.H
    mids = 0.5 * (s[1:] + s[:-1])
    r_mid = np.asarray(R(t_max - mids), dtype=float)
    lhs = float(np.asarray(R(np.array([t_max - s[0]])), dtype=float)[0] * H[0]
                + np.dot(r_mid, np.diff(H)))
    upper = math.inf if support is None else float(support)
    integral = _quad(lambda x: float(np.asarray(R(np.array([x])))[0]), 0.0, upper, 1e-10)[0]
    rhs = integral / view.mean
    return SmithCheck(lhs, rhs, abs(lhs - rhs))


# ---------------------------------------------------------------------------
# exact ordering of sums for finite discrete laws
# ---------------------------------------------------------------------------


def _cdf_from_pmf(pmf, support):
    acc, out = Fraction(0), {}
    for x, p in zip(support, pmf):
        acc += Fraction(p)
        out[x] = acc
    return out


def discrete_power_cdf(pmf, n, support=(1, 2, 3)):
    """Exact CDF of the ``n``-fold convolution of ``pmf`` at every reachable sum."""
    dist = {0: Fraction(1)}
    for _ in range(n):
        new = {}
        for s, p in dist.items():
            for x, q in zip(support, pmf):
                if q:
                    new[s + x] = new.get(s + x, Fraction(0)) + p * Fraction(q)
        dist = new
    return _running_cdf(dist, n, support)


def discrete_sum_cdf(rule, n, support=(1, 2, 3)):
    """Exact CDF of ``xi_1 + ... + xi_n`` where ``xi_i | history ~ rule(i, history)``."""
    dist = {}

    def walk(i, history, prob):
        if i > n:
            s = sum(history)
            dist[s] = dist.get(s, Fraction(0)) + prob
            return
        pmf = rule(i, tuple(history))
        for x, q in zip(support, pmf):
            if q:
                walk(i + 1, history + [x], prob * Fraction(q))

    walk(1, [], Fraction(1))
    return _running_cdf(dist, n, support)


def _running_cdf(dist, n, support):
    lo, hi = n * min(support), n * max(support)
    acc, out = Fraction(0), {}
    for s in range(lo, hi + 1):
        acc += dist.get(s, Fraction(0))
        out[s] = acc
    return out


def discrete_order_check(light_pmf, rule, heavy_pmf, n_max=4, support=(1, 2, 3)):
    """Exact check of ``G^{*n} >= F_{xi_1+..+xi_n} >= Phi^{*n}`` for ``n <= n_max``.

    Returns a list of violations ``(n, s, G, F, Phi)``; empty means the ordering holds.
    """
    bad = []
    for n in range(1, n_max + 1):
        G = discrete_power_cdf(light_pmf, n, support)
        F = discrete_sum_cdf(rule, n, support)
        P = discrete_power_cdf(heavy_pmf, n, support)
        for s in G:
            if not (G[s] >= F[s] >= P[s]):
                bad.append((n, s, G[s], F[s], P[s]))
    return bad


def discrete_pmfs_between(light_pmf, heavy_pmf, support=(1, 2, 3), denominator=6):
    """All pmfs on ``support`` with entries in ``1/denominator`` steps whose CDF lies between."""
    G = _cdf_from_pmf(light_pmf, support)
    P = _cdf_from_pmf(heavy_pmf, support)
    out = []
    k = len(support)
    for combo in itertools.product(range(denominator + 1), repeat=k - 1):
        if sum(combo) > denominator:
            continue
        pmf = [Fraction(c, denominator) for c in combo]
        pmf.append(1 - sum(pmf))
        F = _cdf_from_pmf(pmf, support)
        if all(G[x] >= F[x] >= P[x] for x in support):
            out.append(tuple(pmf))
    return out
