"""Basic coupling lemma, successful coupling of two overshoot chains, rate constants and TV curves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .gendist import (
    DEFAULT_TOL,
    DistributionView,
    HazardSpec,
    as_view,
    bracket_root,
    common_part_kappa,
    views_grid,
)
from .renewal import AlternatingPolicy, AtomHistogram, IIDPolicy, RenewalPolicy, recurrence_samples
from .reporting import dumps_json, rows_to_csv
from .streams import map_chunks

__all__ = [
    "KAPPA_MODES", "CommonPart", "CoupledDraw", "CouplingConfig", "CouplingResult", "RateConstant",
    "common_part", "couple_pair", "couple_n", "residual_kappa", "successful_coupling",
    "coupling_runs", "rate_constant", "empirical_tv", "convergence_experiment",
]

KAPPA_MODES = ("conservative-inf", "optimistic-sup")
_XTOL = 1e-12
_ZERO_KAPPA = 1e-15


def _exp_from_uniform(u):
    return -np.log1p(-u)


class CommonPart:
    """Common part ``Phi = min_i F_i`` (as measures) of several laws and the residues ``F_i - Phi``.

    The continuous part of ``Phi`` is assembled exactly from the continuous
    CDFs of whichever law has the smallest density on each segment; segment
    ends are density crossings refined by root finding. Shared atoms
    contribute their smallest mass.
    """

    def __init__(self, views, resolution=1000):
        self.views = [as_view(v) for v in views]
        if len(self.views) < 2:
            raise ValueError("need at least two distributions")
        specs = [v.spec for v in self.views]
        self.identical = all(s == specs[0] for s in specs[1:])
        if self.identical:
            self.kappa = 1.0
            return
        grid = views_grid(self.views, resolution)
        self.end = float(grid[-1])
        hard = {0.0, self.end}
        for v in self.views:
            hard.update(float(b) for b in v.spec.breakpoints())
        # probe just right of 0 too, so crossings inside the first cell are found
        probes = np.concatenate([[1e-9 * grid[1]], 0.5 * (grid[1:] + grid[:-1])])
        nodes = np.concatenate([[0.0], grid[1:]])  # nodes[i] lies between probes[i-1] and probes[i]
        owner = np.vstack([v.pdf(probes) for v in self.views]).argmin(axis=0)
        starts, owners = [0.0], [int(owner[0])]
        for i in np.flatnonzero(owner[1:] != owner[:-1]):
            a, b = int(owner[i]), int(owner[i + 1])
            node = float(nodes[i + 1])
            cut = node
            if node not in hard:
                fa, fb = self.views[a].pdf, self.views[b].pdf
                g = lambda x: float(fa(x) - fb(x))
                lo, hi = float(probes[i]), float(probes[i + 1])
                if g(lo) * g(hi) < 0:
                    cut = bracket_root(g, lo, hi)
            starts.append(cut)
            owners.append(b)
        self.starts = np.array(starts)
        self.owners = np.array(owners)
        ends = np.append(self.starts[1:], self.end)
        fc = [v.continuous_cdf for v in self.views]
        self._base = np.array([fc[j](a) for j, a in zip(owners, starts)])
        inc = np.array([fc[j](b) for j, b in zip(owners, ends)]) - self._base
        self._cum = np.concatenate([[0.0], np.cumsum(np.maximum(inc, 0.0))])
        locs, masses = [], []
        first = self.views[0]
        for a, m in zip(first.spec.atom_locations, first.atom_masses):
            found = [m]
            for v in self.views[1:]:
                hit = np.flatnonzero(v.spec.atom_locations == a)
                if not hit.size:
                    break
                found.append(v.atom_masses[hit[0]])
            else:
                locs.append(a)
                masses.append(min(found))
        self.atom_locations = np.array(locs, dtype=float)
        self.atom_masses = np.array(masses, dtype=float)
        self._atom_cum = np.concatenate([[0.0], np.cumsum(self.atom_masses)])
        self.kappa = float(min(max(self._cum[-1] + self._atom_cum[-1], 0.0), 1.0))

    # -- measures ---------------------------------------------------------
    def common_cdf(self, s):
        """Mass of ``Phi`` on ``[0, s]`` (total mass ``kappa``)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.end)
        k = np.searchsorted(self.starts, s, side="right") - 1
        out = self._cum[k] - self._base[k]
        own = self.owners[k]
        for j in np.unique(own):
            m = own == j
            out[m] += self.views[j].continuous_cdf(s[m])
        ka = np.searchsorted(self.atom_locations, s, side="right")
        return out + self._atom_cum[ka]

    def residue_cdf(self, i, s):
        """Mass of ``F_i - Phi`` on ``[0, s]`` (total mass ``1 - kappa``)."""
        s = np.asarray(s, dtype=float)
        return self.views[i].cdf(s) - self.common_cdf(s)

    # -- inverses ---------------------------------------------------------
    def _invert(self, fn, y, atoms):
        y = np.asarray(y, dtype=float)
        lo = np.zeros_like(y)
        hi = np.full_like(y, self.end)
        iters = min(200, int(math.ceil(math.log2(max(self.end, 1.0) / _XTOL))) + 2)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = fn(mid) >= y
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
            if np.all(hi - lo <= _XTOL * np.maximum(1.0, hi)):
                break
        out = hi.copy()
        for a in atoms:
            m = (lo < a) & (a <= hi)
            if np.any(m):
                m &= fn(np.full_like(y, a)) >= y
                out[m] = a
        out[fn(np.zeros_like(y)) >= y] = 0.0
        return out

    def common_inverse(self, y):
        return self._invert(self.common_cdf, y, self.atom_locations)

    def residue_inverse(self, i, y):
        return self._invert(lambda s: self.residue_cdf(i, s), y, self.views[i].spec.atom_locations)

    # -- draws ------------------------------------------------------------
    def draw(self, rng, size):
        """Coupled draws ``(len(views), size)`` and the coincidence flags."""
        U = rng.random((3, size))
        k = len(self.views)
        if self.identical:
            x = self.views[0].spec.inverse(_exp_from_uniform(U[1]))
            return np.tile(x, (k, 1)), np.ones(size, dtype=bool)
        if self.kappa <= _ZERO_KAPPA:
            extra = rng.random((max(k - 2, 0), size))
            us = [U[1], U[2], *extra]
            x = np.vstack([v.spec.inverse(_exp_from_uniform(u)) for v, u in zip(self.views, us)])
            return x, np.zeros(size, dtype=bool)
        coin = U[0] < self.kappa
        x = np.empty((k, size))
        if coin.any():
            x[:, coin] = self.common_inverse(self.kappa * U[1, coin])
        miss = ~coin
        if miss.any():
            y = (1.0 - self.kappa) * U[2, miss]
            for i in range(k):
                x[i, miss] = self.residue_inverse(i, y)
        return x, coin


@lru_cache(maxsize=256)
def _common_part_cached(specs, resolution):
    return CommonPart([DistributionView(s) for s in specs], resolution)


def common_part(views, resolution=1000) -> CommonPart:
    specs = tuple(v.spec if isinstance(v, DistributionView) else v for v in views)
    return _common_part_cached(specs, resolution)


@dataclass(frozen=True)
class CoupledDraw:
    x1: np.ndarray
    x2: np.ndarray
    coincided: np.ndarray


def couple_pair(v1, v2, rng, size=None, resolution=1000) -> CoupledDraw:
    """Basic-coupling-lemma pair: marginals ``v1``, ``v2``; equal with probability ``kappa``."""
    cp = common_part((as_view(v1), as_view(v2)), resolution)
    x, coin = cp.draw(rng, 1 if size is None else size)
    if size is None:
        return CoupledDraw(float(x[0, 0]), float(x[1, 0]), bool(coin[0]))
    return CoupledDraw(x[0], x[1], coin)


def couple_n(views, rng, size=None, resolution=1000):
    """Coupled draws for ``n >= 2`` laws; returns ``(draws, all_coincided)``."""
    views = [as_view(v) for v in views]
    if len(views) < 2:
        raise ValueError("need at least two distributions")
    cp = common_part(views, resolution)
    x, coin = cp.draw(rng, 1 if size is None else size)
    if size is None:
        return x[:, 0], bool(coin[0])
    return x, coin


def residual_kappa(view, theta, mode="conservative-inf", tol=DEFAULT_TOL, n_grid=64):
    """Common part of the residual law at age ``u`` and the fresh law, optimized over ``u in [0, theta]``.

    ``u = 0`` enters as the limit ``u -> 0+``.
    """
    view = as_view(view, tol)
    if mode not in KAPPA_MODES:
        raise ValueError(f"kappa_mode must be one of {KAPPA_MODES}")
    if not theta > 0:
        raise ValueError("theta must be positive")
    vals = _residual_kappas(view.spec, float(theta), float(tol), int(n_grid))
    return float(min(vals) if mode == "conservative-inf" else max(vals))


@lru_cache(maxsize=128)
def _residual_kappas(spec, theta, tol, n_grid):
    view = DistributionView(spec, tol)
    us = np.linspace(0.0, theta, n_grid + 1)
    if np.any(view.sf(us) <= 0):
        raise ValueError("threshold beyond support")
    vals = [1.0]
    for u in us[1:]:
        vals.append(common_part_kappa(DistributionView(spec.shifted(float(u)), tol), view, tol=tol))
    return tuple(vals)


# ---------------------------------------------------------------------------
# successful coupling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingConfig:
    theta: float | None = None
    M: float | None = None
    kappa_mode: str = "conservative-inf"
    rate_order: int = 2
    max_epochs: int = 10_000
    kappa_grid: int = 64
    resolution: int = 200

    def __post_init__(self):
        if self.kappa_mode not in KAPPA_MODES:
            raise ValueError(f"kappa_mode must be one of {KAPPA_MODES}")
        if int(self.rate_order) != self.rate_order or self.rate_order < 2:
            raise ValueError("rate_order must be an integer >= 2")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if self.M is not None and self.M < 0:
            raise ValueError("M must be nonnegative")
        if self.theta is not None and self.M is not None and not self.theta > self.M:
            raise ValueError("theta must exceed M")

    def resolve(self, policy: RenewalPolicy) -> "CouplingConfig":
        """Fill ``M`` (Lorden bound) and ``theta`` (``4 M``) when unset."""
        from .lorden import classical_bound, generalized_bound

        M = self.M
        if M is None:
            if policy.envelope is not None:
                M = generalized_bound(policy.envelope).generalized_bound
            elif isinstance(policy, IIDPolicy):
                M = classical_bound(policy.spec)
            elif isinstance(policy, AlternatingPolicy):
                M = max(classical_bound(sp) for sp in policy.specs)
            if M is None or not math.isfinite(M):
                raise ValueError("no finite overshoot bound available for M")
        theta = 4.0 * M if self.theta is None else self.theta
        return replace(self, M=float(M), theta=float(theta))

    @property
    def p0(self):
        return 1.0 - self.M / self.theta


@dataclass(frozen=True)
class RateConstant:
    K_hat: float
    halfwidth: float
    k: int

    def curve(self, t):
        t = np.asarray(t, dtype=float)
        return self.K_hat / t ** (self.k - 1)


def rate_constant(tau_samples, k) -> RateConstant:
    """``K_hat = mean(tau^(k-1))`` with a 3-sigma half-width."""
    tau = np.asarray(tau_samples, dtype=float)
    if tau.size == 0:
        raise ValueError("need at least one coupling time")
    if int(k) != k or k < 2:
        raise ValueError("k must be an integer >= 2")
    p = tau ** (k - 1)
    half = 3.0 * float(p.std(ddof=1)) / math.sqrt(p.size) if p.size > 1 else math.inf
    if not np.all(np.isfinite(p)):
        return RateConstant(math.inf, math.inf, int(k))
    return RateConstant(float(p.mean()), half, int(k))


@dataclass(frozen=True)
class CouplingResult:
    tau_samples: np.ndarray
    epochs: np.ndarray
    censored: int
    epoch_success_estimate: float
    K_hat: float
    K_halfwidth: float
    k: int
    p0: float
    kappa: float
    identical_after_tau: bool
    probe_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    probes1: np.ndarray | None = None
    probes2: np.ndarray | None = None

    def bound(self, t):
        t = np.asarray(t, dtype=float)
        return self.K_hat / t ** (self.k - 1)

    def tv_bound_curve(self, times):
        return [(float(t), float(self.bound(t))) for t in times]

    def tail(self, t):
        """Empirical ``P(tau > t)``."""
        return float(np.mean(self.tau_samples > t))

    def to_dict(self, times=()):
        return {
            "runs": int(self.tau_samples.size), "censored": self.censored,
            "epoch_success_estimate": self.epoch_success_estimate, "p0": self.p0,
            "kappa": self.kappa, "p0_kappa": self.p0 * self.kappa, "K_hat": self.K_hat,
            "K_halfwidth": self.K_halfwidth, "rate_order": self.k,
            "mean_epochs": float(self.epochs.mean()) if self.epochs.size else math.nan,
            "identical_after_tau": self.identical_after_tau,
            "tv_bound_curve": [{"t": t, "bound": b} for t, b in self.tv_bound_curve(times)],
        }

    def to_json(self, times=()):
        return dumps_json(self.to_dict(times))

    def tau_csv(self):
        rows = [{"run": i, "tau": t, "epochs": e} for i, (t, e) in enumerate(zip(self.tau_samples, self.epochs))]
        return rows_to_csv(["run", "tau", "epochs"], rows)


def _draw(specs, modes, ages, rng):
    """One period per row: law ``specs[mode]`` conditioned on surviving ``age``."""
    e = rng.standard_exponential(modes.size)
    out = np.empty(modes.size)
    for m in np.unique(modes):
        rows = np.flatnonzero(modes == m)
        a = ages[rows]
        if np.all(a == 0):
            out[rows] = specs[m].inverse(e[rows])
            continue
        for age in np.unique(a):
            sub = rows[a == age]
            sp = specs[m].shifted(float(age)) if age > 0 else specs[m]
            out[sub] = sp.inverse(e[sub])
    return out


def _coupling_chunk(specs, start1, start2, cfg, rng, size, probe_times, post_events=3):
    """Vectorized epoch recursion for ``size`` independent coupled runs.

    Each chain cycles through ``specs``; a chain's state is its current mode
    and the start ``l`` of its current period. At every renewal after both
    chains renewed once, if the other chain is in the same mode with age
    ``u < theta``, the fresh law and the residual law at ``u`` are coupled.
    """
    nm = len(specs)
    tau = np.full(size, np.inf)
    epochs = np.zeros(size, dtype=np.int64)
    mode = np.empty((2, size), dtype=np.int64)
    l = np.empty((2, size))
    nxt = np.empty((2, size))
    for c, (m0, b) in enumerate((start1, start2)):
        mode[c], l[c] = m0, -b
        nxt[c] = _draw(specs, mode[c], np.full(size, float(b)), rng)
    renewed = np.zeros((2, size), dtype=bool)
    state = np.zeros(size, dtype=np.int8)  # 0 running, 1 merged, 2 finished
    post = np.zeros((2, size, post_events))
    n_post = np.zeros(size, dtype=np.int64)
    P = probe_times
    probes = np.full((2, size, P.size), np.nan)
    p_max = P.max() if P.size else -np.inf
    if tuple(start1) == tuple(start2):
        state[:] = 1
        tau[:] = 0.0
        nxt[1] = nxt[0]

    def record(chain, rows, upto):
        if P.size and rows.size:
            last = l[chain, rows][:, None]
            inside = (P[None, :] >= last) & (P[None, :] < upto[:, None])
            probes[chain, rows] = np.where(inside, P[None, :] - last, probes[chain, rows])

    def merge(rows, at):
        tau[rows] = at
        state[rows] = 1
        n_post[rows] = 0

    while True:
        merged = np.flatnonzero(state == 1)
        if merged.size:
            e = nxt[0, merged]
            record(0, merged, e)
            record(1, merged, e)
            l[0, merged] = l[1, merged] = e
            mode[0, merged] = mode[1, merged] = (mode[0, merged] + 1) % nm
            slot = n_post[merged]
            keep = slot < post_events
            post[0, merged[keep], slot[keep]] = e[keep]
            post[1, merged[keep], slot[keep]] = e[keep]
            n_post[merged] += 1
            x = _draw(specs, mode[0, merged], np.zeros(merged.size), rng)
            nxt[0, merged] = nxt[1, merged] = e + x
            state[merged[(n_post[merged] >= post_events) & (e > p_max)]] = 2

        run = np.flatnonzero(state == 0)
        if not run.size:
            if not np.any(state == 1):
                break
            continue
        n1, n2 = nxt[0, run], nxt[1, run]
        tie = (n1 == n2) & (mode[0, run] == mode[1, run])
        if np.any(tie):
            rows = run[tie]
            merge(rows, n1[tie])
            run, n1, n2 = run[~tie], n1[~tie], n2[~tie]
            if not run.size:
                continue
        c = np.where(n1 <= n2, 0, 1)
        o = 1 - c
        e = np.minimum(n1, n2)
        for chain in (0, 1):
            m = c == chain
            record(chain, run[m], e[m])
        l[c, run] = e
        mode[c, run] = (mode[c, run] + 1) % nm
        renewed[c, run] = True
        attempt = renewed[0, run] & renewed[1, run]

        rows = run[~attempt]
        if rows.size:
            cc = c[~attempt]
            nxt[cc, rows] = e[~attempt] + _draw(specs, mode[cc, rows], np.zeros(rows.size), rng)

        rows = run[attempt]
        if rows.size:
            ca, oa, ea = c[attempt], o[attempt], e[attempt]
            epochs[rows] += 1
            u = ea - l[oa, rows]
            mc = mode[ca, rows]
            ok = (u < cfg.theta) & (mode[oa, rows] == mc)
            idx = np.flatnonzero(~ok)
            if idx.size:
                nxt[ca[idx], rows[idx]] = ea[idx] + _draw(specs, mc[idx], np.zeros(idx.size), rng)
            groups = {}
            for j in np.flatnonzero(ok):
                fresh = specs[mc[j]]
                groups.setdefault((fresh, fresh.shifted(float(u[j]))), []).append(j)
            for pair, members in groups.items():
                members = np.asarray(members)
                x, coin = common_part(pair, cfg.resolution).draw(rng, members.size)
                r = rows[members]
                nxt[ca[members], r] = ea[members] + x[0]
                nxt[oa[members], r] = ea[members] + x[1]
                if coin.any():
                    merge(r[coin], ea[members][coin] + x[0, coin])
            over = rows[(epochs[rows] >= cfg.max_epochs) & (state[rows] == 0)]
            state[over] = 2

    identical = bool(np.array_equal(post[0], post[1]))
    return tau, epochs, identical, probes


def _policy_laws(policy):
    if isinstance(policy, IIDPolicy):
        return (policy.spec,), 0
    if isinstance(policy, AlternatingPolicy):
        return policy.specs, policy.phase
    raise NotImplementedError("successful coupling is implemented for iid and alternating policies")


def _start(b, phase, nm):
    """Initial chain state ``(mode, age)`` from an overshoot or an explicit pair."""
    if np.ndim(b) == 0:
        return (phase % nm, float(b))
    m, age = b
    return (int(m) % nm, float(age))


def coupling_runs(policy: RenewalPolicy, b1, b2, cfg: CouplingConfig, runs, seed=0, workers=None,
                  probe_times=(), tag="coupling") -> CouplingResult:
    """Independent successful-coupling runs from initial overshoots ``b1`` and ``b2``.

    For alternating policies ``b1``/``b2`` may be ``(mode, age)`` pairs.
    """
    specs, phase = _policy_laws(policy)
    start1, start2 = _start(b1, phase, len(specs)), _start(b2, phase, len(specs))
    if start1[1] < 0 or start2[1] < 0:
        raise ValueError("initial overshoots must be nonnegative")
    cfg = cfg.resolve(policy)
    if not cfg.theta > cfg.M:
        raise ValueError("theta must exceed M")
    for m, b in (start1, start2):
        if b > 0 and as_view(specs[m]).sf(b) <= 0:
            raise ValueError("initial overshoot beyond support")
    kappas = [residual_kappa(sp, cfg.theta, cfg.kappa_mode, n_grid=cfg.kappa_grid) for sp in specs]
    kappa = min(kappas) if cfg.kappa_mode == "conservative-inf" else max(kappas)
    p0 = cfg.p0
    if not p0 * kappa > 0:
        raise ValueError("coupling construction inapplicable")
    P = np.asarray(probe_times, dtype=float)
    parts = map_chunks(lambda rng, size: _coupling_chunk(specs, start1, start2, cfg, rng, size, P),
                       runs, seed, tag, workers)
    tau = np.concatenate([p[0] for p in parts])
    epochs = np.concatenate([p[1] for p in parts])
    probes = np.concatenate([p[3] for p in parts], axis=1)
    identical = all(p[2] for p in parts)
    finite = np.isfinite(tau)
    total_epochs = int(epochs.sum())
    successes = int(np.sum(finite & (epochs > 0)))
    success = successes / total_epochs if total_epochs else 1.0
    if finite.any():
        rc = rate_constant(tau[finite], cfg.rate_order)
    else:
        rc = RateConstant(math.inf, math.inf, cfg.rate_order)
    return CouplingResult(tau, epochs, int((~finite).sum()), float(success), rc.K_hat, rc.halfwidth,
                          int(cfg.rate_order), float(p0), float(kappa), identical, P,
                          probes[0] if P.size else None, probes[1] if P.size else None)


def successful_coupling(policy, b1, b2, cfg: CouplingConfig, rng=0) -> CouplingResult:
    """A single coupled run (``rng`` is a seed); use :func:`coupling_runs` for batches."""
    seed = rng if isinstance(rng, (int, np.integer)) else int(np.asarray(rng.integers(0, 2**63)))
    return coupling_runs(policy, b1, b2, cfg, 1, seed, 1)


# ---------------------------------------------------------------------------
# total variation
# ---------------------------------------------------------------------------


def empirical_tv(h1: AtomHistogram, h2: AtomHistogram) -> float:
    """Half the L1 distance between two histograms with atoms on identical bins."""
    if h1.edges.shape != h2.edges.shape or not np.array_equal(h1.edges, h2.edges):
        raise ValueError("histograms use different binning")
    tv = 0.5 * float(np.abs(h1.masses - h2.masses).sum())
    locs = np.union1d(h1.atom_locations, h2.atom_locations)
    a1 = np.zeros(locs.size)
    a2 = np.zeros(locs.size)
    a1[np.searchsorted(locs, h1.atom_locations)] = h1.atom_masses
    a2[np.searchsorted(locs, h2.atom_locations)] = h2.atom_masses
    tv += 0.5 * float(np.abs(a1 - a2).sum())
    return min(tv, 1.0)


def tv_bias_bound(h1: AtomHistogram, h2: AtomHistogram) -> float:
    """Rough upper bound on the upward bias of the plug-in TV from sampling noise."""
    p = np.concatenate([h1.masses, h1.atom_masses])
    q = np.concatenate([h2.masses, h2.atom_masses])
    if p.size != q.size:
        return math.nan
    return 0.5 * float(np.sum(np.sqrt((p + q) / min(h1.n, h2.n))))


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list
    coupling: CouplingResult

    COLUMNS = ("t", "tv_hat", "sigma", "bias_bound", "p_tau_gt_t", "bound", "flag")

    @property
    def flagged(self):
        return [r["t"] for r in self.rows if r["flag"]]

    def to_dict(self):
        return {"rows": self.rows, "coupling": self.coupling.to_dict([r["t"] for r in self.rows])}

    def to_json(self):
        return dumps_json(self.to_dict())

    def to_csv(self):
        return rows_to_csv(list(self.COLUMNS), self.rows)


def _overshoot_hist_pair(policy, b1, b2, t, n, bins, seed, workers, tag):
    top = t + max(b1, b2)
    edges = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
    hs = []
    for j, b in enumerate((b1, b2)):
        B, _ = recurrence_samples(policy, [t], n, seed, workers, initial_age=b, tag=f"{tag}-{j}-{t!r}")
        hs.append(AtomHistogram.from_samples(B[:, 0], edges, atoms=(0.0, t + b)))
    return hs


def convergence_experiment(policy, b1, b2, times, n, cfg: CouplingConfig, seed=0, workers=None,
                           bins=50, runs=10_000) -> ConvergenceTable:
    """Empirical TV between the overshoot laws started from ``b1`` and ``b2`` versus ``K_hat / t^(k-1)``.

    ``sigma = 1/sqrt(n)`` bounds the standard deviation of the plug-in TV
    (each sample moves it by at most ``1/n``). A row is flagged when
    ``tv_hat - 3 sigma > bound``.
    """
    result = coupling_runs(policy, b1, b2, cfg, runs, seed, workers)
    rows = []
    sigma = 1.0 / math.sqrt(n)
    for t in times:
        h1, h2 = _overshoot_hist_pair(policy, b1, b2, float(t), n, bins, seed, workers, "tv")
        tv = empirical_tv(h1, h2)
        bound = float(result.bound(t)) if t > 0 else math.inf
        rows.append({
            "t": float(t), "tv_hat": tv, "sigma": sigma, "bias_bound": tv_bias_bound(h1, h2),
            "p_tau_gt_t": result.tail(t), "bound": bound, "flag": bool(tv - 3 * sigma > bound),
        })
    return ConvergenceTable(rows, result)
