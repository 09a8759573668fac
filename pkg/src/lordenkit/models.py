"""Two-element dependent reliability model and a generalized MMPP, simulated by uniformized thinning.

Both systems are clock models: ``K`` clocks, each with a discrete mode and an
elapsed time since its last own transition. The firing rate of clock ``k`` in
mode ``m`` is a rule evaluated on the full state. Candidate events arrive at
the summed rate majorant and are accepted with probability
``rate / majorant``, which is exact as long as each majorant dominates its
rule everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gendist import HazardSpec, exponential, pareto
from .renewal import AlternatingPolicy, AtomHistogram, Envelope
from .reporting import dumps_json, rows_to_csv
from .streams import map_chunks

__all__ = [
    "ConstantRate", "ParetoRate", "IndicatorRate", "CustomRate", "rule_from_dict",
    "ReliabilityState", "MmppState", "Trajectory", "ReliabilityRun", "MmppReport",
    "simulate_reliability", "reliability_batch", "envelope_audit",
    "reliability_ergodicity_experiment", "simulate_mmpp",
]


# ---------------------------------------------------------------------------
# rate rules: rule(x, modes, k) -> rates, with x/modes shaped (replications, clocks)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantRate:
    rate: float

    @property
    def majorant(self):
        return self.rate

    def __call__(self, x, modes, k):
        return np.full(x.shape[0], float(self.rate))

    def as_spec(self):
        return exponential(self.rate)

    def to_dict(self):
        return {"family": "constant", "rate": self.rate}


@dataclass(frozen=True)
class ParetoRate:
    """``C / (1 + x_own)``."""

    C: float

    @property
    def majorant(self):
        return self.C

    def __call__(self, x, modes, k):
        return self.C / (1.0 + x[:, k])

    def as_spec(self):
        return pareto(self.C)

    def to_dict(self):
        return {"family": "c-over-1-plus-x", "C": self.C}


@dataclass(frozen=True)
class IndicatorRate:
    """``base + amp * 1(x_partner < window)``, optionally only while the partner is in ``partner_mode``."""

    base: float
    amp: float
    partner: int
    window: float
    partner_mode: int | None = None

    @property
    def majorant(self):
        return self.base + max(self.amp, 0.0)

    def __call__(self, x, modes, k):
        on = x[:, self.partner] < self.window
        if self.partner_mode is not None:
            on &= modes[:, self.partner] == self.partner_mode
        return self.base + self.amp * on

    def as_spec(self):
        return None

    def to_dict(self):
        d = {"family": "indicator", "base": self.base, "amp": self.amp,
             "partner": self.partner, "window": self.window}
        if self.partner_mode is not None:
            d["partner_mode"] = self.partner_mode
        return d


@dataclass(frozen=True)
class CustomRate:
    fn: Callable
    majorant: float

    def __call__(self, x, modes, k):
        return np.asarray(self.fn(x, modes, k), dtype=float)

    def as_spec(self):
        return None


def rule_from_dict(d, index=None):
    fam = str(d.get("family", "")).lower()
    if fam == "constant":
        return ConstantRate(float(d["rate"]))
    if fam in ("c-over-1-plus-x", "pareto"):
        return ParetoRate(float(d["C"]))
    if fam == "indicator":
        pm = d.get("partner_mode")
        return IndicatorRate(float(d["base"]), float(d["amp"]), int(d["partner"]), float(d["window"]),
                             None if pm is None else int(pm))
    raise ValueError(f"unknown rate rule family {fam!r}")


def _majorant(rule, override=None):
    M = override if override is not None else getattr(rule, "majorant", None)
    if M is None or not (M > 0 and math.isfinite(M)):
        raise ValueError("every rule needs a finite positive majorant")
    return float(M)


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


@dataclass
class _Engine:
    table: list          # table[k][mode] -> rule
    majorants: np.ndarray  # (K, max_modes)
    n_modes: np.ndarray    # (K,)

    def run(self, x0, m0, horizon, rng, probes=(), record=False, occupancy=False):
        x = np.array(x0, dtype=float)
        modes = np.array(m0, dtype=np.int64)
        R, K = x.shape
        t = np.zeros(R)
        P = np.asarray(probes, dtype=float)
        snap_x = np.full((P.size, R, K), np.nan)
        snap_m = np.zeros((P.size, R, K), dtype=np.int64)
        occ = np.zeros((R, K, int(self.n_modes.max())))
        counts = np.zeros((R, K), dtype=np.int64)
        log = [] if record else None
        active = np.arange(R)
        clocks = np.arange(K)
        while active.size:
            Mk = self.majorants[clocks[None, :], modes[active]]          # (A, K)
            total = Mk.sum(axis=1)
            dt = rng.standard_exponential(active.size) / total
            pick_u = rng.random(active.size) * total
            acc_u = rng.random(active.size)
            t_new = t[active] + dt
            over = t_new > horizon
            dt_eff = np.where(over, horizon - t[active], dt)
            xa, ma = x[active], modes[active]
            for j, p in enumerate(P):
                hit = (t[active] <= p) & ((p < t_new) | (over & (p <= horizon)))
                if hit.any():
                    rows = active[hit]
                    snap_x[j, rows] = xa[hit] + (p - t[rows])[:, None]
                    snap_m[j, rows] = ma[hit]
            if occupancy:
                np.add.at(occ, (np.repeat(active, K), np.tile(clocks, active.size), ma.ravel()),
                          np.repeat(dt_eff, K))
            done = active[over]
            t[done] = horizon
            x[done] += dt_eff[over][:, None]
            keep = ~over
            active, dt, pick_u, acc_u, Mk = active[keep], dt[keep], pick_u[keep], acc_u[keep], Mk[keep]
            if not active.size:
                break
            t[active] += dt
            x[active] += dt[:, None]
            k = (np.cumsum(Mk, axis=1) <= pick_u[:, None]).sum(axis=1)
            k = np.minimum(k, K - 1)
            mk = modes[active, k]
            rate = np.empty(active.size)
            for kk in range(K):
                for mm in range(int(self.n_modes[kk])):
                    sel = (k == kk) & (mk == mm)
                    if sel.any():
                        rows = active[sel]
                        rate[sel] = self.table[kk][mm](x[rows], modes[rows], kk)
            bad = ~np.isfinite(rate) | (rate < 0)
            if bad.any():
                r = active[np.flatnonzero(bad)[0]]
                raise ValueError(f"rule returned invalid rate at state modes={modes[r].tolist()} "
                                 f"elapsed={x[r].tolist()}")
            maj = self.majorants[k, mk]
            if np.any(rate > maj * (1 + 1e-12)):
                r = active[np.flatnonzero(rate > maj * (1 + 1e-12))[0]]
                raise ValueError(f"majorant too small at state modes={modes[r].tolist()} "
                                 f"elapsed={x[r].tolist()}")
            fire = acc_u * maj < rate
            if log is not None:
                for i in np.flatnonzero(fire):
                    r = active[i]
                    log.append((float(t[r]), int(k[i]), int(modes[r, k[i]]), x[r].copy(), modes[r].copy(),
                                float(rate[i])))
            rows, kf = active[fire], k[fire]
            x[rows, kf] = 0.0
            modes[rows, kf] = (modes[rows, kf] + 1) % self.n_modes[kf]
            counts[rows, kf] += 1
        return {"x": x, "modes": modes, "snap_x": snap_x, "snap_m": snap_m, "occ": occ,
                "counts": counts, "log": log}


def _engine(table, majorant_overrides=None):
    K = len(table)
    nm = np.array([len(row) for row in table])
    M = np.zeros((K, int(nm.max())))
    for k, row in enumerate(table):
        for m, rule in enumerate(row):
            ov = None if majorant_overrides is None else majorant_overrides[k][m]
            M[k, m] = _majorant(rule, ov)
    return _Engine([list(r) for r in table], M, nm)


# ---------------------------------------------------------------------------
# reliability model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReliabilityState:
    """Per element: mode (0 operational, 1 under repair) and elapsed time in that mode."""

    modes: tuple = (0, 0)
    elapsed: tuple = (0.0, 0.0)

    def __post_init__(self):
        if len(self.modes) != 2 or len(self.elapsed) != 2:
            raise ValueError("the reliability model has exactly two elements")
        if any(m not in (0, 1) for m in self.modes):
            raise ValueError("modes must be 0 (operational) or 1 (repair)")
        if any(x < 0 for x in self.elapsed):
            raise ValueError("elapsed times must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    """Accepted transitions of a single replication.

    ``times[i]`` is the ``i``-th transition, ``clocks[i]`` the element/flow that
    moved, ``from_modes[i]`` its mode just before, ``states[i]`` the elapsed
    vector just before the reset and ``rates[i]`` the realized rate.
    ``modes_after[i]``/``resets[i]`` hold the modes and last-reset times after
    ``i`` transitions (row 0 is the initial state).
    """

    horizon: float
    times: np.ndarray
    clocks: np.ndarray
    from_modes: np.ndarray
    states: np.ndarray
    rates: np.ndarray
    modes_after: np.ndarray
    resets: np.ndarray

    def state_at(self, s):
        """``(modes, elapsed)`` at time ``s`` (right-continuous)."""
        s = np.asarray(s, dtype=float)
        i = np.searchsorted(self.times, s, side="right")
        return self.modes_after[i], s[..., None] - self.resets[i]

    def to_csv(self):
        rows = [{"time": t, "clock": int(k), "from_mode": int(m), "rate": r}
                for t, k, m, r in zip(self.times, self.clocks, self.from_modes, self.rates)]
        return rows_to_csv(["time", "clock", "from_mode", "rate"], rows)


def _trajectory(log, x0, m0, horizon, n_modes):
    K = len(x0)
    t = np.array([e[0] for e in log], dtype=float)
    k = np.array([e[1] for e in log], dtype=np.int64)
    modes = np.empty((t.size + 1, K), dtype=np.int64)
    resets = np.empty((t.size + 1, K))
    modes[0], resets[0] = m0, -np.asarray(x0, dtype=float)
    for i in range(t.size):
        modes[i + 1], resets[i + 1] = modes[i], resets[i]
        modes[i + 1, k[i]] = (modes[i, k[i]] + 1) % n_modes[k[i]]
        resets[i + 1, k[i]] = t[i]
    return Trajectory(float(horizon), t, k, np.array([e[2] for e in log], dtype=np.int64),
                      np.array([e[3] for e in log], dtype=float).reshape(-1, K),
                      np.array([e[5] for e in log], dtype=float), modes, resets)


def _reliability_table(rules):
    if isinstance(rules, dict):
        fail, rep = rules["failure"], rules["repair"]
    else:
        fail, rep = rules
    if len(fail) != 2 or len(rep) != 2:
        raise ValueError("need failure and repair rules for exactly two elements")
    return [[fail[0], rep[0]], [fail[1], rep[1]]]


@dataclass(frozen=True)
class ReliabilityRun:
    trajectory: Trajectory
    availability: np.ndarray
    repair_fraction: np.ndarray
    transitions: np.ndarray

    def to_dict(self):
        return {"availability": self.availability, "repair_fraction": self.repair_fraction,
                "transitions": self.transitions, "horizon": self.trajectory.horizon}

    def to_json(self):
        return dumps_json(self.to_dict())


def simulate_reliability(rules, initial: ReliabilityState, horizon, rng, majorants=None) -> ReliabilityRun:
    """One trajectory of the two-element model with per-element availability.

    ``rules`` is ``{"failure": [l1, l2], "repair": [m1, m2]}``; element ``k``
    fails at rate ``l_k(state)`` while operational and is repaired at rate
    ``m_k(state)`` while under repair.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    eng = _engine(_reliability_table(rules), majorants)
    out = eng.run([initial.elapsed], [initial.modes], horizon, rng, record=True, occupancy=True)
    occ = out["occ"][0]
    up = occ[:, 0] / horizon
    return ReliabilityRun(_trajectory(out["log"], initial.elapsed, initial.modes, horizon, eng.n_modes),
                          up, 1.0 - up, out["counts"][0])


def reliability_batch(rules, initial: ReliabilityState, times, n, seed=0, workers=None, majorants=None,
                      tag="reliability"):
    """States of ``n`` independent replications at each of ``times``: ``(modes, elapsed)``,
    each shaped ``(len(times), n, 2)``."""
    eng = _engine(_reliability_table(rules), majorants)
    times = np.asarray(times, dtype=float)
    horizon = float(times.max())

    def work(rng, size):
        out = eng.run(np.tile(initial.elapsed, (size, 1)), np.tile(initial.modes, (size, 1)),
                      horizon, rng, probes=times)
        return out["snap_m"], out["snap_x"]

    parts = map_chunks(work, n, seed, tag, workers)
    return np.concatenate([p[0] for p in parts], axis=1), np.concatenate([p[1] for p in parts], axis=1)


def envelope_audit(trajectory: Trajectory, envelope, rules, points_per_interval=16, clocks=None):
    """Rates along the trajectory that leave ``[phi(elapsed), Q(elapsed)]``.

    ``envelope`` is one :class:`Envelope` for every (clock, mode) or a dict
    keyed by ``(clock, mode)``; ``rules`` is the rule table or the reliability
    rule dict. Rates are checked at every recorded transition and on
    ``points_per_interval`` points inside each inter-transition interval.
    Returns ``(time, clock, rate, phi, Q)`` tuples; empty means pass.
    """
    table = _reliability_table(rules) if isinstance(rules, dict) else rules
    K = len(table)
    clocks = range(K) if clocks is None else clocks
    edges = np.concatenate([[0.0], trajectory.times, [trajectory.horizon]])
    frac = np.linspace(0.0, 1.0, points_per_interval, endpoint=False)
    grid = np.unique((edges[:-1, None] + np.diff(edges)[:, None] * frac[None, :]).ravel())
    Mo, X = trajectory.state_at(grid)
    violations = []
    for k in clocks:
        for mode in range(len(table[k])):
            env = envelope.get((k, mode)) if isinstance(envelope, dict) else envelope
            if env is None:
                continue
            sel = Mo[:, k] == mode
            if not sel.any():
                continue
            rate = table[k][mode](X[sel], Mo[sel], k)
            s = X[sel, k]
            lo = env.phi.continuous.hazard(s)
            hi = env.Q.continuous.hazard(s)
            bad = (rate < lo * (1 - 1e-12) - 1e-12) | (rate > hi * (1 + 1e-12) + 1e-12)
            for g, r, a, b in zip(grid[sel][bad], rate[bad], lo[bad], hi[bad]):
                violations.append((float(g), int(k), float(r), float(a), float(b)))
    violations.sort()
    return violations


def _state_histograms(modes, elapsed, edges):
    """Joint histogram over the 4 mode pairs x binned elapsed pairs (flattened), plus sample count."""
    n = modes.shape[0]
    nb = edges.size - 1
    b = np.clip(np.searchsorted(edges, elapsed, side="right") - 1, 0, nb - 1)
    cell = ((modes[:, 0] * 2 + modes[:, 1]) * nb + b[:, 0]) * nb + b[:, 1]
    return np.bincount(cell, minlength=4 * nb * nb) / n


@dataclass(frozen=True)
class ErgodicityTable:
    rows: list
    K_hat: float
    rate_order: int
    mode_only_rows: list = field(default_factory=list)

    COLUMNS = ("t", "tv_hat", "sigma", "bias_bound", "tv_modes", "bound", "flag")

    @property
    def flagged(self):
        return [r["t"] for r in self.rows if r["flag"]]

    def to_dict(self):
        return {"K_hat": self.K_hat, "rate_order": self.rate_order, "rows": self.rows}

    def to_json(self):
        return dumps_json(self.to_dict())

    def to_csv(self):
        return rows_to_csv(list(self.COLUMNS), self.rows)


def _embedded_bound(rules, init1, init2, envelope, cfg, runs, seed, workers):
    """``K_hat`` from coupling each element's alternating operational/repair renewal sequence.

    Only available when every rule depends on its own clock alone; the pair
    coalesces when both elements have coalesced, so ``tau = max(tau_1, tau_2)``.
    """
    from .coupling import CouplingConfig, coupling_runs, rate_constant

    table = _reliability_table(rules)
    specs = [[rule.as_spec() if hasattr(rule, "as_spec") else None for rule in row] for row in table]
    if any(sp is None for row in specs for sp in row):
        return math.nan
    cfg = cfg or CouplingConfig(rate_order=2)
    taus = []
    for k in range(2):
        env = envelope.get((k, 0)) if isinstance(envelope, dict) else envelope
        policy = AlternatingPolicy(tuple(specs[k]), envelope=env)
        res = coupling_runs(policy, (init1.modes[k], init1.elapsed[k]), (init2.modes[k], init2.elapsed[k]),
                            cfg, runs, seed, workers, tag=f"embedded-{k}")
        taus.append(res.tau_samples)
    tau = np.maximum(taus[0], taus[1])
    return rate_constant(tau, cfg.rate_order).K_hat


def reliability_ergodicity_experiment(rules, init1: ReliabilityState, init2: ReliabilityState, times, n,
                                      envelope=None, seed=0, workers=None, bins=50, clock_max=None,
                                      cfg=None, runs=10_000, majorants=None) -> ErgodicityTable:
    """Empirical TV between the state laws from two initial states, against ``K_hat / t^(k-1)``.

    Modes are matched exactly; elapsed times are binned into ``bins`` cells per
    element on ``[0, clock_max]`` (default: the largest time), the last cell
    absorbing overflow. ``sigma = 1/sqrt(n)`` bounds the estimator's standard
    deviation.
    """
    times = np.asarray(times, dtype=float)
    m1, x1 = reliability_batch(rules, init1, times, n, seed, workers, majorants, tag="ergodic-1")
    m2, x2 = reliability_batch(rules, init2, times, n, seed, workers, majorants, tag="ergodic-2")
    K_hat = math.nan
    order = 2 if cfg is None else cfg.rate_order
    if envelope is not None:
        K_hat = _embedded_bound(rules, init1, init2, envelope, cfg, runs, seed, workers)
    top = float(times.max()) if clock_max is None else float(clock_max)
    edges = np.linspace(0.0, top, bins + 1)
    sigma = 1.0 / math.sqrt(n)
    rows = []
    for j, t in enumerate(times):
        p = _state_histograms(m1[j], x1[j], edges)
        q = _state_histograms(m2[j], x2[j], edges)
        tv = 0.5 * float(np.abs(p - q).sum())
        pm = np.bincount(m1[j][:, 0] * 2 + m1[j][:, 1], minlength=4) / n
        qm = np.bincount(m2[j][:, 0] * 2 + m2[j][:, 1], minlength=4) / n
        bound = K_hat / t ** (order - 1) if math.isfinite(K_hat) and t > 0 else math.nan
        rows.append({
            "t": float(t), "tv_hat": tv, "sigma": sigma,
            "bias_bound": 0.5 * float(np.sum(np.sqrt((p + q) / n))),
            "tv_modes": 0.5 * float(np.abs(pm - qm).sum()), "bound": bound,
            "flag": bool(math.isfinite(bound) and tv - 3 * sigma > bound),
        })
    return ErgodicityTable(rows, float(K_hat), int(order))


# ---------------------------------------------------------------------------
# generalized MMPP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MmppState:
    """``n`` flows; flow ``k`` fires at rate ``rules[k](z)`` where ``z`` are the times since each flow's last event."""

    rules: tuple
    elapsed: tuple | None = None
    majorants: tuple | None = None

    @property
    def n(self):
        return len(self.rules)


@dataclass(frozen=True)
class MmppReport:
    event_times: list
    counts: np.ndarray
    mean_inter_event: np.ndarray
    mean_waiting: np.ndarray
    waiting_halfwidth: np.ndarray
    bounds: np.ndarray
    flags: np.ndarray
    horizon: float

    @property
    def flagged(self):
        return [k for k, f in enumerate(self.flags) if f]

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "flows": [
                {"flow": k, "count": int(self.counts[k]), "mean_inter_event": self.mean_inter_event[k],
                 "mean_waiting": self.mean_waiting[k], "halfwidth": self.waiting_halfwidth[k],
                 "bound": self.bounds[k], "flag": bool(self.flags[k])}
                for k in range(len(self.counts))
            ],
        }

    def to_json(self):
        return dumps_json(self.to_dict())

    def to_csv(self):
        return rows_to_csv(["flow", "count", "mean_inter_event", "mean_waiting", "halfwidth", "bound", "flag"],
                           self.to_dict()["flows"])

    def events_csv(self):
        rows = [{"flow": k, "time": t} for k, ev in enumerate(self.event_times) for t in ev]
        return rows_to_csv(["flow", "time"], rows)


def _batch_means(x, batches=20):
    x = np.asarray(x, dtype=float)
    if x.size < 2 * batches:
        return float(x.mean()) if x.size else math.nan, math.inf
    m = x[: x.size // batches * batches].reshape(batches, -1).mean(axis=1)
    return float(x.mean()), 3.0 * float(m.std(ddof=1)) / math.sqrt(batches)


def simulate_mmpp(state: MmppState, horizon, rng, envelopes=None, probe_step=1.0, burn_in=None) -> MmppReport:
    """Joint simulation of all flows with per-flow waiting-time statistics and Lorden checks.

    The forward waiting time ``W_k(t)`` (time to the next flow-``k`` event) is
    sampled on a probe grid after ``burn_in``; its 3-sigma half-width comes
    from batch means. A flow is flagged when ``mean - halfwidth > bound``,
    with the bound from that flow's envelope (``None`` = unchecked).
    """
    from .lorden import generalized_bound

    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n = state.n
    table = [[rule] for rule in state.rules]
    overrides = None if state.majorants is None else [[m] for m in state.majorants]
    eng = _engine(table, overrides)
    x0 = np.zeros(n) if state.elapsed is None else np.asarray(state.elapsed, dtype=float)
    out = eng.run(x0[None, :], np.zeros((1, n), dtype=np.int64), horizon, rng, record=True)
    log = out["log"]
    events = [np.array([e[0] for e in log if e[1] == k]) for k in range(n)]
    counts = np.array([ev.size for ev in events])
    burn = 0.1 * horizon if burn_in is None else burn_in
    probes = np.arange(burn, horizon, probe_step)
    mean_ie, mean_w, half, bounds, flags = (np.full(n, np.nan) for _ in range(5))
    flags = np.zeros(n, dtype=bool)
    for k, ev in enumerate(events):
        if ev.size > 1:
            mean_ie[k] = float(np.diff(ev).mean())
        idx = np.searchsorted(ev, probes, side="right")
        ok = idx < ev.size
        if ok.any():
            mean_w[k], half[k] = _batch_means(ev[idx[ok]] - probes[ok])
        env = None if envelopes is None else envelopes[k]
        if env is not None:
            rep = generalized_bound(env)
            bounds[k] = rep.generalized_bound if not rep.diverged else math.inf
            flags[k] = bool(mean_w[k] - half[k] > bounds[k])
    return MmppReport(events, counts, mean_ie, mean_w, half, bounds, flags, float(horizon))
