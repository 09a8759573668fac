import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lordenkit.gendist import HazardSpec, delayed, exponential, pareto
from lordenkit.lorden import verify_bounds_mc
from lordenkit.models import (
    ConstantRate,
    CustomRate,
    IndicatorRate,
    MmppState,
    ParetoRate,
    ReliabilityState,
    envelope_audit,
    reliability_batch,
    reliability_ergodicity_experiment,
    rule_from_dict,
    simulate_mmpp,
    simulate_reliability,
)
from lordenkit.renewal import Envelope, IIDPolicy
from lordenkit.streams import stream

CONST = {"failure": [ConstantRate(1.0)] * 2, "repair": [ConstantRate(1.0)] * 2}
PARETO = {"failure": [ParetoRate(3.0)] * 2, "repair": [ParetoRate(3.0)] * 2}


def test_constant_rate_availability():
    run = simulate_reliability(CONST, ReliabilityState(), 1e4, stream(1, "avail"))
    assert np.all((run.availability >= 0.49) & (run.availability <= 0.51))
    assert np.array_equal(run.availability + run.repair_fraction, np.ones(2))


def test_fast_repair_regime():
    rules = {"failure": [ConstantRate(0.01)] * 2, "repair": [ConstantRate(100.0)] * 2}
    run = simulate_reliability(rules, ReliabilityState(), 1e4, stream(2))
    assert np.all(run.availability >= 0.999)


def test_pareto_run_alternates():
    avail = []
    for seed in range(3):
        run = simulate_reliability(PARETO, ReliabilityState(), 1e4, stream(seed, "pareto"))
        tr = run.trajectory
        assert np.all((run.availability > 0) & (run.availability < 1))
        for k in range(2):
            fm = tr.from_modes[tr.clocks == k]
            assert fm[0] == 0 and np.all(fm[1:] != fm[:-1])
        avail.append(run.availability)
    avail = np.array(avail)
    assert np.ptp(avail, axis=0).max() <= 0.02


def test_trajectory_well_formed():
    tr = simulate_reliability(PARETO, ReliabilityState((0, 1), (0.3, 0.0)), 200.0, stream(3)).trajectory
    assert np.all(np.diff(tr.times) > 0)
    # own clock resets at its event; others keep advancing by the same amount
    for i in range(1, tr.times.size):
        dt = tr.times[i] - tr.times[i - 1]
        k_prev = tr.clocks[i - 1]
        other = 1 - k_prev
        assert tr.states[i][k_prev] == pytest.approx(dt)
        assert tr.states[i][other] - tr.states[i - 1][other] == pytest.approx(dt)
    m, x = tr.state_at(tr.times[0] - 1e-9)
    assert m.tolist() == [0, 1] and x[0] == pytest.approx(0.3 + tr.times[0] - 1e-9)


def test_seed_determinism():
    a = simulate_reliability(PARETO, ReliabilityState(), 100.0, stream(7))
    b = simulate_reliability(PARETO, ReliabilityState(), 100.0, stream(7))
    assert np.array_equal(a.trajectory.times, b.trajectory.times)
    m1, x1 = reliability_batch(PARETO, ReliabilityState(), [5.0, 10.0], 5000, seed=1, workers=1)
    m2, x2 = reliability_batch(PARETO, ReliabilityState(), [5.0, 10.0], 5000, seed=1, workers=3)
    assert np.array_equal(m1, m2) and np.array_equal(x1, x2)


def test_batch_matches_markov_oracle():
    # two-state chain with rates 1/1 started up: P(up at t) = 0.5 + 0.5 exp(-2t)
    m, _ = reliability_batch(CONST, ReliabilityState(), [0.5, 2.0], 40_000, seed=2)
    for j, t in enumerate((0.5, 2.0)):
        p = 0.5 + 0.5 * math.exp(-2 * t)
        assert np.mean(m[j, :, 0] == 0) == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / 40_000))


def test_invalid_rates_raise():
    neg = {"failure": [CustomRate(lambda x, m, k: -np.ones(len(x)), 1.0)] * 2, "repair": [ConstantRate(1.0)] * 2}
    with pytest.raises(ValueError, match="invalid rate"):
        simulate_reliability(neg, ReliabilityState(), 10.0, stream(1))
    big = {"failure": [CustomRate(lambda x, m, k: np.full(len(x), 5.0), 1.0)] * 2, "repair": [ConstantRate(1.0)] * 2}
    with pytest.raises(ValueError, match="majorant too small"):
        simulate_reliability(big, ReliabilityState(), 10.0, stream(1))


def test_rule_from_dict():
    assert rule_from_dict({"family": "constant", "rate": 2}) == ConstantRate(2.0)
    assert rule_from_dict({"family": "pareto", "C": 3}) == ParetoRate(3.0)
    r = rule_from_dict({"family": "indicator", "base": 1, "amp": 0.5, "partner": 1, "window": 1})
    assert r.majorant == 1.5
    with pytest.raises(ValueError):
        rule_from_dict({"family": "nope"})


# --- envelope audit ------------------------------------------------------------

def test_audit_constant_passes():
    tr = simulate_reliability(CONST, ReliabilityState(), 100.0, stream(4)).trajectory
    assert envelope_audit(tr, Envelope(exponential(0.5), exponential(2.0)), CONST) == []


def test_audit_spike_detected():
    spike = CustomRate(lambda x, m, k: np.where((x[:, k] > 0.5) & (x[:, k] < 0.6), 10.0, 1.0), 10.0)
    rules = {"failure": [spike, ConstantRate(1.0)], "repair": [ConstantRate(1.0)] * 2}
    tr = simulate_reliability(rules, ReliabilityState(), 200.0, stream(5)).trajectory
    bad = envelope_audit(tr, Envelope(exponential(0.5), exponential(2.0)), rules)
    assert bad and all(v[1] == 0 and v[2] == 10.0 for v in bad)


def test_audit_pareto_passes():
    tr = simulate_reliability(PARETO, ReliabilityState(), 500.0, stream(6)).trajectory
    env = Envelope(pareto(3.0), exponential(3.0))
    assert envelope_audit(tr, env, PARETO) == []


def test_envelope_soundness_embedded():
    # rules pass the audit, so the embedded renewal sequences respect the generalized bound
    env = Envelope(pareto(3.0), exponential(3.0))
    tab = verify_bounds_mc(IIDPolicy(pareto(3.0)), env, [5.0, 20.0], 20_000, seed=3)
    assert tab.flagged == []


# --- ergodicity ----------------------------------------------------------------

def test_same_start_tv_is_noise():
    init = ReliabilityState()
    tab = reliability_ergodicity_experiment(PARETO, init, init, [10.0, 50.0], 20_000, seed=1)
    for r in tab.rows:
        assert r["tv_hat"] <= 3 * r["sigma"] + r["bias_bound"]


def test_constant_rate_tv_under_polynomial_curve():
    env = Envelope(exponential(1.0), exponential(1.0))
    from lordenkit.coupling import CouplingConfig

    tab = reliability_ergodicity_experiment(CONST, ReliabilityState(), ReliabilityState((1, 1), (0.0, 0.0)),
                                            [1.0, 3.0, 6.0], 20_000, envelope=env, seed=2,
                                            cfg=CouplingConfig(rate_order=3), runs=2000, clock_max=10.0)
    assert math.isfinite(tab.K_hat)
    assert tab.flagged == []
    tv = [r["tv_modes"] for r in tab.rows]
    assert tv[0] > tv[1]


# --- MMPP ----------------------------------------------------------------------

def test_single_flow_is_poisson():
    rep = simulate_mmpp(MmppState((ConstantRate(2.0),)), 1e4, stream(5))
    assert abs(rep.counts[0] - 2e4) <= 0.01 * 2e4
    assert rep.mean_waiting[0] == pytest.approx(0.5, abs=0.03)


def _two_flow(swap=False):
    r1 = IndicatorRate(1.0, 0.5, partner=1, window=1.0)
    r2 = ConstantRate(1.0)
    env = Envelope(exponential(1.0), exponential(1.5))
    if swap:
        r1 = IndicatorRate(1.0, 0.5, partner=0, window=1.0)
        return MmppState((r2, r1)), [None, env]
    return MmppState((r1, r2)), [env, None]


def test_two_flow_bound():
    state, envs = _two_flow()
    rep = simulate_mmpp(state, 1e4, stream(6), envs)
    assert rep.bounds[0] == pytest.approx(1 + 2 / (2 / 1.5))
    assert rep.flagged == []


def test_two_flow_symmetry():
    a = simulate_mmpp(_two_flow()[0], 1e4, stream(7))
    b = simulate_mmpp(_two_flow(swap=True)[0], 1e4, stream(8))
    for k in range(2):
        ha, hb = a.waiting_halfwidth[k], b.waiting_halfwidth[1 - k]
        assert abs(a.mean_waiting[k] - b.mean_waiting[1 - k]) <= math.hypot(ha, hb)
    assert abs(a.counts[0] - b.counts[1]) <= 3 * math.sqrt(2 * a.counts[0])


def test_mmpp_reports():
    rep = simulate_mmpp(MmppState((ConstantRate(1.0),)), 50.0, stream(1))
    assert rep.to_csv().splitlines()[0].startswith("flow,count")
    assert rep.events_csv().splitlines()[0] == "flow,time"
