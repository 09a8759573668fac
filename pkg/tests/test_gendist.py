import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from lordenkit.gendist import (
    DistributionView,
    HazardSpec,
    ImproperDistributionError,
    Zero,
    as_view,
    atoms_only,
    common_part_kappa,
    cumulative_hazard,
    delayed,
    evaluate,
    exponential,
    min_compose,
    moment,
    pareto,
    sample,
    spec_from_dict,
    stochastic_order_check,
    tabulated,
    uniform,
    weibull,
)

from conftest import ks_to_cdf, ks_two_sample

rates = st.floats(0.05, 20)
shapes = st.floats(0.3, 5)
times = st.floats(0, 50)


def atom_lists(max_atoms=3):
    return st.lists(st.tuples(st.floats(0, 10), st.floats(0.01, 0.99)), max_size=max_atoms,
                    unique_by=lambda a: round(a[0], 6)).map(lambda xs: tuple(sorted(xs)))


def specs():
    cont = st.one_of(
        rates.map(exponential),
        st.tuples(shapes, rates).map(lambda p: weibull(*p)),
        st.floats(0.5, 10).map(uniform),
        st.floats(0.5, 6).map(pareto),
    )
    return st.tuples(cont, atom_lists()).map(lambda p: HazardSpec(p[0].continuous, p[1]))


# --- cumulative hazard -------------------------------------------------------

def test_cumulative_hazard_examples():
    assert cumulative_hazard(exponential(2.0), 1.0) == pytest.approx(2.0)
    assert cumulative_hazard(atoms_only([(1.0, 0.3)]), 1.0) == pytest.approx(-math.log(0.7), abs=1e-12)
    assert cumulative_hazard(weibull(2, 1), 0.0) == 0.0
    assert cumulative_hazard(atoms_only([(1.0, 0.3)]), 0.999) == 0.0


def test_cumulative_hazard_rejects_negative_time():
    with pytest.raises(ValueError):
        cumulative_hazard(exponential(1.0), -0.1)


def test_grid_hazard_trapezoid():
    h = tabulated([0, 1, 2], [0, 2, 2])
    assert h.cumulative_hazard(1.0) == pytest.approx(1.0)
    assert h.cumulative_hazard(3.0) == pytest.approx(1.0 + 2.0 + 2.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        HazardSpec(Zero(), ((1.0, 1.0),))
    with pytest.raises(ValueError):
        HazardSpec(Zero(), ((2.0, 0.1), (1.0, 0.1)))
    with pytest.raises(ValueError):
        exponential(-1.0)
    with pytest.raises(ValueError):
        tabulated([0, 1], [1, -1])


# --- evaluation ----------------------------------------------------------------

def test_evaluate_examples():
    ev = evaluate(exponential(2.0), 1.0)
    assert ev.F == pytest.approx(1 - math.exp(-2))
    assert ev.S == pytest.approx(math.exp(-2))
    ev = evaluate(atoms_only([(1.0, 0.3)]), 1.0)
    assert ev.atom and ev.f == pytest.approx(0.3)
    assert evaluate(uniform(1.0), 0.5).F == pytest.approx(0.5)


@pytest.mark.parametrize("spec, ref", [
    (exponential(1.7), stats.expon(scale=1 / 1.7)),
    (weibull(2.5, 1.3), stats.weibull_min(2.5, scale=1.3)),
    (uniform(2.0), stats.uniform(0, 2.0)),
    (pareto(3.0), stats.lomax(3.0)),
])
def test_reconstruction_matches_textbook_cdf(spec, ref):
    grid = np.linspace(0, 10, 2001)
    assert np.max(np.abs(as_view(spec).cdf(grid) - ref.cdf(grid))) < 1e-9


def test_delayed_family():
    v = as_view(delayed(0.5, exponential(1.0)))
    assert v.cdf(0.49) == 0.0
    assert v.cdf(1.5) == pytest.approx(1 - math.exp(-1))


@settings(max_examples=60, deadline=None)
@given(specs(), times)
def test_survival_plus_cdf_is_one(spec, s):
    v = as_view(spec)
    assert v.sf(s) + v.cdf(s) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(specs())
def test_cdf_nondecreasing(spec):
    F = as_view(spec).cdf(np.linspace(0, 30, 3001))
    assert np.all(np.diff(F) >= -1e-15)


@settings(max_examples=25, deadline=None)
@given(specs())
def test_atom_mass_conservation(spec):
    from scipy import integrate

    v = as_view(spec)
    end = 60.0
    pts = sorted({p for p in spec.breakpoints() if p < end})
    cont = sum(integrate.quad(v.pdf, a, b, limit=200)[0] for a, b in zip([0.0] + pts, pts + [end]))
    total = cont + v.total_atom_mass + float(v.sf(end))
    assert total == pytest.approx(1.0, abs=1e-6)


# --- moments -------------------------------------------------------------------

def test_moment_examples():
    assert moment(exponential(1.0), 2).value == pytest.approx(2.0, abs=1e-8)
    assert moment(uniform(1.0), 1).value == pytest.approx(0.5, abs=1e-8)
    assert moment(weibull(2.0, 1.0), 1).value == pytest.approx(special.gamma(1.5), abs=1e-8)


def test_moment_divergence_marker():
    r = moment(pareto(2.0), 2)
    assert r.diverged and math.isinf(r.value)
    assert not moment(pareto(3.0), 2).diverged
    assert moment(pareto(3.0), 2).value == pytest.approx(1.0, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(shapes, st.floats(0.2, 5), st.integers(1, 3))
def test_weibull_moments_match_gamma(k, lam, order):
    expect = lam ** order * special.gamma(1 + order / k)
    assert moment(weibull(k, lam), order).value == pytest.approx(expect, rel=1e-6)


def test_moment_with_atom():
    spec = exponential(1.0, atoms=[(1.0, 0.5)])
    v = as_view(spec)
    xs = v.sample(np.random.default_rng(3), 200_000)
    assert v.mean == pytest.approx(xs.mean(), abs=0.01)


# --- sampling ------------------------------------------------------------------

def test_sample_exponential_closed_form():
    rng = np.random.default_rng(1)
    e = np.random.default_rng(1).standard_exponential(5)
    assert np.allclose(sample(exponential(4.0), rng, 5), e / 4.0)


def test_sample_mean_exp1(rng):
    x = sample(exponential(1.0), rng, 100_000)
    assert 0.99 <= x.mean() <= 1.01


def test_sample_hits_atom_exactly(rng):
    spec = HazardSpec(delayed(1.0, exponential(1.0)).continuous, ((1.0, 0.3),))
    x = sample(spec, rng, 100_000)
    assert abs(np.mean(x == 1.0) - 0.3) <= 0.005


def test_sample_improper_raises(rng):
    with pytest.raises(ImproperDistributionError, match="improper distribution"):
        sample(atoms_only([(1.0, 0.3)]), rng, 1000)


def test_sample_grid_law(rng):
    spec = tabulated([0, 1, 2, 4], [0.5, 1.5, 0.2, 1.0])
    v = as_view(spec)
    assert ks_to_cdf(sample(spec, rng, 50_000), v.cdf) < 0.01


# --- min composition -----------------------------------------------------------

def test_min_compose_examples():
    assert min_compose(exponential(2.0), exponential(3.0)) == exponential(5.0)
    m = min_compose(atoms_only([(1.0, 0.5)]), atoms_only([(1.0, 0.5)]))
    assert m.atoms == ((1.0, 0.75),)
    m = min_compose(exponential(1.0), atoms_only([(2.0, 0.3)]))
    assert m.cumulative_hazard(3.0) == pytest.approx(3.0 - math.log(0.7))


@settings(max_examples=60, deadline=None)
@given(specs(), specs(), times)
def test_hazard_additivity(h1, h2, s):
    lhs = min_compose(h1, h2).cumulative_hazard(s)
    rhs = h1.cumulative_hazard(s) + h2.cumulative_hazard(s)
    if math.isinf(rhs):
        assert math.isinf(lhs)
    else:
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_min_compose_sampling_law(rng):
    h1, h2 = weibull(2.0, 1.0, atoms=[(0.3, 0.2)]), pareto(2.0)
    n = 100_000
    direct = np.minimum(sample(h1, rng, n), sample(h2, rng, n))
    composed = sample(min_compose(h1, h2), rng, n)
    assert ks_two_sample(direct, composed) <= 0.01


# --- common part ---------------------------------------------------------------

def test_common_part_examples():
    assert common_part_kappa(exponential(1.0), exponential(1.0)) == 1.0
    assert common_part_kappa(exponential(1.0), exponential(2.0)) == pytest.approx(0.75, abs=1e-8)
    assert common_part_kappa(uniform(1.0), delayed(2.0, uniform(1.0))) == 0.0


def test_common_part_with_shared_atoms():
    a = exponential(1.0, atoms=[(1.0, 0.5)])
    b = exponential(1.0, atoms=[(1.0, 0.25)])
    # identical continuous hazard: densities coincide before the atom, after it
    # the density of b dominates; atom masses are 0.5/e and 0.25/e
    m_a, m_b = 0.5 * math.exp(-1), 0.25 * math.exp(-1)
    expect = (1 - math.exp(-1)) + min(m_a, m_b) + 0.5 * math.exp(-1)
    assert common_part_kappa(a, b) == pytest.approx(expect, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(rates, rates)
def test_common_part_symmetric(a, b):
    k1 = common_part_kappa(exponential(a), exponential(b))
    k2 = common_part_kappa(exponential(b), exponential(a))
    assert k1 == pytest.approx(k2, abs=1e-8)
    assert 0 <= k1 <= 1
    if abs(a - b) > 1e-3:
        assert k1 < 1


# --- ordering ------------------------------------------------------------------

def test_stochastic_order_examples():
    grid = np.arange(0, 10.0001, 0.1)
    assert stochastic_order_check(exponential(2.0), exponential(1.5), exponential(1.0), grid)
    bad = stochastic_order_check(exponential(1.0), exponential(2.0), exponential(0.5), grid)
    assert not bad and bad.s == pytest.approx(0.1)
    e = exponential(1.0)
    assert stochastic_order_check(e, e, e, grid)


# --- serialization -------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(specs())
def test_spec_dict_round_trip(spec):
    assert spec_from_dict(spec.to_dict()) == spec
