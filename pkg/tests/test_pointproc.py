import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakchaos.billiards import build_stadium, sample_srb
from weakchaos.dynamics1d import MapSystem
from weakchaos.exceptions import InsufficientSamplesError, NotPeriodicError
from weakchaos.pointproc import (
    CountingSample,
    HoleSpec,
    dtv_laws,
    dtv_window_counts,
    escape_rate_estimate,
    estimate_hole_measure,
    exponential_law_check,
    extremal_index_formula,
    fano_factor,
    hitting_time,
    hitting_times,
    ks_halfwidth,
    l_alpha_s,
    point_process,
    point_processes,
    product_poisson_law,
    truncated_poisson_pmf,
    window_counts,
)

DOUBLING = MapSystem.doubling()
PM = MapSystem.intermittent(0.5)
TABLE = build_stadium(1.0)


def poisson_samples(size, T, seed):
    """Counting samples of a unit-rate Poisson process on [0, T]."""
    rng = np.random.default_rng(seed)
    out = []
    for n in rng.poisson(T, size):
        out.append(CountingSample(np.sort(rng.uniform(0, T, n)), T, 1e-3))
    return out


def test_hole_specs():
    hole = HoleSpec.billiard(TABLE, 1.0, 0.05)
    assert hole.measure == pytest.approx(0.1 / TABLE.perimeter)
    assert hole.relative_ci == 0
    assert HoleSpec.interval(DOUBLING, 0.3, 0.05).measure == pytest.approx(0.1)
    assert HoleSpec.interval(PM, 1.0, 0.01, measure=0.01).touches_boundary
    with pytest.raises(ValueError):
        HoleSpec(DOUBLING, 0.5, 0.1, 1.5)


def test_hitting_time_first_image():
    hole = HoleSpec.interval(DOUBLING, 0.3, 0.05)
    hs = hitting_time(hole, 0.15)
    assert hs.tau == 1 and hs.rescaled == pytest.approx(0.1) and not hs.censored


def test_hitting_time_whole_space():
    hole = HoleSpec(DOUBLING, 0.5, 2.0, 0.999)
    for x0 in (0.0, 0.123, 0.9):
        assert hitting_time(hole, x0).tau == 1


def test_hitting_time_censoring():
    hole = HoleSpec.interval(DOUBLING, 0.7, 0.01)
    hs = hitting_time(hole, 0.0, cap=20)
    assert hs.censored and hs.tau == 21


def test_hitting_time_billiard():
    x0 = sample_srb(TABLE, 0)
    hole = HoleSpec.billiard(TABLE, 3.0, 0.2)
    hs = hitting_time(hole, x0)
    samples = point_process(hole, x0, 1000 * hole.measure)
    assert hs.tau == samples.first_index()


@settings(max_examples=40, deadline=None)
@given(x0=st.floats(0.0, 1.0), z=st.floats(0.05, 0.95))
def test_hitting_time_matches_point_process(x0, z):
    hole = HoleSpec.interval(PM, z, 0.05, measure=0.1)
    hs = hitting_time(hole, x0, cap=2000)
    cs = point_process(hole, x0, 2000 * hole.measure)
    if hs.censored:
        assert cs.total == 0
    else:
        assert cs.first_index() == hs.tau


def test_point_process_empty_horizon():
    hole = HoleSpec.interval(DOUBLING, 0.3, 0.05)
    assert point_process(hole, 0.15, 0.0).total == 0


@settings(max_examples=40, deadline=None)
@given(x0=st.floats(0.0, 1.0), T=st.floats(0.5, 20.0))
def test_count_additivity(x0, T):
    hole = HoleSpec.interval(PM, 0.6, 0.05, measure=0.1)
    cs = point_process(hole, x0, T)
    assert cs.count(0, T) == cs.count(0, T / 2) + cs.count(T / 2, T)
    assert cs.count() == cs.total
    assert np.all(np.diff(cs.times) > 0) and np.all(cs.times <= T)


def test_mean_count_matches_horizon():
    hole = HoleSpec.interval(DOUBLING, 0.3, 0.01)
    samples = point_processes(hole, 4000, 5.0, random_state=1)
    totals = np.array([s.total for s in samples])
    assert abs(totals.mean() - 5.0) <= 3 * totals.std() / math.sqrt(len(totals))


def test_ks_on_exponential_draws():
    x = np.random.default_rng(2).exponential(size=5000)
    assert exponential_law_check(x) < 1.36 / math.sqrt(5000)
    assert ks_halfwidth(5000) == pytest.approx(1.358 / math.sqrt(5000), rel=1e-3)


def test_ks_on_constant_times():
    assert exponential_law_check(np.full(2000, 1e-3)) > 0.5
    assert exponential_law_check(np.full(2000, 5.0)) > 0.5


def test_ks_needs_samples():
    with pytest.raises(InsufficientSamplesError):
        exponential_law_check(np.ones(999))


def test_hitting_times_worker_invariance():
    hole = HoleSpec.billiard(TABLE, 4.0, 0.2)
    a = hitting_times(hole, 3000, random_state=3)
    b = hitting_times(hole, 3000, random_state=3, workers=2)
    np.testing.assert_array_equal(a.tau, b.tau)
    assert a.discarded == b.discarded


def test_truncated_pmf_sums_to_one():
    pmf = truncated_poisson_pmf(2.5, 5)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-14)
    assert product_poisson_law(2.5, 3, 5).sum() == pytest.approx(1.0, abs=1e-13)


def test_dtv_trivial_cases():
    p = product_poisson_law(1.0, 2, 4)
    assert dtv_laws(p, p) == 0.0
    a, b = np.zeros(4), np.zeros(4)
    a[0], b[3] = 1.0, 1.0
    assert dtv_laws(a, b) == 1.0
    with pytest.raises(ValueError):
        dtv_laws(np.ones(2), np.ones(3))


def test_dtv_between_poisson_laws():
    # direct summation of 0.5 * sum_k |p_1(k) - p_1.1(k)|
    exact = 0.5 * sum(abs(math.exp(-1.0) / math.factorial(k) - math.exp(-1.1) * 1.1**k / math.factorial(k))
                      for k in range(80))
    got = dtv_laws(truncated_poisson_pmf(1.0, 80), truncated_poisson_pmf(1.1, 80))
    assert got == pytest.approx(exact, abs=1e-14)


def test_window_counts_by_hand():
    s = CountingSample(np.array([0.5, 1.0, 2.5, 4.0]), 4.0, 0.5)
    assert window_counts([s], 2).tolist() == [[2, 2]]
    assert window_counts([s], 4).tolist() == [[2, 0, 1, 1]]


def test_dtv_on_poisson_process():
    samples = poisson_samples(10**4, 5.0, 4)
    cmp_ = dtv_window_counts(samples, 2, 5)
    assert 0 <= cmp_.d_tv < 0.03
    assert cmp_.empirical.sum() == pytest.approx(1.0)
    assert fano_factor(samples) == pytest.approx(1.0, abs=0.05)
    auto = dtv_window_counts(samples, 1, None)
    assert auto.k_max == max(s.total for s in samples) + 1


def test_dtv_detects_clustering():
    rng = np.random.default_rng(5)
    samples = []
    for n in rng.poisson(2.5, 5000):  # pairs of events: Fano factor near 2
        t = np.sort(np.repeat(rng.uniform(0, 5, n), 2))
        samples.append(CountingSample(t, 5.0, 1e-3))
    assert fano_factor(samples) > 1.7
    assert dtv_window_counts(samples, 2, 5).d_tv > 0.2


def test_escape_rate_inverts_definition():
    for mu, alpha, s in [(0.01, 1.0, 1.0), (0.003, 0.8, 2.0), (0.2, 0.6, 0.5)]:
        surv = math.exp(-s * mu ** (1 - alpha))
        assert escape_rate_estimate(surv, mu, alpha, s) == pytest.approx(1.0, abs=1e-12)


def test_l_alpha_s_validation_and_flags():
    with pytest.raises(ValueError):
        l_alpha_s(DOUBLING, 0.0, 1.5, 1.0, [0.1])
    with pytest.raises(ValueError):
        l_alpha_s(DOUBLING, 0.0, 1.0, -1.0, [0.1])
    est = l_alpha_s(DOUBLING, 0.0, 1.0, 1.0, [0.1], ensemble=1, random_state=0)
    assert not est[0].usable and math.isnan(est[0].estimate)
    assert est[0].boundary


def test_l_alpha_s_doubling_fixed_point():
    est = l_alpha_s(DOUBLING, 0.0, 1.0, 1.0, [0.01, 0.005], ensemble=2 * 10**4, random_state=6)
    assert est[-1].usable and abs(est[-1].estimate - 0.5) < 0.1
    lo, hi = est[-1].ci
    assert lo < est[-1].estimate < hi


def test_extremal_index_formula():
    assert extremal_index_formula(DOUBLING, 0.0, 1) == 0.5
    assert extremal_index_formula(DOUBLING, 1 / 3, 2) == pytest.approx(0.75)
    assert extremal_index_formula(DOUBLING, 1 / 7, 3) == pytest.approx(0.875)
    assert extremal_index_formula(PM, 1.0, 1) == 0.5
    # the neutral fixed point has no extremal index deficit
    assert extremal_index_formula(PM, 0.0, 1) == 0.0
    with pytest.raises(NotPeriodicError):
        extremal_index_formula(DOUBLING, 0.3, 1)


def test_hole_measure_estimate():
    assert estimate_hole_measure(DOUBLING, 0.0, 0.1) == (0.1, 0.0)
    from weakchaos.transfer import build_ulam

    op = build_ulam(PM, 2**12, method="exact")
    exact = op.integral(op.discretize(lambda x: (np.abs(x - 0.7) <= 0.05).astype(float)))
    mean, ci = estimate_hole_measure(PM, 0.7, 0.05, n_steps=2 * 10**6, orbits=2000, random_state=7)
    assert abs(mean - exact) <= max(3 * ci, 0.002)
    assert ci / mean < 0.05
