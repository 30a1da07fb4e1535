import math

import numpy as np
import pytest

from weakchaos.deviations import fit_exponent
from weakchaos.dynamics1d import MapSystem, orbit
from weakchaos.exceptions import DomainError
from weakchaos.inducing import (
    Overflow,
    ReferenceSet,
    ReturnRecord,
    first_return_time,
    gmy_diagnostics,
    induced_orbit,
    kac_check,
    return_tail,
    return_times_many,
)

J = ReferenceSet(0.5, 1.0)
PM = MapSystem.intermittent(0.5)


def brute_return(x, gamma, a=0.5, b=1.0, cap=10**6):
    """Independent iteration of the intermittent map with plain floats."""
    for k in range(1, cap + 1):
        x = x + 2**gamma * x ** (1 + gamma) if x <= 0.5 else 2 * x - 1
        if a <= x <= b:
            return k, x
    return None, x


def test_reference_set_validation():
    with pytest.raises(ValueError):
        ReferenceSet(0.6, 0.5)
    with pytest.raises(ValueError):
        ReferenceSet(-0.1, 0.5)
    assert J.length == 0.5


def test_return_from_three_quarters():
    rec = first_return_time(PM, J, 0.75)
    assert rec == ReturnRecord(0.75, 1, 0.5)


def test_fixed_point_returns_at_once():
    assert first_return_time(PM, J, 1.0).return_time == 1
    assert first_return_time(MapSystem.doubling(), ReferenceSet(0.0, 0.25), 0.0).return_time == 1


@pytest.mark.parametrize("x", [0.6, 0.55, 0.51, 0.5001, 0.93])
def test_return_time_matches_brute_force(x):
    R, image = brute_return(x, 0.5)
    rec = first_return_time(PM, J, x)
    assert rec.return_time == R
    assert rec.image == pytest.approx(image, abs=1e-12)


def test_return_from_point_six_by_hand():
    # 0.6 -> 0.2 -> 0.32649... -> 0.59032... in J
    assert first_return_time(PM, J, 0.6).return_time == 3


def test_outside_reference_set():
    with pytest.raises(DomainError):
        first_return_time(PM, J, 0.3)


def test_overflow_is_reported():
    out = first_return_time(MapSystem.doubling(), J, 0.5, cap=50)
    assert out == Overflow(0.5, 50)


def test_induced_orbit_doubling_censoring_path():
    recs = induced_orbit(MapSystem.doubling(), J, 0.75, 2, cap=100)
    assert recs[0] == ReturnRecord(0.75, 1, 0.5)
    assert recs[1] == Overflow(0.5, 100)


def test_induced_orbit_chaining_and_additivity():
    recs = induced_orbit(PM, J, 0.61, 25)
    assert len(recs) == 25
    for prev, nxt in zip(recs, recs[1:]):
        assert nxt.x == prev.image
        assert first_return_time(PM, J, prev.x).return_time == prev.return_time
    total = sum(r.return_time for r in recs)
    pts = orbit(PM, 0.61, total).points
    visits = np.flatnonzero((pts[1:] >= 0.5) & (pts[1:] <= 1.0)) + 1
    assert visits[24] == total


def test_return_tail_starts_at_one():
    tail = return_tail(PM, J, 2000, [0, 1, 2, 5], random_state=0)
    assert tail.values[0] == 1.0
    assert np.all(np.diff(tail.values) <= 0)


def test_return_tail_doubling_is_dyadic():
    N = np.arange(1, 13)
    tail = return_tail(MapSystem.doubling(), J, 2 * 10**5, N, random_state=1)
    exact = 2.0 ** -N
    assert np.all(np.abs(tail.values - exact) <= 2 * tail.ci_halfwidths + 1e-12)
    slope = np.polyfit(N, np.log2(tail.values), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_return_tail_intermittent_slope():
    grid = np.unique(np.geomspace(10, 1000, 15).astype(int))
    tail = return_tail(PM, J, 2 * 10**5, grid, random_state=2)
    assert np.all(np.diff(tail.values) <= 0)
    assert tail.censored_fraction == tail.values[-1]
    assert -2.4 <= fit_exponent(tail).slope <= -1.6


def test_return_tail_validation():
    with pytest.raises(ValueError):
        return_tail(PM, J, 100, [1, 2])
    with pytest.raises(ValueError):
        return_tail(PM, J, 1000, [5, 3])
    with pytest.raises(ValueError):
        return_tail(PM, J, 1000, [5, 30], cap=10)


def test_return_tail_worker_invariance():
    a = return_tail(PM, J, 6000, [1, 10, 100], random_state=9, workers=1)
    b = return_tail(PM, J, 6000, [1, 10, 100], random_state=9, workers=2)
    np.testing.assert_array_equal(a.counts, b.counts)


def test_return_times_many_images_in_J():
    rng = np.random.default_rng(4)
    R, img = return_times_many(PM, J, J.uniform(500, rng), 10**6, rng, images=True)
    assert np.all(R >= 1) and np.all(J.contains(img))


def test_kac_doubling():
    mean_R, mu_J = kac_check(MapSystem.doubling(), J, 10**5, random_state=3)
    assert 0.9 <= mean_R * mu_J <= 1.1


def test_gmy_doubling():
    d = gmy_diagnostics(MapSystem.doubling(), J, 500, random_state=0)
    assert 0 < d.rho_hat <= 0.5
    assert d.distortion_hat == 0.0
    assert d.branch_count_sampled >= 3


def test_gmy_intermittent():
    d = gmy_diagnostics(PM, J, 500, random_state=0)
    assert 0 < d.rho_hat < 1
    assert d.distortion_hat >= 0
    assert d.pairs_used > 0.9 * d.samples_used
    # derivative on the right branch alone is 2, so 1/|DF| <= 1/2
    assert d.rho_hat <= 0.5 + 1e-12
    assert math.isfinite(d.distortion_hat)
