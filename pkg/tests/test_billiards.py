import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from weakchaos.billiards import (
    ARC1,
    ARC2,
    FLAT1,
    FLAT2,
    CollisionStep,
    PhasePoint,
    Wavefront,
    billiard_step,
    billiard_step_many,
    build_stadium,
    derivative_matrix,
    expansion_factor,
    in_reference_X,
    in_stable_cone,
    in_unstable_cone,
    in_X_many,
    orbit_rows,
    previous_component,
    propagate_curvature,
    return_times_X,
    riemannian_norm,
    sample_srb,
    sample_srb_many,
    sample_X_many,
)
from weakchaos.deviations import fit_exponent
from weakchaos.curves import TailCurve
from weakchaos.exceptions import GrazingCollision

TABLE = build_stadium(1.0)
PI = math.pi


def test_geometry():
    assert TABLE.perimeter == pytest.approx(2 * PI + 4)
    assert TABLE.area == pytest.approx(PI + 4)
    bp = TABLE.breakpoints
    np.testing.assert_allclose(np.diff(bp), [PI, 2, PI, 2])
    assert bp[0] == 0 and bp[-1] == TABLE.perimeter
    assert TABLE.component(np.array([0.0, PI, PI + 2, 2 * PI + 2, 2 * PI + 3.99])).tolist() == [
        ARC1, FLAT1, ARC2, FLAT2, FLAT2]


@pytest.mark.parametrize("l", [0.0, -1.0, float("nan")])
def test_invalid_table(l):
    with pytest.raises(ValueError):
        build_stadium(l)


def test_frame_is_on_the_boundary():
    q = np.linspace(0, TABLE.perimeter, 1000, endpoint=False)
    (px, py), (tx, ty), (nx, ny) = TABLE.frame(q)
    on_arc = np.isin(TABLE.component(q), (ARC1, ARC2))
    cx = np.where(px > 0, 1.0, -1.0)
    np.testing.assert_allclose(np.hypot(px[on_arc] - cx[on_arc], py[on_arc]), 1.0, atol=1e-14)
    np.testing.assert_allclose(np.abs(py[~on_arc]), 1.0)
    np.testing.assert_allclose(tx * nx + ty * ny, 0.0, atol=1e-14)
    # inward normals point towards the x axis
    assert np.all(py * ny <= 1e-14)


def test_flat_midpoint_bounce():
    q0 = TABLE.breakpoints[FLAT2] + 1.0  # (0, -1)
    x1, step = billiard_step(TABLE, PhasePoint(q0, 0.0))
    assert step.tau == pytest.approx(2.0, abs=1e-12)
    assert x1.q == pytest.approx(TABLE.breakpoints[FLAT1] + 1.0, abs=1e-12)
    assert x1.phi == pytest.approx(0.0, abs=1e-12)
    assert (step.from_component, step.to_component) == (FLAT2, FLAT1)


def test_apex_diameter():
    x1, step = billiard_step(TABLE, PhasePoint(PI / 2, 0.0))
    assert step.tau == pytest.approx(4.0, abs=1e-12)
    assert x1.q == pytest.approx(TABLE.breakpoints[ARC2] + PI / 2, abs=1e-12)
    assert x1.phi == pytest.approx(0.0, abs=1e-12)
    assert step.tau <= TABLE.diameter + 1e-12


def test_grazing_start_is_rejected():
    with pytest.raises(GrazingCollision):
        billiard_step(TABLE, PhasePoint(1.0, PI / 2))


@settings(max_examples=200, deadline=None)
@given(q=st.floats(0, 2 * PI + 4, exclude_max=True), s=st.floats(-0.999, 0.999))
def test_reversibility_property(q, s):
    x = PhasePoint(q, math.asin(s))
    x1, step = billiard_step(TABLE, x)
    back, step_back = billiard_step(TABLE, PhasePoint(x1.q, -x1.phi))
    assert TABLE.distance(back.q, x.q) <= 1e-9
    assert abs(back.phi + x.phi) <= 1e-9
    assert step_back.tau == pytest.approx(step.tau, abs=1e-9)
    assert 0 < step.tau <= TABLE.diameter + 1e-9
    assert abs(x1.phi) <= PI / 2


def test_reversibility_on_samples():
    q, phi = sample_srb_many(TABLE, 10**4, 0)
    q1, p1, _, _, _, bad = billiard_step_many(TABLE, q, phi)
    q2, p2, _, _, _, bad2 = billiard_step_many(TABLE, q1, -p1)
    ok = ~(bad | bad2)
    assert ok.sum() > 9990
    assert np.max(TABLE.distance(q2[ok], q[ok])) < 1e-9
    assert np.max(np.abs(p2[ok] + phi[ok])) < 1e-9


def test_srb_marginals():
    q, phi = sample_srb_many(TABLE, 10**5, 1)
    assert stats.kstest(np.sin(phi), "uniform", args=(-1, 2)).statistic < 0.01
    assert stats.kstest(q, "uniform", args=(0, TABLE.perimeter)).statistic < 0.01
    assert np.all(np.abs(phi) < PI / 2)


def test_srb_hole_measure():
    q, _ = sample_srb_many(TABLE, 10**5, 2)
    for q0, r in [(1.0, 0.1), (TABLE.breakpoints[FLAT1] + 1.0, 0.2)]:
        p = np.mean(TABLE.distance(q, q0) <= r)
        exact = 2 * r / TABLE.perimeter
        assert abs(p - exact) <= 3 * math.sqrt(exact * (1 - exact) / 10**5)


def test_sample_srb_deterministic():
    assert sample_srb(TABLE, 5) == sample_srb(TABLE, 5)


def test_derivative_matrix_matches_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(50):
        q, phi = rng.random() * TABLE.perimeter, math.asin(1.8 * rng.random() - 0.9)
        x0 = PhasePoint(q, phi)
        x1, step = billiard_step(TABLE, x0)
        # stay away from breakpoints so the map is smooth around x0
        if np.min(np.abs(TABLE.breakpoints[:, None] - [q, x1.q])) < 1e-3:
            continue
        J = derivative_matrix(TABLE, x0, x1, step.tau)
        cols = []
        for dq, dphi in ((h, 0.0), (0.0, h)):
            plus, _ = billiard_step(TABLE, PhasePoint(q + dq, phi + dphi))
            minus, _ = billiard_step(TABLE, PhasePoint(q - dq, phi - dphi))
            dq_out = (plus.q - minus.q + TABLE.perimeter / 2) % TABLE.perimeter - TABLE.perimeter / 2
            cols.append([dq_out / (2 * h), (plus.phi - minus.phi) / (2 * h)])
        np.testing.assert_allclose(J, np.array(cols).T, rtol=1e-4, atol=1e-4)


def test_cone_membership():
    arc_q, flat_q = 1.0, TABLE.breakpoints[FLAT1] + 0.5
    assert in_unstable_cone(TABLE, arc_q, 1.0, -0.5)
    assert not in_unstable_cone(TABLE, arc_q, 1.0, 0.5)
    assert in_unstable_cone(TABLE, flat_q, 1.0, 3.0)
    assert in_unstable_cone(TABLE, flat_q, 0.0, 1.0)
    assert not in_unstable_cone(TABLE, flat_q, 1.0, -0.1)
    assert in_stable_cone(TABLE, arc_q, 1.0, 0.5)
    assert in_stable_cone(TABLE, flat_q, 1.0, -2.0)
    # boundary slopes pass within tolerance
    assert in_unstable_cone(TABLE, arc_q, 1.0, -1.0 - 1e-13)


def test_flat_curvature_propagation():
    step = CollisionStep(1.5, ARC1, FLAT1, 0.3)
    assert propagate_curvature(0.4, step, TABLE) == pytest.approx(1 / (1.5 + 1 / 0.4))


def test_arc_curvature_propagation():
    step = CollisionStep(0.7, FLAT1, ARC2, 0.5)
    expected = 1 / (0.7 + 1 / 2.0) - 2 / math.cos(0.5)
    assert propagate_curvature(2.0, step, TABLE) == pytest.approx(expected)


def test_repeated_flat_flights():
    taus = [2.0, 2.0, 1.5, 3.1]
    B = 0.25
    for i, tau in enumerate(taus):
        B = propagate_curvature(B, CollisionStep(tau, FLAT1, FLAT2 if i % 2 == 0 else FLAT1, 0.2), TABLE)
    assert B == pytest.approx(1 / (sum(taus) + 1 / 0.25))


def test_conjugate_point_is_projective():
    w = Wavefront.from_curvature(-0.5).fly(2.0)
    assert w.at_conjugate_point and np.isinf(w.curvature)
    # past the focus the wave diverges again: B^- = 1/(tau + 1/B^+) with tau = 3
    w2 = Wavefront.from_curvature(-0.5).fly(3.0)
    assert w2.curvature == pytest.approx(1.0)
    out = propagate_curvature(-0.5, CollisionStep(2.0, ARC1, FLAT1, 0.1))
    assert np.isinf(out)


def test_expansion_factor_examples():
    assert expansion_factor(-3.0, 0.0) == 1.0
    assert expansion_factor(0.0, 2.7) == 1.0


def test_expansion_along_arc_series():
    # a chord of the unit circle at angle phi has length 2 cos(phi); start with
    # a flat incoming wavefront and slide along one arc
    for phi in (0.2, 0.7, 1.2):
        tau = 2 * math.cos(phi)
        B = Wavefront.from_curvature(0.0, post=False).reflect(-1.0, phi).curvature
        for _ in range(6):
            assert expansion_factor(B, tau) >= 1.0
            B = propagate_curvature(B, CollisionStep(tau, ARC1, ARC1, phi))


def test_riemannian_norm_examples():
    assert riemannian_norm(0.3, 0.0, 0.0) == pytest.approx(0.3)
    assert riemannian_norm(1.0, 1.0, PI / 3) == pytest.approx(math.sqrt(2))
    assert riemannian_norm(2.0, 1.4, 0.4) == pytest.approx(2 * riemannian_norm(1.0, 0.7, 0.4))
    with pytest.raises(GrazingCollision):
        riemannian_norm(1.0, 0.0, PI / 2)


def test_reference_set_membership():
    arc, flat, other_arc = PhasePoint(1.0, 0.1), PhasePoint(TABLE.breakpoints[FLAT1] + 1, 0.1), PhasePoint(
        TABLE.breakpoints[ARC2] + 1, 0.1)
    assert in_reference_X(TABLE, arc, flat)
    assert in_reference_X(TABLE, arc, other_arc)
    assert in_reference_X(TABLE, arc, None)
    assert not in_reference_X(TABLE, arc, PhasePoint(2.0, 0.3))
    assert not in_reference_X(TABLE, flat, arc)


def test_previous_component_by_time_reversal():
    q, phi = sample_srb_many(TABLE, 200, 4)
    prev = previous_component(TABLE, q, phi)
    for i in range(200):
        back, _ = billiard_step(TABLE, PhasePoint(q[i], -phi[i]))
        assert prev[i] == TABLE.component(back.q)


def test_return_times_to_X():
    q, phi = sample_X_many(TABLE, 20000, 5)
    assert np.all(in_X_many(TABLE.component(q), previous_component(TABLE, q, phi)))
    R, q1, p1, bad = return_times_X(TABLE, q, phi, 10**4)
    ok = ~bad & (R <= 10**4)
    assert ok.mean() > 0.999
    assert np.all(in_X_many(TABLE.component(q1[ok]), previous_component(TABLE, q1[ok], p1[ok])))
    # Kac: E_X[R] * mu(X) = 1
    qs, ps = sample_srb_many(TABLE, 10**5, 6)
    mu_X = in_X_many(TABLE.component(qs), previous_component(TABLE, qs, ps)).mean()
    assert R[ok].mean() * mu_X == pytest.approx(1.0, abs=0.05)
    grid = np.array([2, 4, 8, 16, 32, 64, 128])
    counts = (R[ok][:, None] > grid).sum(axis=0)
    tail = TailCurve.from_counts(grid, counts, ok.sum())
    assert fit_exponent(tail).slope < 0


def test_orbit_rows():
    rows = orbit_rows(TABLE, PhasePoint(PI / 2, 0.0), 2)
    assert [r[0] for r in rows] == [0, 1, 2]
    assert rows[1][3] == pytest.approx(4.0)
    assert rows[1][4] == "arc2" and rows[2][4] == "arc1"
