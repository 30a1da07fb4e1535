"""The stadium billiard map on collision coordinates ``(q, phi)``.

Geometry: two unit semicircles centred at ``(+l, 0)`` and ``(-l, 0)`` joined
by the flat segments ``y = +1`` and ``y = -1`` of length ``2l``. ``q`` is
arc length measured counterclockwise from ``(l, -1)``, so the boundary
components in order are::

    0  arc 1   (right semicircle)    q in [0, pi)
    1  flat 1  (top, moving left)    q in [pi, pi + 2l)
    2  arc 2   (left semicircle)     q in [pi + 2l, 2 pi + 2l)
    3  flat 2  (bottom, moving right) q in [2 pi + 2l, 2 pi + 4l)

``phi`` is the angle of the outgoing velocity from the inward normal,
positive towards the direction of increasing ``q``. Curvature is -1 on the
arcs (focusing) and 0 on the flats; with these conventions the classical
derivative matrix and the cones apply verbatim.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import GrazingCollision, SolverFailure
from .utils import check_positive, check_random_state

GRAZING_CUTOFF = 1e-9
MIN_FLIGHT = 1e-12
# slack when deciding which component a hit near an arc/flat joint belongs to
JOINT_TOL = 1e-12

ARC1, FLAT1, ARC2, FLAT2 = 0, 1, 2, 3
COMPONENT_NAMES = ("arc1", "flat1", "arc2", "flat2")


@dataclass(frozen=True)
class StadiumTable:
    flat_half_length: float = 1.0

    def __post_init__(self):
        check_positive(self.flat_half_length, "flat_half_length")

    @property
    def l(self):
        return self.flat_half_length

    @property
    def perimeter(self):
        return 2 * np.pi + 4 * self.l

    @property
    def area(self):
        return np.pi + 4 * self.l

    @property
    def diameter(self):
        return 2 + 2 * self.l

    @property
    def breakpoints(self):
        """Start of each component plus the perimeter."""
        l = self.l
        return np.array([0.0, np.pi, np.pi + 2 * l, 2 * np.pi + 2 * l, 2 * np.pi + 4 * l])

    @property
    def mean_free_path(self):
        """pi * area / perimeter, the mean flight under the invariant measure."""
        return np.pi * self.area / self.perimeter

    def component(self, q):
        q = np.mod(np.asarray(q, dtype=float), self.perimeter)
        return np.clip(np.searchsorted(self.breakpoints, q, side="right") - 1, 0, 3)

    def curvature(self, q):
        return np.where(np.isin(self.component(q), (ARC1, ARC2)), -1.0, 0.0)

    def frame(self, q):
        """Boundary point, unit tangent (increasing q) and inward unit normal."""
        q = np.mod(np.asarray(q, dtype=float), self.perimeter)
        l = self.l
        comp = self.component(q)
        px, py, tx, ty, nx, ny = (np.zeros_like(q) for _ in range(6))

        for c, centre, theta0 in ((ARC1, l, -np.pi / 2), (ARC2, -l, np.pi / 2)):
            m = comp == c
            th = theta0 + (q[m] - self.breakpoints[c])
            ct, st = np.cos(th), np.sin(th)
            px[m], py[m] = centre + ct, st
            tx[m], ty[m] = -st, ct
            nx[m], ny[m] = -ct, -st

        m = comp == FLAT1
        px[m], py[m] = l - (q[m] - self.breakpoints[FLAT1]), 1.0
        tx[m], ny[m] = -1.0, -1.0
        m = comp == FLAT2
        px[m], py[m] = -l + (q[m] - self.breakpoints[FLAT2]), -1.0
        tx[m], ny[m] = 1.0, 1.0
        return (px, py), (tx, ty), (nx, ny)

    def distance(self, q1, q2):
        """Arc-length distance along the closed boundary."""
        d = np.mod(np.asarray(q1, dtype=float) - q2, self.perimeter)
        return np.minimum(d, self.perimeter - d)


def build_stadium(l):
    return StadiumTable(float(l))


@dataclass(frozen=True)
class PhasePoint:
    q: float
    phi: float


@dataclass(frozen=True)
class CollisionStep:
    tau: float
    from_component: int
    to_component: int
    phi: float  # outgoing angle at the arrival point


def _flight(table, q, phi):
    """Free flight from ``(q, phi)``: returns ``tau``, arrival component and point."""
    (px, py), (tx, ty), (nx, ny) = table.frame(q)
    c, s = np.cos(phi), np.sin(phi)
    vx, vy = c * nx + s * tx, c * ny + s * ty
    l = table.l
    best = np.full(px.shape, np.inf)
    comp = np.full(px.shape, -1)

    with np.errstate(divide="ignore", invalid="ignore"):
        for target, sign in ((FLAT1, 1.0), (FLAT2, -1.0)):
            t = (sign - py) / vy
            hx = px + t * vx
            ok = (sign * vy > 0) & (t > MIN_FLIGHT) & (np.abs(hx) <= l + JOINT_TOL) & (t < best)
            best = np.where(ok, t, best)
            comp = np.where(ok, target, comp)
        for target, centre in ((ARC1, l), (ARC2, -l)):
            dx = px - centre
            b = dx * vx + py * vy
            cc = dx * dx + py * py - 1.0
            disc = b * b - cc
            t = -b + np.sqrt(np.maximum(disc, 0.0))
            hx = px + t * vx
            side = (hx - centre) * np.sign(centre) >= -JOINT_TOL
            ok = (disc >= 0) & (t > MIN_FLIGHT) & side & (t < best)
            best = np.where(ok, t, best)
            comp = np.where(ok, target, comp)
    return best, comp, (px + best * vx, py + best * vy), (vx, vy)


def _arrival_q(table, comp, hx, hy):
    l = table.l
    bp = table.breakpoints
    q = np.empty_like(hx)
    m = comp == ARC1
    q[m] = np.clip(np.arctan2(hy[m], hx[m] - l), -np.pi / 2, np.pi / 2) + np.pi / 2
    m = comp == ARC2
    th = np.mod(np.arctan2(hy[m], hx[m] + l), 2 * np.pi)
    q[m] = bp[ARC2] + np.clip(th, np.pi / 2, 3 * np.pi / 2) - np.pi / 2
    m = comp == FLAT1
    q[m] = bp[FLAT1] + np.clip(l - hx[m], 0.0, 2 * l)
    m = comp == FLAT2
    q[m] = bp[FLAT2] + np.clip(hx[m] + l, 0.0, 2 * l)
    q[comp < 0] = np.nan
    return np.mod(q, table.perimeter)


def billiard_step_many(table, q, phi):
    """Vectorised billiard map.

    Returns ``(q1, phi1, tau, from_comp, to_comp, bad)`` where ``bad`` marks
    grazing arrivals and solver failures; their outputs are not meaningful.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    tau, comp, (hx, hy), (vx, vy) = _flight(table, q, phi)
    q1 = _arrival_q(table, comp, hx, hy)
    _, (tx, ty), (nx, ny) = table.frame(np.nan_to_num(q1))
    phi1 = np.arctan2(vx * tx + vy * ty, -(vx * nx + vy * ny))
    bad = (comp < 0) | (np.abs(phi1) > np.pi / 2 - GRAZING_CUTOFF)
    return q1, phi1, tau, table.component(q), comp, bad


def billiard_step(table, x):
    """One collision: returns ``(PhasePoint, CollisionStep)``."""
    if abs(x.phi) >= np.pi / 2 - GRAZING_CUTOFF:
        raise GrazingCollision(f"phi={x.phi} is within the grazing cutoff")
    q1, phi1, tau, c0, c1, _ = billiard_step_many(table, x.q, x.phi)
    if c1[0] < 0:
        raise SolverFailure(f"no boundary intersection from {x}")
    if abs(phi1[0]) > np.pi / 2 - GRAZING_CUTOFF:
        raise GrazingCollision(f"arrival angle {phi1[0]} is within the grazing cutoff")
    return PhasePoint(float(q1[0]), float(phi1[0])), CollisionStep(float(tau[0]), int(c0[0]), int(c1[0]), float(phi1[0]))


def sample_srb_many(table, size, random_state=None):
    """``q`` uniform on the boundary, ``sin(phi)`` uniform on [-1, 1]."""
    rng = check_random_state(random_state)
    q = rng.random(size) * table.perimeter
    phi = np.arcsin(2 * rng.random(size) - 1)
    # resample the (measure-zero) grazing draws
    bad = np.abs(phi) > np.pi / 2 - GRAZING_CUTOFF
    while bad.any():
        phi[bad] = np.arcsin(2 * rng.random(bad.sum()) - 1)
        bad = np.abs(phi) > np.pi / 2 - GRAZING_CUTOFF
    return q, phi


def sample_srb(table, random_state=None):
    q, phi = sample_srb_many(table, 1, random_state)
    return PhasePoint(float(q[0]), float(phi[0]))


# --------------------------------------------------------------------------
# tangent dynamics


def derivative_matrix(table, x0, x1, tau):
    """Jacobian of the billiard map in ``(dq, dphi)`` between consecutive collisions."""
    k0, k1 = float(table.curvature(x0.q)), float(table.curvature(x1.q))
    c0, c1 = np.cos(x0.phi), np.cos(x1.phi)
    return -np.array([
        [tau * k0 + c0, tau],
        [tau * k0 * k1 + k0 * c1 + k1 * c0, tau * k1 + c1],
    ]) / c1


def in_unstable_cone(table, q, dq, dphi, tol=1e-12):
    """Slope test ``K <= dphi/dq <= inf`` (flat) or ``K <= dphi/dq <= 0`` (arc).

    Tangent vectors are unsigned, so ``(dq, dphi)`` and its negative agree.
    """
    k = float(table.curvature(q))
    if dq == 0:
        return k == 0  # vertical direction: slope = +-inf
    s = dphi / dq
    if k < 0:
        return k - tol <= s <= tol
    return s >= k - tol


def in_stable_cone(table, q, dq, dphi, tol=1e-12):
    k = float(table.curvature(q))
    if dq == 0:
        return k == 0
    s = dphi / dq
    if k < 0:
        return -tol <= s <= -k + tol
    return s <= -k + tol


@dataclass(frozen=True)
class Wavefront:
    """Curvature ``B = num / den`` of a wavefront, kept in projective form so
    a focal (conjugate) point, where ``B`` passes through infinity, is just
    ``den == 0``."""

    num: float
    den: float = 1.0
    post: bool = True

    @classmethod
    def from_curvature(cls, B, post=True):
        if np.isinf(B):
            return cls(1.0, 0.0, post)
        return cls(float(B), 1.0, post)

    @property
    def curvature(self):
        if self.den == 0:
            return np.inf
        return self.num / self.den

    @property
    def at_conjugate_point(self):
        return abs(self.den) <= 1e-14 * abs(self.num)

    def fly(self, tau):
        """Free flight: ``1/B^- = tau + 1/B^+``."""
        return self._normalised(self.num, self.den + tau * self.num, post=False)

    def reflect(self, curvature, phi):
        """Reflection: ``B^+ = B^- + 2K / cos(phi)``."""
        return self._normalised(self.num + 2 * curvature / np.cos(phi) * self.den, self.den, post=True)

    @staticmethod
    def _normalised(num, den, post):
        scale = np.hypot(num, den)
        if den < 0:
            scale = -scale
        return Wavefront(num / scale, den / scale, post)


def propagate_curvature(B_plus, step, table=None):
    """Post-collision curvature after one flight and one reflection.

    ``table`` is unused (kept for signature symmetry); the arrival curvature
    is read from ``step.to_component``.
    """
    k = -1.0 if step.to_component in (ARC1, ARC2) else 0.0
    return Wavefront.from_curvature(B_plus).fly(step.tau).reflect(k, step.phi).curvature


def expansion_factor(B_plus, tau):
    """``|1 + tau B^+|``: growth of the p-norm ``cos(phi)|dq|`` over one flight."""
    return abs(1.0 + tau * B_plus)


def riemannian_norm(dq, dphi, phi):
    """``(||dx||_p / cos phi) * sqrt(1 + (dphi/dq)^2)`` with ``||dx||_p = cos(phi)|dq|``."""
    c = np.cos(phi)
    if c <= GRAZING_CUTOFF:
        raise GrazingCollision("cos(phi) below the grazing cutoff")
    if dq == 0:
        return abs(dphi)
    return (c * abs(dq)) / c * np.sqrt(1.0 + (dphi / dq) ** 2)


# --------------------------------------------------------------------------
# reference set of first arc collisions


def is_arc(component):
    return np.isin(component, (ARC1, ARC2))


def in_reference_X(table, current, previous=None):
    """Whether ``current`` is the first collision of a series on one arc."""
    c = int(table.component(current.q))
    if c not in (ARC1, ARC2):
        return False
    if previous is None:
        return True
    return int(table.component(previous.q)) != c


def in_X_many(current_comp, previous_comp):
    return is_arc(current_comp) & (current_comp != previous_comp)


def previous_component(table, q, phi):
    """Component of the collision preceding ``(q, phi)`` (by time reversal)."""
    _, _, _, _, comp, _ = billiard_step_many(table, q, -np.asarray(phi))
    return comp


def sample_X_many(table, size, random_state=None):
    """Invariant-measure draws conditioned on the reference set ``X``."""
    rng = check_random_state(random_state)
    qs, ps = [], []
    need = size
    while need > 0:
        q, phi = sample_srb_many(table, max(3 * need, 1000), rng)
        keep = in_X_many(table.component(q), previous_component(table, q, phi))
        qs.append(q[keep][:need])
        ps.append(phi[keep][:need])
        need -= qs[-1].size
    return np.concatenate(qs), np.concatenate(ps)


def return_times_X(table, q, phi, cap):
    """First return times to ``X`` for start points assumed in ``X``.

    Returns ``(R, q_back, phi_back, bad)``; ``R = cap + 1`` marks overflow and
    ``bad`` marks grazing/solver failures along the way.
    """
    q = np.asarray(q, dtype=float).copy()
    phi = np.asarray(phi, dtype=float).copy()
    n = q.size
    R = np.full(n, cap + 1, dtype=np.int64)
    bad = np.zeros(n, bool)
    idx = np.arange(n)
    cq, cp = q.copy(), phi.copy()
    prev = table.component(cq)
    for k in range(1, cap + 1):
        q1, p1, _, _, comp, b = billiard_step_many(table, cq, cp)
        bad[idx[b]] = True
        back = in_X_many(comp, prev) | b
        done = idx[back & ~b]
        R[done] = k
        q[done], phi[done] = q1[back & ~b], p1[back & ~b]
        keep = ~back
        idx, cq, cp, prev = idx[keep], q1[keep], p1[keep], comp[keep]
        if idx.size == 0:
            break
    return R, q, phi, bad


# --------------------------------------------------------------------------
# ensemble diagnostics


def _ks_uniform(x, lo, hi):
    return float(stats.kstest((np.asarray(x) - lo) / (hi - lo), "uniform").statistic)


def srb_invariance(table, size=10**5, random_state=None):
    """One-step pushforward of SRB samples against the SRB marginals.

    Returns KS distances of the pushed ``q`` and ``sin(phi)`` marginals to
    their uniform laws, the two-sample KS distances to the starting sample,
    and the number of discarded (grazing) steps.
    """
    rng = check_random_state(random_state)
    q, phi = sample_srb_many(table, size, rng)
    q1, phi1, _, _, _, bad = billiard_step_many(table, q, phi)
    q1, phi1 = q1[~bad], phi1[~bad]
    return {
        "ks_q": _ks_uniform(q1, 0.0, table.perimeter),
        "ks_sin_phi": _ks_uniform(np.sin(phi1), -1.0, 1.0),
        "ks2_q": float(stats.ks_2samp(q, q1).statistic),
        "ks2_sin_phi": float(stats.ks_2samp(np.sin(phi), np.sin(phi1)).statistic),
        "discarded": int(bad.sum()),
    }


def reversibility_error(table, size=10**4, random_state=None):
    """Max distance between ``(q, -phi)`` and the step back from ``(q', -phi')``."""
    q, phi = sample_srb_many(table, size, random_state)
    q1, phi1, _, _, _, bad = billiard_step_many(table, q, phi)
    q2, phi2, _, _, _, bad2 = billiard_step_many(table, q1, -phi1)
    ok = ~(bad | bad2)
    dq = table.distance(q2[ok], q[ok])
    dphi = np.abs(phi2[ok] + phi[ok])
    return float(max(dq.max(), dphi.max())), int((~ok).sum())


def mean_free_path_estimate(table, collisions=10**5, random_state=None):
    """Average flight length over ``collisions`` steps from SRB starts."""
    q, phi = sample_srb_many(table, collisions, random_state)
    _, _, tau, _, _, bad = billiard_step_many(table, q, phi)
    return float(tau[~bad].mean())


def cone_violations(table, size=10**4, random_state=None, tol=1e-12):
    """Push random unstable-cone vectors one step; count images outside the cone.

    Vectors are drawn at SRB points with direction angle uniform over the
    cone at the base point. Returns ``(violations, tested)``.
    """
    rng = check_random_state(random_state)
    q, phi = sample_srb_many(table, size, rng)
    q1, phi1, tau, _, _, bad = billiard_step_many(table, q, phi)
    arc = is_arc(table.component(q))
    theta = np.where(arc, -np.pi / 4 * rng.random(size), np.pi / 2 * rng.random(size))
    violations = tested = 0
    for i in np.flatnonzero(~bad):
        x0, x1 = PhasePoint(q[i], phi[i]), PhasePoint(q1[i], phi1[i])
        dq, dphi = derivative_matrix(table, x0, x1, tau[i]) @ (np.cos(theta[i]), np.sin(theta[i]))
        tested += 1
        violations += not in_unstable_cone(table, q1[i], dq, dphi, tol)
    return violations, tested


def orbit_rows(table, x0, n):
    """``(step, q, phi, tau, component)`` rows of an ``n``-collision orbit.

    The first row is the start point with ``tau = 0``.
    """
    rows = [(0, x0.q, x0.phi, 0.0, COMPONENT_NAMES[int(table.component(x0.q))])]
    x = x0
    for k in range(1, n + 1):
        x, step = billiard_step(table, x)
        rows.append((k, x.q, x.phi, step.tau, COMPONENT_NAMES[step.to_component]))
    return rows
