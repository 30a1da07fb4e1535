"""Hitting times and dynamical point processes for small holes.

A hole is ``B_r(z)`` for a 1D map or ``B_r(q) x S^1`` for the stadium. Hit
times ``i >= 1`` with ``f^i(x)`` in the hole are rescaled by the hole
measure, so for small holes the rescaled process should look like a unit
rate Poisson process and the rescaled first hit like an Exp(1) variable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .billiards import StadiumTable, billiard_step_many, sample_srb_many
from .dynamics1d import check_in_unit_interval, sample_invariant_many
from .exceptions import InsufficientSamplesError, NotPeriodicError
from .utils import (
    check_count,
    check_positive,
    check_seed_sequence,
    run_tasks,
    split_ensemble,
    wilson_interval,
)


@dataclass(frozen=True)
class HoleSpec:
    """Hole of radius ``radius`` around ``center`` in ``system``.

    ``measure`` is the invariant measure of the hole and ``measure_ci`` the
    half-width of its 95% interval (0 when known exactly).
    """

    system: object
    center: float
    radius: float
    measure: float
    measure_ci: float = 0.0
    burn_in: int = 1000

    def __post_init__(self):
        check_positive(self.radius, "radius")
        if not 0.0 < self.measure < 1.0:
            raise ValueError(f"hole measure must lie in (0, 1), got {self.measure}")

    @classmethod
    def billiard(cls, table, q, r):
        """``B_r(q) x S^1``; its measure is ``2r / perimeter`` since ``q`` is uniform."""
        return cls(table, float(np.mod(q, table.perimeter)), float(r), 2 * r / table.perimeter)

    @classmethod
    def interval(cls, map_, z, r, measure=None, random_state=None, **kwargs):
        """``[z - r, z + r]`` clipped to [0, 1]; measure estimated unless given."""
        check_in_unit_interval(z, "z")
        ci = 0.0
        if measure is None:
            measure, ci = estimate_hole_measure(map_, z, r, random_state=random_state, **kwargs)
        return cls(map_, float(z), float(r), float(measure), float(ci))

    @property
    def is_billiard(self):
        return isinstance(self.system, StadiumTable)

    @property
    def relative_ci(self):
        return self.measure_ci / self.measure

    @property
    def touches_boundary(self):
        """For 1D holes: whether the ball is cut by an endpoint of [0, 1]."""
        return not self.is_billiard and (self.center - self.radius < 0 or self.center + self.radius > 1)

    def contains(self, state):
        if self.is_billiard:
            q = state[0]
            return self.system.distance(q, self.center) <= self.radius
        x = np.asarray(state)
        return np.abs(x - self.center) <= self.radius

    def initial(self, size, rng):
        if self.is_billiard:
            return sample_srb_many(self.system, size, rng)
        return sample_invariant_many(self.system, size, self.burn_in, rng)

    def advance(self, state, rng):
        """One step for an ensemble; returns ``(state, bad)``."""
        if self.is_billiard:
            q1, p1, _, _, _, bad = billiard_step_many(self.system, *state)
            return (q1, p1), bad
        return self.system.advance(state, rng), np.zeros(np.shape(state), bool)


def _measure_chunk(map_, size, seed, steps, z, r, burn_in):
    rng = np.random.default_rng(seed)
    x = sample_invariant_many(map_, size, burn_in, rng)
    hits = np.zeros(size)
    for _ in range(steps):
        hits += np.abs(x - z) <= r
        x = map_.advance(x, rng)
    return hits


def estimate_hole_measure(map_, z, r, n_steps=10**8, orbits=10**4, burn_in=1000,
                          random_state=None, workers=1):
    """Invariant measure of ``[z - r, z + r]`` and its 95% half-width.

    Lebesgue length for the doubling map (exact). Otherwise the occupation
    fraction over ``orbits`` independent orbits of ``n_steps // orbits``
    steps; the interval uses the spread between orbits.
    """
    if map_.kind == "doubling":
        return float(min(1.0, z + r) - max(0.0, z - r)), 0.0
    steps = max(1, n_steps // orbits)
    tasks = [(map_, n, seed, steps, z, r, burn_in) for n, seed in split_ensemble(orbits, random_state)]
    per_orbit = np.concatenate(run_tasks(_measure_chunk, tasks, workers)) / steps
    mean = float(per_orbit.mean())
    ci = float(1.96 * per_orbit.std(ddof=1) / np.sqrt(orbits))
    return mean, ci


# --------------------------------------------------------------------------
# hitting times


@dataclass(frozen=True)
class HittingSample:
    tau: int
    rescaled: float
    censored: bool = False


@dataclass
class HittingSamples:
    """Ensemble of hitting times; censored entries carry ``tau = cap + 1``."""

    tau: np.ndarray
    measure: float
    cap: int
    censored: np.ndarray
    discarded: int = 0

    @property
    def rescaled(self):
        return self.tau * self.measure

    def __len__(self):
        return len(self.tau)

    def __getitem__(self, i):
        return HittingSample(int(self.tau[i]), float(self.tau[i] * self.measure), bool(self.censored[i]))


def hitting_time(hole, x0, cap=10**6):
    """First ``n >= 1`` with ``f^n(x0)`` in the hole, by plain iteration.

    ``x0`` is a float for 1D holes and a :class:`PhasePoint` for billiards.
    """
    cap = check_count(cap, "cap")
    if hole.is_billiard:
        state = (np.array([x0.q]), np.array([x0.phi]))
    else:
        check_in_unit_interval(x0, "x0")
        state = np.array([float(x0)])
    for n in range(1, cap + 1):
        if hole.is_billiard:
            q1, p1, _, _, _, _ = billiard_step_many(hole.system, *state)
            state = (q1, p1)
        else:
            state = hole.system._apply(state)
        if hole.contains(state)[0]:
            return HittingSample(n, n * hole.measure)
    return HittingSample(cap + 1, (cap + 1) * hole.measure, censored=True)


def _hitting_chunk(hole, size, seed, cap):
    rng = np.random.default_rng(seed)
    state = hole.initial(size, rng)
    tau = np.full(size, cap + 1, dtype=np.int64)
    bad = np.zeros(size, bool)
    idx = np.arange(size)
    for n in range(1, cap + 1):
        state, b = hole.advance(state, rng)
        bad[idx[b]] = True
        hit = hole.contains(state) & ~b
        tau[idx[hit]] = n
        keep = ~(hit | b)
        idx = idx[keep]
        state = tuple(s[keep] for s in state) if hole.is_billiard else state[keep]
        if idx.size == 0:
            break
    return tau[~bad], int(bad.sum())


def hitting_times(hole, size, cap=10**6, random_state=None, workers=1):
    """Hitting times for ``size`` invariant-distributed start points.

    Orbits that run into a grazing collision are discarded and counted.
    """
    tasks = [(hole, n, seed, cap) for n, seed in split_ensemble(size, random_state)]
    parts = run_tasks(_hitting_chunk, tasks, workers)
    tau = np.concatenate([p[0] for p in parts])
    return HittingSamples(tau, hole.measure, cap, tau > cap, sum(p[1] for p in parts))


def exponential_law_check(samples, min_samples=1000):
    """Kolmogorov-Smirnov distance between rescaled hitting times and Exp(1).

    Censored entries count as exceeding every time up to the censoring
    point, beyond which the supremum is not taken.
    """
    if isinstance(samples, HittingSamples):
        values, censored = samples.rescaled, samples.censored
        limit = (samples.cap + 1) * samples.measure
    else:
        values = np.asarray(samples, dtype=float)
        censored = np.zeros(values.shape, bool)
        limit = np.inf
    n = values.size
    if (~censored).sum() < min_samples:
        raise InsufficientSamplesError(f"{(~censored).sum()} uncensored samples, need {min_samples}")
    x = np.sort(values[~censored])
    F = -np.expm1(-x)
    i = np.arange(1, x.size + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F - (i - 1) / n)
    d = max(d_plus, d_minus)
    if censored.any() and np.isfinite(limit):
        d = max(d, abs(-np.expm1(-limit) - x.size / n))
    return float(d)


def ks_halfwidth(n, alpha=0.05):
    """Asymptotic ``1 - alpha`` critical value of the one-sample KS statistic."""
    return float(stats.kstwobign.ppf(1 - alpha) / np.sqrt(n))


# --------------------------------------------------------------------------
# point processes


@dataclass
class CountingSample:
    """Rescaled event times ``i * measure <= T`` (``i >= 1``) of one orbit."""

    times: np.ndarray
    horizon: float
    measure: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)

    def count(self, a=0.0, b=None):
        """Events in ``(a, b]``; ``a = 0`` includes time 0 for convenience."""
        b = self.horizon if b is None else b
        t = self.times
        if a <= 0:
            return int(np.sum(t <= b))
        return int(np.sum((t > a) & (t <= b)))

    @property
    def total(self):
        return self.times.size

    def first_index(self):
        """Unscaled index of the first event, or ``None``."""
        if self.total == 0:
            return None
        return int(round(self.times[0] / self.measure))


def _n_steps(hole, T):
    return int(np.floor(T / hole.measure + 1e-9))


def point_process(hole, x0, T):
    """Counting sample of one orbit (plain iteration) on ``[0, T]``."""
    if T < 0:
        raise ValueError("T must be >= 0")
    steps = _n_steps(hole, T)
    if hole.is_billiard:
        state = (np.array([x0.q]), np.array([x0.phi]))
    else:
        check_in_unit_interval(x0, "x0")
        state = np.array([float(x0)])
    hits = []
    for n in range(1, steps + 1):
        if hole.is_billiard:
            q1, p1, _, _, _, _ = billiard_step_many(hole.system, *state)
            state = (q1, p1)
        else:
            state = hole.system._apply(state)
        if hole.contains(state)[0]:
            hits.append(n * hole.measure)
    return CountingSample(np.array(hits), float(T), hole.measure)


def _process_chunk(hole, size, seed, steps):
    rng = np.random.default_rng(seed)
    state = hole.initial(size, rng)
    bad = np.zeros(size, bool)
    members, indices = [], []
    for n in range(1, steps + 1):
        state, b = hole.advance(state, rng)
        bad |= b
        hit = np.flatnonzero(hole.contains(state) & ~bad)
        members.append(hit)
        indices.append(np.full(hit.size, n))
    return size, np.concatenate(members) if members else np.array([], int), \
        np.concatenate(indices) if indices else np.array([], int), bad


def point_processes(hole, size, T, random_state=None, workers=1):
    """Counting samples for ``size`` invariant-distributed orbits.

    Orbits that hit a grazing collision are dropped.
    """
    steps = _n_steps(hole, T)
    tasks = [(hole, n, seed, steps) for n, seed in split_ensemble(size, random_state)]
    out = []
    for n, members, idx, bad in run_tasks(_process_chunk, tasks, workers):
        order = np.lexsort((idx, members))
        members, idx = members[order], idx[order]
        bounds = np.searchsorted(members, np.arange(n + 1))
        for j in range(n):
            if not bad[j]:
                out.append(CountingSample(idx[bounds[j]:bounds[j + 1]] * hole.measure, float(T), hole.measure))
    return out


@dataclass
class PoissonComparison:
    m: int
    k_max: int
    empirical: np.ndarray
    reference: np.ndarray
    d_tv: float
    window_means: np.ndarray
    window_vars: np.ndarray
    n_samples: int
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"m": self.m, "k_max": self.k_max, "d_tv": self.d_tv, "n_samples": self.n_samples,
                "window_means": self.window_means.tolist(), "window_vars": self.window_vars.tolist()}


def truncated_poisson_pmf(mean, k_max):
    """Poisson pmf on ``0..k_max`` with the tail mass lumped into ``k_max``."""
    pmf = stats.poisson.pmf(np.arange(k_max + 1), mean)
    pmf[-1] = stats.poisson.sf(k_max - 1, mean)
    return pmf


def product_poisson_law(mean, m, k_max):
    """Joint law of ``m`` independent truncated Poisson counts, shape ``(k_max+1,)*m``."""
    pmf = truncated_poisson_pmf(mean, k_max)
    law = pmf
    for _ in range(m - 1):
        law = np.multiply.outer(law, pmf)
    return law


def dtv_laws(p, q):
    """Half L1 distance between two laws on the same finite set."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("laws must share their support")
    return float(0.5 * np.abs(p - q).sum())


def window_counts(samples, m):
    """Counts per window, shape ``(n_samples, m)``, windows of length T/m."""
    T = samples[0].horizon
    edges = np.linspace(0.0, T, m + 1)
    out = np.zeros((len(samples), m), dtype=np.int64)
    for i, s in enumerate(samples):
        # windows are (a, b]; the first one also catches time 0
        w = np.searchsorted(edges, s.times, side="left") - 1
        w = np.clip(w, 0, m - 1)
        out[i] = np.bincount(w, minlength=m)[:m]
    return out


def dtv_window_counts(samples, m=2, k_max=5):
    """Total variation between window-count laws and product Poisson(T/m).

    Computed on the finite algebra generated by the ``m`` window counts
    capped at ``k_max`` (``k_max=None`` caps just above the largest observed
    count), so it lower-bounds the distance over all count events.
    """
    m = check_count(m, "m")
    if not samples:
        raise InsufficientSamplesError("no counting samples")
    T = samples[0].horizon
    counts = window_counts(samples, m)
    if k_max is None:
        k_max = int(counts.max()) + 1
    k_max = check_count(k_max, "k_max", 0)
    capped = np.minimum(counts, k_max)
    emp = np.zeros((k_max + 1,) * m)
    np.add.at(emp, tuple(capped.T), 1.0)
    emp /= len(samples)
    ref = product_poisson_law(T / m, m, k_max)
    return PoissonComparison(m, k_max, emp, ref, dtv_laws(emp, ref), counts.mean(axis=0),
                             counts.var(axis=0, ddof=1), len(samples), {"T": T})


def fano_factor(samples):
    """Variance over mean of the total counts (1 for a Poisson law)."""
    totals = np.array([s.total for s in samples], dtype=float)
    return float(totals.var(ddof=1) / totals.mean())


# --------------------------------------------------------------------------
# escape-rate limits and extremal indices


@dataclass(frozen=True)
class LAlphaSEstimate:
    r: float
    measure: float
    measure_ci: float
    horizon: int
    survival: float
    estimate: float
    ci: tuple
    usable: bool
    n_samples: int
    boundary: bool = False


def escape_rate_estimate(survival, measure, alpha, s):
    """``-log(survival) / (s * measure^(1 - alpha))``."""
    return float(-np.log(survival) / (s * measure ** (1 - alpha)))


def _survival_chunk(hole, size, seed, horizon):
    rng = np.random.default_rng(seed)
    x = hole.initial(size, rng)
    alive = np.ones(size, bool)
    for _ in range(horizon):
        x = hole.system.advance(x, rng)
        alive &= ~hole.contains(x)
    return int(alive.sum())


def l_alpha_s(map_, z, alpha, s, r_grid, ensemble=10**4, random_state=None, period_hint=None,
              measures=None, workers=1, **measure_kwargs):
    """Finite-``r`` estimates of the escape-rate limit ``L_{alpha,s}(z)``.

    For each ``r``: ``-log P(tau > s mu^-alpha) / (s mu^(1-alpha))`` with
    ``mu`` the hole measure and ``tau`` the first hitting time of
    ``[z - r, z + r]``. Radii where the survival is 0 or 1 are flagged
    unusable. ``period_hint`` is recorded only. ``measures`` may supply the
    hole measures directly. Estimated measures whose relative 95% interval
    is 5% or wider also make the radius unusable. Holes cut by an endpoint
    of [0, 1] are flagged through ``boundary``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    check_positive(s, "s")
    seeds = check_seed_sequence(random_state).spawn(2 * len(r_grid))
    out = []
    for i, r in enumerate(r_grid):
        given = None if measures is None else measures[i]
        hole = HoleSpec.interval(map_, z, r, measure=given, random_state=seeds[2 * i],
                                 workers=workers, **measure_kwargs)
        horizon = int(np.floor(s * hole.measure ** (-alpha)))
        tasks = [(hole, n, sd, horizon) for n, sd in split_ensemble(ensemble, seeds[2 * i + 1])]
        alive = sum(run_tasks(_survival_chunk, tasks, workers))
        surv = alive / ensemble
        scale = s * hole.measure ** (1 - alpha)
        usable = 0 < alive < ensemble and hole.relative_ci < 0.05
        lo, hi = wilson_interval(alive, ensemble)
        est = escape_rate_estimate(surv, hole.measure, alpha, s) if usable else np.nan
        ci = (float(-np.log(hi) / scale), float(-np.log(max(lo, 1e-300)) / scale)) if usable else (np.nan, np.nan)
        out.append(LAlphaSEstimate(float(r), hole.measure, hole.measure_ci, horizon, float(surv),
                                   float(est), ci, bool(usable), int(ensemble), hole.touches_boundary))
    return out


def extremal_index_formula(map_, z, p):
    """``1 - 1/|Df^p(z)|`` at a ``p``-periodic point ``z``."""
    p = check_count(p, "p")
    check_in_unit_interval(z, "z")
    x = float(z)
    deriv = 1.0
    for _ in range(p):
        deriv *= float(map_.derivative(x))
        x = float(map_._apply(x))
    if abs(x - z) >= 1e-9:
        raise NotPeriodicError(f"|f^{p}(z) - z| = {abs(x - z):.3g}")
    return 1.0 - 1.0 / deriv
