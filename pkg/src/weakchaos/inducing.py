"""First returns to a reference interval and the induced map ``F = f^R``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import TailCurve
from .dynamics1d import check_in_unit_interval, sample_invariant_many
from .exceptions import DomainError
from .utils import (
    check_count,
    check_grid,
    check_positive,
    check_random_state,
    run_tasks,
    split_ensemble,
)

DEFAULT_CAP = 10**7


@dataclass(frozen=True)
class ReferenceSet:
    """Closed interval ``[a, b]`` inside [0, 1]."""

    a: float = 0.5
    b: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.a < self.b <= 1.0:
            raise ValueError(f"reference set needs 0 <= a < b <= 1, got [{self.a}, {self.b}]")

    @property
    def length(self):
        return self.b - self.a

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.a) & (x <= self.b)

    def uniform(self, size, rng):
        return self.a + self.length * rng.random(size)


@dataclass(frozen=True)
class ReturnRecord:
    x: float
    return_time: int
    image: float


@dataclass(frozen=True)
class Overflow:
    """No return to the reference set within ``cap`` iterations of ``x``."""

    x: float
    cap: int


@dataclass(frozen=True)
class GmyDiagnostics:
    rho_hat: float
    distortion_hat: float
    branch_count_sampled: int
    samples_used: int = 0
    pairs_used: int = 0
    overflow_count: int = 0


def first_return_time(map_, J, x, cap=DEFAULT_CAP):
    """Smallest ``k >= 1`` with ``f^k(x)`` in ``J``, by plain iteration.

    Returns a :class:`ReturnRecord`, or an :class:`Overflow` when no return
    happens within ``cap`` steps.
    """
    check_in_unit_interval(x)
    if not J.contains(x):
        raise DomainError(f"x={x} is not in the reference set [{J.a}, {J.b}]")
    cap = check_count(cap, "cap")
    y = float(x)
    for k in range(1, cap + 1):
        y = float(map_._apply(y))
        if J.a <= y <= J.b:
            return ReturnRecord(float(x), k, y)
    return Overflow(float(x), cap)


def induced_orbit(map_, J, x0, n_returns, cap=DEFAULT_CAP):
    """Chain ``n_returns`` first returns starting at ``x0``.

    Stops early at the first :class:`Overflow`, which is kept as the last
    element of the returned list.
    """
    n_returns = check_count(n_returns, "n_returns")
    records = []
    x = x0
    for _ in range(n_returns):
        rec = first_return_time(map_, J, x, cap)
        records.append(rec)
        if isinstance(rec, Overflow):
            break
        x = rec.image
    return records


def return_times_many(map_, J, x, cap, rng, images=False):
    """Vectorised first return times for an array of start points in ``J``.

    Iterates with digit refresh (see :mod:`weakchaos.dynamics1d`). Entries
    that do not return within ``cap`` steps get ``cap + 1``. With
    ``images=True`` also returns the return points (the last visited point
    for overflowed entries).
    """
    x = np.asarray(x, dtype=float)
    R = np.full(x.shape, cap + 1, dtype=np.int64)
    out = x.copy()
    idx = np.arange(x.size)
    y = x.copy()
    for k in range(1, cap + 1):
        y = map_.advance(y, rng)
        back = J.contains(y)
        if back.any():
            R[idx[back]] = k
            out[idx[back]] = y[back]
            keep = ~back
            idx, y = idx[keep], y[keep]
            if idx.size == 0:
                break
    out[idx] = y
    return (R, out) if images else R


def _tail_chunk(map_, J, size, seed, N_grid, cap):
    rng = np.random.default_rng(seed)
    R = return_times_many(map_, J, J.uniform(size, rng), cap, rng)
    counts = (R[:, None] > N_grid[None, :]).sum(axis=0)
    return counts, int((R > cap).sum())


def return_tail(map_, J, samples, N_grid, random_state=None, cap=None, workers=1):
    """Lebesgue tail ``Leb_J(R > N)`` from uniform samples on ``J``.

    ``cap`` defaults to ``max(N_grid)``; every grid value is then exact for
    the sample and the censored fraction is the share of ``R > cap``.
    """
    samples = check_count(samples, "samples", 1000)
    N_grid = check_grid(N_grid, "N_grid")
    cap = int(N_grid[-1]) if cap is None else check_count(cap, "cap")
    if N_grid[-1] > cap:
        raise ValueError("N_grid must not exceed cap")
    tasks = [(map_, J, n, seed, N_grid, cap) for n, seed in split_ensemble(samples, random_state)]
    out = run_tasks(_tail_chunk, tasks, workers)
    counts = np.sum([c for c, _ in out], axis=0)
    censored = sum(c for _, c in out) / samples
    return TailCurve.from_counts(N_grid, counts, samples, censored_fraction=censored,
                                 meta={"cap": cap, "reference_set": [J.a, J.b]})


def sample_invariant_in(map_, J, size, burn_in=1000, random_state=None):
    """Draws from the invariant measure conditioned on ``J`` (rejection)."""
    rng = check_random_state(random_state)
    out = []
    need = size
    while need > 0:
        x = sample_invariant_many(map_, max(2 * need, 1000), burn_in, rng)
        x = x[J.contains(x)][:need]
        out.append(x)
        need -= x.size
    return np.concatenate(out)


def kac_check(map_, J, samples=10**5, burn_in=1000, random_state=None, cap=DEFAULT_CAP):
    """``(mean R under mu_J, mu(J))``; Kac's formula makes their product 1.

    ``mu(J)`` is the fraction of invariant draws that land in ``J``.
    """
    rng = check_random_state(random_state)
    pts = sample_invariant_many(map_, samples, burn_in, rng)
    mu_J = float(J.contains(pts).mean())
    starts = sample_invariant_in(map_, J, samples, burn_in, rng)
    R = return_times_many(map_, J, starts, cap, rng)
    if np.any(R > cap):
        raise RuntimeError("return times exceeded cap; raise cap")
    return float(R.mean()), mu_J


def _block_derivative(map_, J, x, cap):
    """Return time, log DF and per-step branch flags along the return block."""
    y = float(x)
    log_d = 0.0
    branches = []
    for k in range(1, cap + 1):
        branches.append(bool(map_.left_branch(y)))
        log_d += float(np.log(map_.derivative(y)))
        y = float(map_._apply(y))
        if J.a <= y <= J.b:
            return k, log_d, tuple(branches)
    return None, None, None


def gmy_diagnostics(map_, J, samples=1000, pair_distance=1e-4, random_state=None, cap=10**5):
    """Empirical expansion and distortion constants of the induced map.

    For each uniform sample ``x`` in ``J`` the derivative ``DF(x)`` is the
    product of ``|Df|`` along the return block. The partner ``x + d`` counts
    as same-branch when its return time and its sequence of ``f``-branches
    agree with those of ``x``; other pairs are discarded.
    """
    samples = check_count(samples, "samples")
    pair_distance = check_positive(pair_distance, "pair_distance")
    rng = check_random_state(random_state)
    xs = J.a + (J.length - pair_distance) * rng.random(samples)
    max_inv = 0.0
    max_dist = 0.0
    branch_times = set()
    used = pairs = overflow = 0
    for x in xs:
        R, lx, bx = _block_derivative(map_, J, x, cap)
        if R is None:
            overflow += 1
            continue
        used += 1
        branch_times.add(R)
        max_inv = max(max_inv, float(np.exp(-lx)))
        Ry, ly, by = _block_derivative(map_, J, x + pair_distance, cap)
        if Ry == R and by == bx:
            pairs += 1
            max_dist = max(max_dist, abs(lx - ly))
    if used == 0:
        raise RuntimeError("every sample overflowed; raise cap")
    return GmyDiagnostics(max_inv, max_dist, len(branch_times), used, pairs, overflow)
