"""Large and maximal large deviations of Birkhoff averages.

For an ensemble of orbits started from the invariant measure, with
``S_n = sum(phi(f^i x) for i in range(n))``:

* ``ld_tail``:  P(|S_N / N| >= eps) for N on a grid;
* ``mld_tail``: P(max_{N <= n <= N_max} |S_n / n| >= eps), a truncation of
  the supremum over all ``n >= N``;
* ``moment_curve``: E|S_N / N|^{2p}, or the maximal variant built from
  ``max_{n <= N} |S_N - S_n| / N``.

All three are read off one pass over a shared ensemble, so domination and
monotonicity hold exactly. Ensembles are split into fixed-size chunks with
spawned seeds; results do not depend on the worker count.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .curves import DecayCurve, TailCurve
from .dynamics1d import MapSystem, Observable, sample_invariant_many
from .exceptions import InsufficientPointsError
from .inducing import ReferenceSet, return_times_many, sample_invariant_in
from .utils import check_count, check_grid, check_positive, run_tasks, split_ensemble

# --------------------------------------------------------------------------
# streams


class StreamSource:
    """Something that produces, for an ensemble, the values ``phi(f^i x)``.

    Subclasses implement :meth:`iter_values`, yielding one array per time
    step, and expose ``sup_norm`` (``inf`` for unbounded streams).
    """

    seed = None
    sup_norm = np.inf

    def iter_values(self, size, rng):
        raise NotImplementedError

    def describe(self):
        return {"kind": type(self).__name__}


@dataclass(frozen=True)
class MapStream(StreamSource):
    """Observable along orbits of a 1D map, started from invariant draws."""

    map_: MapSystem
    observable: Observable
    burn_in: int = 1000
    seed: int = None

    @property
    def sup_norm(self):
        return self.observable.sup_norm

    def iter_values(self, size, rng):
        x = sample_invariant_many(self.map_, size, self.burn_in, rng)
        while True:
            yield self.observable(x)
            x = self.map_.advance(x, rng)

    def describe(self):
        return {"kind": "map", "map": self.map_.kind, "gamma": self.map_.gamma,
                "observable": self.observable.kind, "params": list(self.observable.params),
                "mean_shift": self.observable.mean_shift}


@dataclass(frozen=True)
class IIDSignStream(StreamSource):
    """Independent fair +-1 values, a baseline with exactly known laws."""

    seed: int = None
    sup_norm: float = 1.0

    def iter_values(self, size, rng):
        while True:
            yield 2.0 * rng.integers(0, 2, size) - 1.0

    def describe(self):
        return {"kind": "iid"}


@dataclass(frozen=True)
class InducedReturnStream(StreamSource):
    """Centred return times ``R - mean`` along the induced map on ``J``."""

    map_: MapSystem
    reference: ReferenceSet = ReferenceSet()
    mean: float = None
    burn_in: int = 1000
    cap: int = 10**7
    seed: int = None

    def iter_values(self, size, rng):
        if self.mean is None:
            raise ValueError("set mean (e.g. 1 / mu(J) by Kac's formula) before streaming")
        x = sample_invariant_in(self.map_, self.reference, size, self.burn_in, rng)
        while True:
            R, x = return_times_many(self.map_, self.reference, x, self.cap, rng, images=True)
            yield R - self.mean

    def describe(self):
        return {"kind": "induced-return", "map": self.map_.kind, "gamma": self.map_.gamma,
                "reference_set": [self.reference.a, self.reference.b], "mean": self.mean}


@dataclass(frozen=True)
class BilliardReturnStream(StreamSource):
    """Centred return times to the first-arc-collision set of a stadium."""

    flat_half_length: float = 1.0
    mean: float = None
    cap: int = 10**6
    seed: int = None

    def iter_values(self, size, rng):
        from .billiards import StadiumTable, return_times_X, sample_X_many

        if self.mean is None:
            raise ValueError("set mean (e.g. 1 / mu(X) by Kac's formula) before streaming")
        table = StadiumTable(self.flat_half_length)
        q, phi = sample_X_many(table, size, rng)
        while True:
            R, q, phi, _ = return_times_X(table, q, phi, self.cap)
            yield R - self.mean

    def describe(self):
        return {"kind": "billiard-return", "flat_half_length": self.flat_half_length, "mean": self.mean}


# --------------------------------------------------------------------------
# configuration and the ensemble pass


@dataclass(frozen=True)
class DeviationConfig:
    eps: float
    N_grid: tuple
    N_max: int = None
    ensemble: int = 10**4
    moment_order: int = 2
    sensitivity: bool = False

    def __post_init__(self):
        check_positive(self.eps, "eps")
        grid = check_grid(self.N_grid, "N_grid", minimum=1)
        object.__setattr__(self, "N_grid", tuple(int(n) for n in grid))
        if self.N_max is None:
            object.__setattr__(self, "N_max", 10 * grid[-1])
        check_count(self.N_max, "N_max")
        if self.N_max < grid[-1]:
            raise ValueError("N_max must be >= max(N_grid)")
        check_count(self.ensemble, "ensemble")
        if self.moment_order < 2 or self.moment_order % 2:
            raise ValueError("moment_order must be an even integer >= 2")

    @property
    def horizon(self):
        return 2 * self.N_max if self.sensitivity else self.N_max


def _ensemble_chunk(src, size, seed, grid, N_max, horizon):
    """One pass over ``size`` orbits.

    Returns per-member arrays of shape (G, size): ``avg`` = S_N/N at grid
    points, ``block`` = max |S_n/n| over [N_g, N_{g+1}) (last block up to
    N_max), ``extra`` = max over (N_max, horizon], ``maxdev`` = max_{n<=N}
    |S_N - S_n| / N at grid points.
    """
    rng = np.random.default_rng(seed)
    G = len(grid)
    avg = np.zeros((G, size))
    block = np.zeros((G, size))
    maxdev = np.zeros((G, size))
    extra = np.zeros(size)
    S = np.zeros(size)
    lo = np.zeros(size)
    hi = np.zeros(size)
    values = src.iter_values(size, rng)
    g = -1  # current block index
    for n in range(1, horizon + 1):
        S += next(values)
        np.minimum(lo, S, out=lo)
        np.maximum(hi, S, out=hi)
        if n < grid[0]:
            continue
        a = np.abs(S) / n
        if n > N_max:
            np.maximum(extra, a, out=extra)
            continue
        if g + 1 < G and n == grid[g + 1]:
            g += 1
            avg[g] = S / n
            maxdev[g] = np.maximum(S - lo, hi - S) / n
        np.maximum(block[g], a, out=block[g])
    return avg, block, extra, maxdev


@dataclass
class EnsembleStatistics:
    """Per-member statistics from one ensemble pass (see :func:`run_ensemble`)."""

    grid: np.ndarray
    N_max: int
    avg: np.ndarray
    sup: np.ndarray
    sup_extended: np.ndarray = None
    maxdev: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.avg.shape[1]

    def ld_tail(self, eps):
        counts = (np.abs(self.avg) >= eps).sum(axis=1)
        return TailCurve.from_counts(self.grid, counts, self.size, meta={**self.meta, "eps": eps})

    def mld_tail(self, eps):
        counts = (self.sup >= eps).sum(axis=1)
        meta = {**self.meta, "eps": eps, "N_max": self.N_max}
        if self.sup_extended is not None:
            ext = TailCurve.from_counts(self.grid, (self.sup_extended >= eps).sum(axis=1), self.size)
            base = TailCurve.from_counts(self.grid, counts, self.size)
            diff = np.abs(ext.values - base.values)
            meta["sensitivity"] = {
                "horizon": 2 * self.N_max,
                "values": ext.values.tolist(),
                "max_abs_diff": float(diff.max()),
                "ci_halfwidths": base.ci_halfwidths.tolist(),
                "within_ci": bool(np.all(diff <= base.ci_halfwidths)),
            }
        return TailCurve.from_counts(self.grid, counts, self.size, meta=meta)

    def moment_curve(self, order=2, maximal=False):
        data = np.abs(self.maxdev if maximal else self.avg) ** order
        mean = data.mean(axis=1)
        stderr = data.std(axis=1, ddof=1) / np.sqrt(self.size)
        name = f"E|max_n (S_N - S_n)/N|^{order}" if maximal else f"E|S_N/N|^{order}"
        return DecayCurve(self.grid, mean, order, name, stderr, meta=dict(self.meta))


def run_ensemble(src, cfg, workers=1):
    """One shared ensemble pass for ``src`` under ``cfg``."""
    grid = np.asarray(cfg.N_grid, dtype=np.int64)
    tasks = [(src, n, seed, grid, cfg.N_max, cfg.horizon)
             for n, seed in split_ensemble(cfg.ensemble, src.seed)]
    parts = run_tasks(_ensemble_chunk, tasks, workers)
    avg = np.concatenate([p[0] for p in parts], axis=1)
    block = np.concatenate([p[1] for p in parts], axis=1)
    extra = np.concatenate([p[2] for p in parts])
    maxdev = np.concatenate([p[3] for p in parts], axis=1)
    # sup over [N_g, N_max] is the reverse running max of the block maxima
    sup = np.maximum.accumulate(block[::-1], axis=0)[::-1]
    sup_ext = np.maximum(sup, extra[None, :]) if cfg.sensitivity else None
    meta = {"stream": src.describe(), "ensemble": cfg.ensemble, "truncation_horizon": cfg.N_max}
    return EnsembleStatistics(grid, cfg.N_max, avg, sup, sup_ext, maxdev, meta)


def ld_tail(src, cfg, workers=1):
    """Ensemble fraction with ``|S_N / N| >= eps`` for each ``N`` in the grid."""
    return run_ensemble(src, cfg, workers).ld_tail(cfg.eps)


def mld_tail(src, cfg, workers=1):
    """Ensemble fraction with ``max_{N <= n <= N_max} |S_n / n| >= eps``."""
    return run_ensemble(src, cfg, workers).mld_tail(cfg.eps)


def moment_curve(src, cfg, maximal=False, workers=1):
    """``E|S_N/N|^{2p}`` (or its maximal variant) with Monte-Carlo stderr."""
    return run_ensemble(src, cfg, workers).moment_curve(cfg.moment_order, maximal)


# --------------------------------------------------------------------------
# power-law fits


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    points_used: int
    window: tuple = (None, None)

    @property
    def ci95(self):
        """95% t-interval for the slope."""
        if self.points_used <= 2:
            return (-np.inf, np.inf)
        half = stats.t.ppf(0.975, self.points_used - 2) * self.stderr
        return (self.slope - half, self.slope + half)

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr,
                "r_squared": self.r_squared, "points_used": self.points_used,
                "ci95": list(self.ci95), "window": list(self.window)}


def fit_exponent(curve, window=None, min_points=5):
    """Least-squares fit of ``log(value)`` against ``log(N)``.

    Only grid points inside ``window = (lo, hi)`` with positive value are
    used; fewer than ``min_points`` raises :class:`InsufficientPointsError`.
    """
    N = np.asarray(curve.grid, dtype=float)
    y = np.asarray(curve.values, dtype=float)
    lo, hi = window if window is not None else (N.min(), N.max())
    keep = (N >= lo) & (N <= hi) & (y > 0) & (N > 0)
    if keep.sum() < min_points:
        raise InsufficientPointsError(f"{keep.sum()} positive points in window, need {min_points}")
    lx, ly = np.log(N[keep]), np.log(y[keep])
    (slope, intercept), res, *_ = np.polyfit(lx, ly, 1, full=True)
    n = int(keep.sum())
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    sxx = float(((lx - lx.mean()) ** 2).sum())
    stderr = float(np.sqrt(ss_res / (n - 2) / sxx)) if n > 2 else 0.0
    return ExponentFit(float(slope), float(intercept), stderr, float(r2), n, (float(lo), float(hi)))
