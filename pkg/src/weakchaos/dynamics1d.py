"""Interval maps on [0, 1]: the doubling map and the intermittent map.

The intermittent map with parameter ``gamma`` in [0, 1) is::

    T(x) = x + 2**gamma * x**(1 + gamma)   for 0 <= x <= 1/2
    T(x) = 2*x - 1                         for 1/2 < x <= 1

It has a neutral fixed point at 0, which slows mixing down to a polynomial
rate governed by ``gamma``.

Floating point and expanding linear branches
--------------------------------------------
``2x mod 1`` shifts one binary digit out per step, so a float orbit of the
doubling map reaches 0 after at most ~1075 steps. Ensemble routines therefore
iterate with :meth:`MapSystem.advance`, which appends a fresh random digit at
the 2**-53 position after every application of a linear branch. For a start
point drawn uniformly this is the exact law of the true orbit, with the start
point's trailing digits revealed lazily. Plain :meth:`MapSystem.step` and
:func:`orbit` apply the formula as written.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DomainError
from .utils import check_count, check_random_state, split_ensemble, run_tasks

_ULP = 2.0**-53


@dataclass(frozen=True)
class MapSystem:
    """A piecewise expanding map of [0, 1] with two increasing branches."""

    kind: str = "intermittent"
    gamma: float = 0.5

    def __post_init__(self):
        if self.kind not in ("doubling", "intermittent"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")

    @classmethod
    def doubling(cls):
        return cls("doubling", 0.0)

    @classmethod
    def intermittent(cls, gamma):
        return cls("intermittent", float(gamma))

    @property
    def domain(self):
        return (0.0, 1.0)

    def left_branch(self, x):
        """Branch index: True on the first branch."""
        x = np.asarray(x, dtype=float)
        if self.kind == "doubling":
            return x < 0.5
        return x <= 0.5

    def _apply(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "doubling":
            y = 2.0 * x
            return np.where(y >= 1.0, y - 1.0, y)
        left = x <= 0.5
        # clip keeps the power finite on the unused branch
        xl = np.where(left, x, 0.0)
        return np.where(left, xl + 2.0**self.gamma * xl ** (1.0 + self.gamma), 2.0 * x - 1.0)

    def step(self, x):
        """Apply the map once. Works elementwise on arrays."""
        check_in_unit_interval(x)
        y = self._apply(x)
        return float(y) if np.ndim(y) == 0 else y

    __call__ = step

    def derivative(self, x):
        """|Df(x)|, using the left branch formula at x = 1/2."""
        x = np.asarray(x, dtype=float)
        if self.kind == "doubling":
            d = np.full_like(x, 2.0)
        else:
            g = self.gamma
            d = np.where(x <= 0.5, 1.0 + 2.0**g * (1.0 + g) * np.where(x <= 0.5, x, 0.0) ** g, 2.0)
        return float(d) if d.ndim == 0 else d

    def advance(self, x, rng):
        """One step on an array of states, refreshing the lowest binary digit
        on linear branches (see module docstring)."""
        y = self._apply(x)
        linear = ~self.left_branch(x) if self.kind == "intermittent" else np.ones(np.shape(x), bool)
        bits = rng.integers(0, 2, size=np.shape(x))
        return np.where(linear & (y < 1.0), y + bits * _ULP, y)


def check_in_unit_interval(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


# --------------------------------------------------------------------------
# observables

_KINDS = ("indicator", "coordinate", "cosine", "constant", "table")


@dataclass(frozen=True)
class Observable:
    """A bounded function on [0, 1].

    ``raw_bounds`` are known lower/upper bounds of the uncentred function,
    so ``sup_norm`` can be stored rather than searched for. Evaluation
    subtracts ``mean_shift``.
    """

    kind: str
    params: tuple = ()
    raw_bounds: tuple = (0.0, 0.0)
    mean_shift: float = 0.0
    sup_norm: float = field(init=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        lo, hi = self.raw_bounds
        object.__setattr__(self, "sup_norm", float(max(abs(lo - self.mean_shift), abs(hi - self.mean_shift))))

    @classmethod
    def indicator(cls, a, b):
        if not 0.0 <= a < b <= 1.0:
            raise ValueError("indicator needs 0 <= a < b <= 1")
        return cls("indicator", (float(a), float(b)), (0.0, 1.0))

    @classmethod
    def coordinate(cls):
        return cls("coordinate", (), (0.0, 1.0))

    @classmethod
    def cosine(cls, frequency=1):
        return cls("cosine", (int(frequency),), (-1.0, 1.0))

    @classmethod
    def constant(cls, c):
        return cls("constant", (float(c),), (float(c), float(c)))

    @classmethod
    def table(cls, values):
        """Piecewise constant on ``len(values)`` equal cells of [0, 1]."""
        values = tuple(float(v) for v in values)
        return cls("table", values, (min(values), max(values)))

    def raw(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator":
            a, b = self.params
            return ((x >= a) & (x <= b)).astype(float)
        if self.kind == "coordinate":
            return x.copy()
        if self.kind == "cosine":
            return np.cos(2 * np.pi * self.params[0] * x)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        k = len(self.params)
        idx = np.minimum((x * k).astype(np.int64), k - 1)
        return np.asarray(self.params)[idx]

    def __call__(self, x):
        y = self.raw(x) - self.mean_shift
        return float(y) if np.ndim(y) == 0 else y

    def centered(self, mean):
        """Copy with ``mean_shift`` set to ``mean``."""
        return replace(self, mean_shift=float(mean))

    def lebesgue_mean(self):
        if self.kind == "indicator":
            a, b = self.params
            return b - a
        if self.kind == "coordinate":
            return 0.5
        if self.kind == "cosine":
            return 0.0
        if self.kind == "constant":
            return self.params[0]
        return float(np.mean(self.params))


def _mean_chunk(map_, obs, size, seed, steps, burn_in):
    rng = np.random.default_rng(seed)
    x = rng.random(size)
    for _ in range(burn_in):
        x = map_.advance(x, rng)
    total = 0.0
    for _ in range(steps):
        total += obs.raw(x).sum()
        x = map_.advance(x, rng)
    return total


def estimate_mean(map_, obs, n_steps=10**7, orbits=1000, burn_in=1000, random_state=None, workers=1):
    """Space average of the raw observable over the invariant measure.

    Exact for the doubling map (Lebesgue is invariant). Otherwise an average
    over ``orbits`` independent orbits of ``n_steps // orbits`` steps each.
    """
    if map_.kind == "doubling":
        return obs.lebesgue_mean()
    steps = max(1, n_steps // orbits)
    tasks = [(map_, obs, n, seed, steps, burn_in) for n, seed in split_ensemble(orbits, random_state, chunk_size=250)]
    return float(sum(run_tasks(_mean_chunk, tasks, workers)) / (orbits * steps))


def centered_observable(map_, obs, **kwargs):
    """``obs`` with its invariant mean removed (see :func:`estimate_mean`)."""
    return obs.centered(estimate_mean(map_, obs.centered(0.0), **kwargs))


# --------------------------------------------------------------------------
# orbits and sums


@dataclass(frozen=True)
class Orbit:
    x0: float
    points: np.ndarray

    @property
    def length(self):
        """Number of steps taken (``len(points) - 1``)."""
        return len(self.points) - 1


def orbit(map_, x0, n):
    """Points ``x0, f(x0), ..., f^n(x0)`` by plain iteration."""
    check_in_unit_interval(x0, "x0")
    n = check_count(n, "n")
    pts = np.empty(n + 1)
    pts[0] = x = float(x0)
    for i in range(1, n + 1):
        x = float(map_._apply(x))
        pts[i] = x
    return Orbit(float(x0), pts)


def birkhoff_sum(map_, obs, x0, n):
    """``sum(obs(f^i x0) for i in range(n))``."""
    return float(np.sum(obs(orbit(map_, x0, n).points[:-1])))


def sample_invariant(map_, burn_in=1000, random_state=None):
    """One approximately invariant-distributed point: ``f^burn_in(u)``, u uniform."""
    return float(sample_invariant_many(map_, 1, burn_in, random_state)[0])


def sample_invariant_many(map_, size, burn_in=1000, random_state=None):
    """``size`` independent draws of ``f^burn_in(u)``."""
    if burn_in < 1000:
        raise ValueError(f"burn_in must be >= 1000, got {burn_in}")
    rng = check_random_state(random_state)
    x = rng.random(size)
    for _ in range(burn_in):
        x = map_.advance(x, rng)
    return x
