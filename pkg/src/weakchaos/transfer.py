"""Ulam discretisation of the transfer operator of an interval map.

The unit interval is cut into ``k`` equal cells ``A_i`` and the map is
replaced by the Markov chain with weights

    U[i, j] = Leb(A_i & f^{-1} A_j) / Leb(A_i).

Its stationary vector ``pi`` (a cellwise density) approximates the invariant
density. Observables are cell vectors; the transfer operator with respect to
the discrete invariant measure ``m_i = pi_i / k`` acts by

    (P phi)_j = sum_i m_i phi_i U[i, j] / m_j,

which preserves integrals against ``m`` and fixes constants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .curves import DecayCurve
from .exceptions import ConvergenceError
from .utils import check_count, check_grid, check_random_state

MAX_SWEEPS = 10**5


@dataclass(frozen=True)
class UlamOperator:
    k: int
    U: sparse.csr_matrix
    pi: np.ndarray
    method: str = "mc"
    mc_per_cell: int = 0
    sweeps: int = 0

    @property
    def edges(self):
        return np.linspace(0.0, 1.0, self.k + 1)

    @property
    def midpoints(self):
        return (np.arange(self.k) + 0.5) / self.k

    @property
    def cell_masses(self):
        return self.pi / self.k

    def discretize(self, func, points_per_cell=16):
        """Cell averages of ``func`` by the composite midpoint rule."""
        offsets = (np.arange(points_per_cell) + 0.5) / points_per_cell
        x = (np.arange(self.k)[:, None] + offsets[None, :]) / self.k
        return np.asarray(func(x.ravel()), dtype=float).reshape(self.k, points_per_cell).mean(axis=1)

    def integral(self, phi):
        return float(np.dot(self.cell_masses, phi))

    def norm(self, phi, p=2.0):
        """L^p norm of a cell vector with respect to the Ulam measure."""
        return float(np.dot(self.cell_masses, np.abs(phi) ** p) ** (1.0 / p))

    def check(self, row_tol=1e-10, mass_tol=1e-8):
        rows = np.asarray(self.U.sum(axis=1)).ravel()
        if np.max(np.abs(rows - 1.0)) > row_tol:
            raise AssertionError("Ulam matrix is not row-stochastic")
        if np.any(self.pi < 0) or abs(self.pi.sum() / self.k - 1.0) > mass_tol:
            raise AssertionError("stationary density is not a probability density")


def _inverse_left_intermittent(y, gamma, iters=60):
    """Solve ``x + 2^g x^(1+g) = y`` on [0, 1/2] by Newton from above.

    The left branch is convex and increasing, so Newton started at ``x = y``
    (which lies right of the root) decreases monotonically onto it.
    """
    c = 2.0**gamma
    x = np.minimum(np.asarray(y, dtype=float), 0.5)
    for _ in range(iters):
        fx = x + c * x ** (1 + gamma) - y
        x_new = np.maximum(x - fx / (1 + c * (1 + gamma) * x**gamma), 0.0)
        if np.all(np.abs(x_new - x) <= 1e-17):
            return x_new
        x = x_new
    return x


def _branches(map_):
    """(domain interval, inverse) pairs for the increasing branches."""
    if map_.kind == "doubling":
        return [((0.0, 0.5), lambda y: y / 2), ((0.5, 1.0), lambda y: (y + 1) / 2)]
    g = map_.gamma
    return [((0.0, 0.5), lambda y: _inverse_left_intermittent(y, g)),
            ((0.5, 1.0), lambda y: (y + 1) / 2)]


def _exact_matrix(map_, k):
    edges = np.linspace(0.0, 1.0, k + 1)
    rows, cols, vals = [], [], []
    for (lo, hi), inv in _branches(map_):
        pre = inv(edges)
        pts = np.unique(np.clip(np.concatenate([edges, pre]), lo, hi))
        left, right = pts[:-1], pts[1:]
        length = right - left
        keep = length > 0
        left, right, length = left[keep], right[keep], length[keep]
        mid = (left + right) / 2
        i = np.minimum((mid * k).astype(np.int64), k - 1)
        j = np.minimum((map_._apply(mid) * k).astype(np.int64), k - 1)
        rows.append(i)
        cols.append(j)
        vals.append(length * k)
    U = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(k, k)).tocsr()
    U.sum_duplicates()
    return U


def _mc_matrix(map_, k, mc_per_cell, rng):
    u = rng.random((k, mc_per_cell))
    x = (np.arange(k)[:, None] + u) / k
    j = np.minimum((map_._apply(x) * k).astype(np.int64), k - 1)
    i = np.repeat(np.arange(k), mc_per_cell)
    data = np.full(i.size, 1.0 / mc_per_cell)
    U = sparse.coo_matrix((data, (i, j.ravel())), shape=(k, k)).tocsr()
    U.sum_duplicates()
    return U


def stationary_density(U, tol=1e-13, max_sweeps=MAX_SWEEPS):
    """Left fixed vector of a row-stochastic matrix by power iteration.

    Normalised as a density (mean 1). Returns ``(pi, sweeps)``.
    """
    k = U.shape[0]
    UT = U.T.tocsr()
    pi = np.ones(k)
    for sweep in range(1, max_sweeps + 1):
        new = UT @ pi
        new *= k / new.sum()
        if np.abs(new - pi).sum() / k < tol:
            return new, sweep
        pi = new
    raise ConvergenceError(f"power iteration did not converge in {max_sweeps} sweeps")


def build_ulam(map_, k=2**12, mc_per_cell=200, random_state=None, method="mc"):
    """Ulam matrix of ``map_`` on ``k`` equal cells.

    ``method="mc"`` samples ``mc_per_cell`` uniform points per cell;
    ``method="exact"`` integrates cell preimages through the inverse
    branches.
    """
    k = check_count(k, "k", 2)
    if method == "mc":
        mc_per_cell = check_count(mc_per_cell, "mc_per_cell")
        U = _mc_matrix(map_, k, mc_per_cell, check_random_state(random_state))
    elif method == "exact":
        U = _exact_matrix(map_, k)
        mc_per_cell = 0
    else:
        raise ValueError(f"unknown method {method!r}")
    pi, sweeps = stationary_density(U)
    op = UlamOperator(k, U, pi, method, mc_per_cell, sweeps)
    op.check()
    return op


def apply_transfer(op, phi, n=1):
    """``P^n phi`` for a cell vector ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (op.k,) or not np.all(np.isfinite(phi)):
        raise ValueError("phi must be a finite vector with one entry per cell")
    m = op.cell_masses
    UT = op.U.T.tocsr()
    safe = np.where(m > 0, m, 1.0)
    out = phi
    for _ in range(check_count(n, "n", 0)):
        out = np.where(m > 0, (UT @ (m * out)) / safe, 0.0)
    return out


def norm_decay(op, phi, p=2.0, n_grid=range(0, 21), name=""):
    """``||P^n phi||_p`` over ``n_grid`` after removing the Ulam mean of ``phi``."""
    phi = np.asarray(phi, dtype=float)
    n_grid = check_grid(list(n_grid), "n_grid", minimum=0)
    v = phi - op.integral(phi)
    norms = []
    done = 0
    for n in n_grid:
        v = apply_transfer(op, v, int(n) - done)
        done = int(n)
        norms.append(op.norm(v, p))
    return DecayCurve(n_grid, norms, p, name, meta={"k": op.k, "method": op.method})


def decay_factor(curve, floor=1e-300):
    """Per-step factor ``exp(slope)`` of a log-linear fit of the norms.

    Uses grid points whose norm exceeds ``floor``.
    """
    keep = curve.norms > floor
    if keep.sum() < 2:
        raise ValueError("need at least two positive norms")
    slope = np.polyfit(curve.n[keep].astype(float), np.log(curve.norms[keep]), 1)[0]
    return float(np.exp(slope))
