"""Input validation, seeding and ensemble helpers shared by all modules."""
from __future__ import annotations

import numbers
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from statsmodels.stats.proportion import proportion_confint

#: Ensembles are split into chunks of this many members. The split depends
#: only on the ensemble size, never on the worker count.
CHUNK_SIZE = 2500


def check_random_state(random_state=None):
    """Turn ``random_state`` into a :class:`numpy.random.Generator`.

    Accepts ``None``, an int, a ``SeedSequence`` or an existing ``Generator``
    (returned unchanged).
    """
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(random_state)
    raise TypeError(f"cannot build a Generator from {random_state!r}")


def check_seed_sequence(random_state=None):
    """Turn ``random_state`` into a :class:`numpy.random.SeedSequence`.

    A ``Generator`` is consumed for 128 bits of entropy, so passing the same
    generator twice yields two different sequences.
    """
    if isinstance(random_state, np.random.SeedSequence):
        return random_state
    if isinstance(random_state, np.random.Generator):
        return np.random.SeedSequence(random_state.integers(0, 2**63, size=2).tolist())
    if random_state is None or isinstance(random_state, numbers.Integral):
        return np.random.SeedSequence(random_state)
    raise TypeError(f"cannot build a SeedSequence from {random_state!r}")


def split_ensemble(size, random_state=None, chunk_size=CHUNK_SIZE):
    """Split an ensemble of ``size`` members into ``(n_members, seed)`` tasks.

    Seeds are spawned from the master sequence in chunk order, so the task
    list is a pure function of ``(size, random_state)``.
    """
    size = check_count(size, "size")
    n_chunks = -(-size // chunk_size)
    seeds = check_seed_sequence(random_state).spawn(n_chunks)
    sizes = [chunk_size] * (n_chunks - 1) + [size - chunk_size * (n_chunks - 1)]
    return list(zip(sizes, seeds))


def run_tasks(func, tasks, workers=1):
    """Evaluate ``func(*task)`` for every task, preserving task order.

    With ``workers > 1`` the tasks run in a process pool; ``func`` and its
    arguments must then be picklable.
    """
    workers = check_count(workers, "workers")
    if workers == 1 or len(tasks) <= 1:
        return [func(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, *task) for task in tasks]
        return [fut.result() for fut in futures]


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(value, name, allow_zero=False):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")
    return value


def check_grid(grid, name="N_grid", minimum=0):
    """Validate a strictly increasing grid of integers."""
    arr = np.asarray(grid)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError(f"{name} must contain integers")
        arr = arr.astype(np.int64)
    if np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if arr[0] < minimum:
        raise ValueError(f"{name} entries must be >= {minimum}")
    return arr.astype(np.int64)


def log_grid(start, stop, num):
    """Integer grid roughly evenly spaced in log scale, duplicates removed."""
    return np.unique(np.round(np.geomspace(start, stop, num)).astype(np.int64))


def wilson_interval(count, nobs, alpha=0.05):
    """Wilson score interval ``(low, high)`` for a binomial proportion."""
    count = np.asarray(count)
    low, high = proportion_confint(count, nobs, alpha=alpha, method="wilson")
    return np.asarray(low, dtype=float), np.asarray(high, dtype=float)


def wilson_halfwidth(count, nobs, alpha=0.05):
    low, high = wilson_interval(count, nobs, alpha)
    return (high - low) / 2
