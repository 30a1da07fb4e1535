"""Curve containers shared by the estimators, with CSV/JSON serialisation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .utils import wilson_halfwidth


@dataclass
class TailCurve:
    """Empirical tail probabilities on an integer grid.

    ``values[i]`` estimates ``P(statistic > N[i])`` (or ``>= eps``, depending
    on the producer); ``ci_halfwidths`` are Wilson 95% half-widths.
    """

    N: np.ndarray
    values: np.ndarray
    sample_size: int
    ci_halfwidths: np.ndarray
    counts: np.ndarray = None
    censored_fraction: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        self.ci_halfwidths = np.asarray(self.ci_halfwidths, dtype=float)

    @classmethod
    def from_counts(cls, N, counts, sample_size, **kwargs):
        counts = np.asarray(counts)
        return cls(N, counts / sample_size, sample_size, wilson_halfwidth(counts, sample_size),
                   counts, **kwargs)

    @property
    def grid(self):
        return self.N

    def to_csv(self, symbol="P(R>N)"):
        return _csv(["N [iterations]", f"{symbol} [probability]", "ci_halfwidth [probability]"],
                    zip(self.N.tolist(), self.values.tolist(), self.ci_halfwidths.tolist()))

    def to_dict(self):
        return {
            "N": self.N.tolist(),
            "values": self.values.tolist(),
            "ci_halfwidths": self.ci_halfwidths.tolist(),
            "sample_size": int(self.sample_size),
            "censored_fraction": float(self.censored_fraction),
            "meta": self.meta,
        }


@dataclass
class DecayCurve:
    """Nonnegative values (norms or moments) on an integer grid."""

    n: np.ndarray
    norms: np.ndarray
    p: float = 2.0
    observable: str = ""
    stderr: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)
        self.norms = np.asarray(self.norms, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)

    @property
    def grid(self):
        return self.n

    @property
    def values(self):
        return self.norms

    def to_csv(self, symbol="||P^n phi||_p"):
        cols = ["n [iterations]", f"{symbol} [dimensionless]"]
        rows = zip(self.n.tolist(), self.norms.tolist())
        if self.stderr is not None:
            cols.append("stderr [dimensionless]")
            rows = zip(self.n.tolist(), self.norms.tolist(), self.stderr.tolist())
        return _csv(cols, rows)

    def to_dict(self):
        out = {"n": self.n.tolist(), "norms": self.norms.tolist(), "p": self.p,
               "observable": self.observable, "meta": self.meta}
        if self.stderr is not None:
            out["stderr"] = self.stderr.tolist()
        return out


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
