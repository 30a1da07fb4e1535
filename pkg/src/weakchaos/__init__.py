"""Statistics of weakly chaotic systems.

Intermittent and doubling interval maps, first returns and induced maps,
Ulam transfer operators, large and maximal large deviations of Birkhoff
averages, the stadium billiard, and hitting-time / point-process
statistics for small holes.
"""
from .billiards import PhasePoint, StadiumTable, billiard_step, build_stadium, sample_srb
from .deviations import DeviationConfig, fit_exponent, ld_tail, mld_tail, moment_curve
from .dynamics1d import MapSystem, Observable, birkhoff_sum, orbit, sample_invariant
from .inducing import ReferenceSet, first_return_time, gmy_diagnostics, return_tail
from .pointproc import HoleSpec, exponential_law_check, extremal_index_formula, hitting_time, l_alpha_s
from .transfer import apply_transfer, build_ulam, norm_decay

__version__ = "0.1.0"

__all__ = [
    "MapSystem", "Observable", "birkhoff_sum", "orbit", "sample_invariant",
    "ReferenceSet", "first_return_time", "gmy_diagnostics", "return_tail",
    "apply_transfer", "build_ulam", "norm_decay",
    "DeviationConfig", "fit_exponent", "ld_tail", "mld_tail", "moment_curve",
    "PhasePoint", "StadiumTable", "billiard_step", "build_stadium", "sample_srb",
    "HoleSpec", "exponential_law_check", "extremal_index_formula", "hitting_time", "l_alpha_s",
]
