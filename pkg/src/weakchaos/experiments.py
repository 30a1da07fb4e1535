"""Experiment runners behind the command line.

Each runner takes a validated experiment model, an integer seed and a
worker count, and returns ``(results, tables)``: a JSON-ready dict and a
mapping ``name -> csv text``. Runners draw every random stream from
``SeedSequence(seed).spawn(...)`` so outputs depend only on the seed.
"""
from __future__ import annotations

import numpy as np

from . import billiards, deviations, dynamics1d, inducing, pointproc, transfer
from .curves import _csv
from .exceptions import InsufficientPointsError

#: kind -> (one-line description, anchor of the statement it probes)
EXPERIMENTS = {
    "mld": ("maximal large deviation tail of a Birkhoff average, with power-law fit",
            "MLD: mu(sup_{n>=N} |S_n/n| >= eps) ~ N^-beta"),
    "ld": ("large deviation tail and moment curves of a Birkhoff average",
           "LD/moments: E|S_N/N|^2p <~ N^-beta"),
    "return-tail": ("tail of the first return time to a reference interval",
                    "return times: R in L^(1/gamma)(J)"),
    "ulam-decay": ("Ulam transfer operator and the decay of ||P^n phi||_p",
                   "decay of correlations: ||P^n phi||_p^p <= C n^-beta"),
    "billiard-invariance": ("stadium checks: SRB invariance, reversibility, free path, cones",
                            "billiard: cos(phi) dphi dq invariant, Df C^u in C^u"),
    "hitting": ("first hitting times of small holes against Exp(1)",
                "hitting law: |mu(tau_r > t/mu(B_r)) - e^-t| <~ r^a"),
    "point-process": ("hole-entry point process against a Poisson process",
                      "Poisson approximation: d_TV(N^{r,q,T}, P) <~ r^a"),
    "l-alpha-s": ("escape-rate limit L_{alpha,s}(z) and the extremal index",
                  "extremal index: L_{alpha,s}(z) = 1 or 1 - 1/|Df^p(z)|"),
    "gmy-diagnostics": ("expansion and distortion of the first return map",
                        "GMY structure: ||DF^-1|| <= rho, bounded distortion"),
}

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


def _fit(curve, window=None):
    try:
        return deviations.fit_exponent(curve, window).to_dict()
    except InsufficientPointsError as exc:
        return {"error": str(exc)}


def _center(system, center):
    """Default hole center: a golden-ratio point of the phase space."""
    if center is not None:
        return center
    if isinstance(system, billiards.StadiumTable):
        return GOLDEN * system.perimeter
    return GOLDEN


# --------------------------------------------------------------------------
# deviations


def _stream(cfg, seeds, workers):
    """Build the stream source; returns ``(source, info)``."""
    if cfg.stream == "iid":
        return deviations.IIDSignStream(seed=seeds[0]), {}
    if cfg.stream == "billiard-return":
        table = cfg.system.build()
        q, phi = billiards.sample_srb_many(table, cfg.return_mean_samples, seeds[1])
        mu_X = float(billiards.in_X_many(table.component(q), billiards.previous_component(table, q, phi)).mean())
        src = deviations.BilliardReturnStream(table.flat_half_length, 1.0 / mu_X, seed=seeds[0])
        return src, {"reference_measure": mu_X, "mean_return_time": 1.0 / mu_X}
    map_ = cfg.system.build()
    if cfg.stream == "induced-return":
        J = inducing.ReferenceSet(*cfg.reference)
        if map_.kind == "doubling":
            mu_J = J.length
        else:
            pts = dynamics1d.sample_invariant_many(map_, cfg.return_mean_samples, cfg.burn_in, seeds[1])
            mu_J = float(J.contains(pts).mean())
        src = deviations.InducedReturnStream(map_, J, 1.0 / mu_J, cfg.burn_in, seed=seeds[0])
        return src, {"reference_measure": mu_J, "mean_return_time": 1.0 / mu_J}
    obs = cfg.observable.build()
    info = {}
    if cfg.observable.center:
        mean = dynamics1d.estimate_mean(map_, obs, n_steps=cfg.observable.mean_steps,
                                        random_state=seeds[1], workers=workers)
        obs = obs.centered(mean)
        info["observable_mean"] = mean
    return deviations.MapStream(map_, obs, cfg.burn_in, seed=seeds[0]), info


def run_deviation(cfg, seed, workers=1):
    seeds = _seeds(seed, 2)
    src, info = _stream(cfg, seeds, workers)
    eps = cfg.eps if cfg.eps is not None else cfg.eps_fraction * src.sup_norm
    dcfg = deviations.DeviationConfig(eps, tuple(cfg.N_grid), cfg.N_max, cfg.ensemble,
                                      cfg.moment_order, cfg.sensitivity and cfg.kind == "mld")
    ens = deviations.run_ensemble(src, dcfg, workers)
    ld = ens.ld_tail(eps)
    window = tuple(cfg.fit_window) if cfg.fit_window else None
    results = {**info, "eps": eps, "sup_norm": src.sup_norm if np.isfinite(src.sup_norm) else None,
               "truncation_horizon": dcfg.N_max, "ensemble": cfg.ensemble,
               "ld_tail": ld.to_dict(), "ld_fit": _fit(ld, window)}
    tables = {"ld_tail": ld.to_csv("mu(|S_N/N| >= eps)")}
    if cfg.kind == "mld":
        mld = ens.mld_tail(eps)
        results["mld_tail"] = mld.to_dict()
        results["fit"] = _fit(mld, window)
        results["sensitivity"] = mld.meta.get("sensitivity")
        tables["mld_tail"] = mld.to_csv("mu(max_{N<=n<=N_max} |S_n/n| >= eps)")
    else:
        plain = ens.moment_curve(cfg.moment_order)
        maximal = ens.moment_curve(cfg.moment_order, maximal=True)
        results["moments"] = plain.to_dict()
        results["maximal_moments"] = maximal.to_dict()
        results["fit"] = _fit(plain, window)
        p = cfg.moment_order
        tables["moments"] = plain.to_csv(f"E|S_N/N|^{p}")
        tables["maximal_moments"] = maximal.to_csv(f"E|max_n (S_N - S_n)/N|^{p}")
    return results, tables


# --------------------------------------------------------------------------
# inducing


def run_return_tail(cfg, seed, workers=1):
    map_ = cfg.system.build()
    J = inducing.ReferenceSet(*cfg.reference)
    tail = inducing.return_tail(map_, J, cfg.samples, cfg.N_grid, _seeds(seed, 1)[0], cfg.cap, workers)
    # the cap is at least max(N_grid), so every grid value is exact and
    # censoring never cuts the fit window
    window = tuple(cfg.fit_window) if cfg.fit_window else None
    results = {"tail": tail.to_dict(), "fit": _fit(tail, window),
               "target_slope": -1.0 / map_.gamma if map_.kind == "intermittent" and map_.gamma > 0 else None}
    return results, {"return_tail": tail.to_csv("Leb_J(R > N)")}


def run_gmy(cfg, seed, workers=1):
    map_ = cfg.system.build()
    J = inducing.ReferenceSet(*cfg.reference)
    d = inducing.gmy_diagnostics(map_, J, cfg.samples, cfg.pair_distance, _seeds(seed, 1)[0], cfg.cap)
    results = {"rho_hat": d.rho_hat, "distortion_hat": d.distortion_hat,
               "branch_count_sampled": d.branch_count_sampled, "samples_used": d.samples_used,
               "pairs_used": d.pairs_used, "overflow_count": d.overflow_count}
    table = _csv(["rho_hat [dimensionless, sup 1/|DF|]", "distortion_hat [dimensionless, |log DF(x)/DF(y)|]",
                  "branch_count_sampled [count]", "pairs_used [count]"],
                 [(d.rho_hat, d.distortion_hat, d.branch_count_sampled, d.pairs_used)])
    return results, {"gmy": table}


# --------------------------------------------------------------------------
# transfer operators


def run_ulam(cfg, seed, workers=1):
    map_ = cfg.system.build()
    op = transfer.build_ulam(map_, cfg.k, cfg.mc_per_cell, _seeds(seed, 1)[0], cfg.method)
    obs = cfg.observable.build()
    curve = transfer.norm_decay(op, op.discretize(obs.raw), cfg.p, cfg.n_grid, obs.kind)
    results = {"k": op.k, "method": op.method, "sweeps": op.sweeps, "curve": curve.to_dict(),
               "decay_factor": transfer.decay_factor(curve)}
    positive = curve.n > 0
    if positive.sum() >= 5:
        sub = type(curve)(curve.n[positive], curve.norms[positive], curve.p, curve.observable)
        results["fit"] = _fit(sub, tuple(cfg.fit_window) if cfg.fit_window else None)
    if cfg.compare_exact and cfg.method == "mc":
        exact = transfer.build_ulam(map_, cfg.k, method="exact")
        diff = float(np.abs((op.U - exact.U).toarray()).max())
        tol = 3.0 / np.sqrt(cfg.mc_per_cell)
        results["exact_comparison"] = {"max_abs_diff": diff, "tolerance": tol, "within": diff <= tol}
    density = _csv(["x [cell midpoint]", "pi [density w.r.t. Lebesgue]"],
                   zip(op.midpoints.tolist(), op.pi.tolist()))
    return results, {"decay": curve.to_csv(f"||P^n phi||_{cfg.p:g}"), "density": density}


# --------------------------------------------------------------------------
# billiards


def run_billiard_invariance(cfg, seed, workers=1):
    table = cfg.system.build()
    s = _seeds(seed, 4)
    inv = billiards.srb_invariance(table, cfg.samples, s[0])
    rev, rev_bad = billiards.reversibility_error(table, cfg.reversibility_samples, s[1])
    mfp = billiards.mean_free_path_estimate(table, cfg.collisions, s[2])
    viol, tested = billiards.cone_violations(table, cfg.cone_vectors, s[3])
    results = {
        "invariance": inv,
        "reversibility": {"max_error": rev, "discarded": rev_bad},
        "mean_free_path": {"estimate": mfp, "expected": table.mean_free_path,
                           "relative_error": abs(mfp / table.mean_free_path - 1)},
        "cones": {"violations": viol, "tested": tested},
    }
    rows = [("ks_q", inv["ks_q"]), ("ks_sin_phi", inv["ks_sin_phi"]),
            ("reversibility_max_error", rev), ("mean_free_path", mfp),
            ("mean_free_path_expected", table.mean_free_path), ("cone_violations", viol)]
    return results, {"checks": _csv(["check [name]", "value [mixed units]"], rows)}


# --------------------------------------------------------------------------
# point processes


def _hole(system, center, r, seed, workers):
    if isinstance(system, billiards.StadiumTable):
        return pointproc.HoleSpec.billiard(system, center, r)
    return pointproc.HoleSpec.interval(system, center, r, random_state=seed, workers=workers)


def run_hitting(cfg, seed, workers=1):
    system = cfg.system.build()
    center = _center(system, cfg.center)
    seeds = _seeds(seed, 2 * len(cfg.r_values))
    rows, per_r = [], []
    for i, r in enumerate(cfg.r_values):
        hole = _hole(system, center, r, seeds[2 * i], workers)
        hs = pointproc.hitting_times(hole, cfg.samples, cfg.cap, seeds[2 * i + 1], workers)
        ks = pointproc.exponential_law_check(hs)
        half = pointproc.ks_halfwidth(len(hs))
        per_r.append({"r": r, "measure": hole.measure, "ks": ks, "ks_halfwidth": half,
                      "censored": int(hs.censored.sum()), "discarded": hs.discarded,
                      "mean_rescaled": float(hs.rescaled[~hs.censored].mean())})
        rows.append((r, hole.measure, ks, half, int(hs.censored.sum()), hs.discarded))
    ks = [p["ks"] for p in per_r]
    half = [p["ks_halfwidth"] for p in per_r]
    monotone = all(ks[j + 1] <= ks[j] + half[j] + half[j + 1] for j in range(len(ks) - 1))
    results = {"center": center, "per_r": per_r, "nonincreasing_within_ci": monotone}
    header = ["r [boundary length]", "mu(B_r) [probability]", "KS(tau*mu, Exp(1)) [dimensionless]",
              "ks_ci_halfwidth [dimensionless]", "censored [count]", "discarded [count]"]
    return results, {"hitting": _csv(header, rows)}


def run_point_process(cfg, seed, workers=1):
    system = cfg.system.build()
    center = _center(system, cfg.center)
    s = _seeds(seed, 2)
    hole = _hole(system, center, cfg.r, s[0], workers)
    samples = pointproc.point_processes(hole, cfg.samples, cfg.T, s[1], workers)
    cmp_ = pointproc.dtv_window_counts(samples, cfg.m, cfg.k_max)
    totals = np.array([c.total for c in samples], dtype=float)
    results = {"center": center, "measure": hole.measure, "fano": pointproc.fano_factor(samples),
               "mean_total": float(totals.mean()), "mean_total_stderr": float(totals.std(ddof=1) / np.sqrt(totals.size)),
               "comparison": cmp_.to_dict(), "kept": len(samples), "dropped": cfg.samples - len(samples)}
    rows = [(j, cfg.T * j / cfg.m, cfg.T * (j + 1) / cfg.m, cmp_.window_means[j], cmp_.window_vars[j])
            for j in range(cfg.m)]
    header = ["window [index]", "start [rescaled time]", "end [rescaled time]",
              "mean N(window) [count]", "var N(window) [count^2]"]
    return results, {"windows": _csv(header, rows)}


def run_l_alpha_s(cfg, seed, workers=1):
    map_ = cfg.system.build()
    est = pointproc.l_alpha_s(map_, cfg.z, cfg.alpha, cfg.s, cfg.r_grid, cfg.ensemble, _seeds(seed, 1)[0],
                              period_hint=cfg.period, workers=workers,
                              n_steps=cfg.measure_steps, orbits=cfg.measure_orbits)
    usable = [e for e in est if e.usable]
    formula = None
    if cfg.period is not None:
        formula = pointproc.extremal_index_formula(map_, cfg.z, cfg.period)
    results = {
        "z": cfg.z, "alpha": cfg.alpha, "s": cfg.s, "period": cfg.period,
        "extremal_index_formula": formula,
        "smallest_usable_r": usable[-1].r if usable else None,
        "estimate_at_smallest_r": usable[-1].estimate if usable else None,
        "boundary_center": bool(est[0].boundary),
        "per_r": [{"r": e.r, "measure": e.measure, "measure_ci": e.measure_ci, "horizon": e.horizon,
                   "survival": e.survival, "estimate": e.estimate, "ci": list(e.ci), "usable": e.usable}
                  for e in est],
    }
    header = ["r [length]", "mu(B_r(z)) [probability]", "L_{alpha,s}(z) estimate [dimensionless]",
              "ci_low [dimensionless]", "ci_high [dimensionless]", "usable [bool]"]
    rows = [(e.r, e.measure, e.estimate, e.ci[0], e.ci[1], e.usable) for e in est]
    return results, {"l_alpha_s": _csv(header, rows)}


RUNNERS = {
    "mld": run_deviation,
    "ld": run_deviation,
    "return-tail": run_return_tail,
    "ulam-decay": run_ulam,
    "billiard-invariance": run_billiard_invariance,
    "hitting": run_hitting,
    "point-process": run_point_process,
    "l-alpha-s": run_l_alpha_s,
    "gmy-diagnostics": run_gmy,
}


def list_experiments():
    """``(kind, description, anchor)`` for every experiment kind, in fixed order."""
    return [(kind, desc, anchor) for kind, (desc, anchor) in EXPERIMENTS.items()]


def run_experiment(cfg, seed, workers=1):
    return RUNNERS[cfg.kind](cfg, seed, workers)

