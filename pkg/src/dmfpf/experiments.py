"""The seven canned experiments behind the command-line runner.

Each experiment function takes the resolved config dictionary plus an output
directory, runs the corresponding library machinery, and writes its artifacts
(`meta.json` is written by the caller):

    filter-compare -> filter.csv (one per seed) + report.json
    gain-eval      -> gain.csv
    poc            -> poc.csv + report.json
    bounds         -> bounds.csv + report.json
    limit-enkbf    -> limit.csv + report.json
    constants      -> report.json
    lln            -> lln.csv + report.json

CSV column sets are versioned and frozen:

    filter.csv : t, truth_1..d, mean_fpf_1..d, mean_enkbf_1..d, mean_kb_1..d,
                 mean_sir_1..d, var_fpf_1..d, var_enkbf_1..d, var_kb_1..d,
                 var_sir_1..d, monitor_min_q, residual
    poc.csv    : N, rep, sup_D, zeta_hat
    gain.csv   : x_1..d, K_exact, K_dm, K_const, epsilon
    bounds.csv : epsilon, c_v, c_g, bound1, measured_sup_K, bound2,
                 measured_sup_gradK
    limit.csv  : multiplier, epsilon, mean_dm_gain, const_gain, rel_gap
    lln.csv    : N, rep, gap_sq
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .diagnostics import compute_constants, lln_gain_gap, rate_regression, verify_kernel_lipschitz
from .errors import ConfigError, ScopeError
from .filtering import SimConfig, run_coupled_poc, run_filter_compare
from .gain import GainConfig, compute_gain_field, constant_gain, exact_gain_1d, gain_at_points
from .kernels import Ensemble, KernelConfig, build_markov
from .meanfield import DensityGrid, gain_bound_certificate, poincare_check, solve_meanfield_fixed_point
from .models import ModelSpec
from .io import write_csv, write_json

EXPERIMENTS = ("filter-compare", "gain-eval", "poc", "bounds", "limit-enkbf",
               "constants", "lln")


def model_from_config(cfg: dict) -> ModelSpec:
    m = cfg.get("model", {})
    return ModelSpec(
        drift=m.get("drift", "linear"),
        drift_params=m.get("drift_params", {"a": -1.0}),
        obs=m.get("obs", "linear"),
        obs_params=m.get("obs_params", {"c": 1.0}),
        dim=m.get("dim", 1),
    )


def gain_from_config(cfg: dict) -> GainConfig:
    g = cfg.get("gain", {})
    return GainConfig(
        epsilon=g.get("epsilon", 0.5),
        mode=g.get("mode", "to_tolerance"),
        tol=g.get("tol", 1e-8),
        max_iter=g.get("max_iter"),
        iterates=g.get("iterates"),
        hhat=g.get("hhat", "pi"),
    )


def sim_from_config(cfg: dict) -> SimConfig:
    s = cfg.get("sim", {})
    return SimConfig(
        dt=s.get("dt", 0.005),
        horizon=s.get("horizon", 1.0),
        seed=cfg["seed"],
        n_particles=s.get("n_particles", 128),
        gain=gain_from_config(cfg),
        delta=s.get("delta", 0.1),
        init_mean=s.get("init_mean", 0.0),
        init_var=s.get("init_var", 1.0),
    )


def _params(cfg):
    return cfg.get("experiment_params", {})


# ---------------------------------------------------------------------------


def run_filter_compare_experiment(cfg: dict, outdir: Path) -> dict:
    model = model_from_config(cfg)
    sim = sim_from_config(cfg)
    p = _params(cfg)
    n_seeds = int(p.get("n_seeds", 1))
    sir_particles = int(p.get("sir_particles", 100_000))
    d = model.dim

    header = (["t"]
              + [f"truth_{i+1}" for i in range(d)]
              + [f"mean_fpf_{i+1}" for i in range(d)]
              + [f"mean_enkbf_{i+1}" for i in range(d)]
              + [f"mean_kb_{i+1}" for i in range(d)]
              + [f"mean_sir_{i+1}" for i in range(d)]
              + [f"var_fpf_{i+1}" for i in range(d)]
              + [f"var_enkbf_{i+1}" for i in range(d)]
              + [f"var_kb_{i+1}" for i in range(d)]
              + [f"var_sir_{i+1}" for i in range(d)]
              + ["monitor_min_q", "residual"])
    seeds = [sim.seed + k for k in range(n_seeds)]
    summary = {"seeds": seeds, "per_seed": []}
    for k, seed in enumerate(seeds):
        run = run_filter_compare(
            model, SimConfig(dt=sim.dt, horizon=sim.horizon, seed=seed,
                             n_particles=sim.n_particles, gain=sim.gain,
                             delta=sim.delta, init_mean=sim.init_mean,
                             init_var=sim.init_var),
            sir_particles=sir_particles)
        rows = []
        for r in run.records:
            rows.append([r.t, *r.truth, *r.mean_fpf, *r.mean_enkbf, *r.mean_kb,
                         *r.mean_sir, *r.var_fpf, *r.var_enkbf, *r.var_kb,
                         *r.var_sir, r.monitor_min_q, r.residual])
        name = "filter.csv" if k == 0 else f"filter_seed{k}.csv"
        write_csv(outdir / name, header, rows)
        summary["per_seed"].append({
            "seed": seed, "dev_fpf": run.dev_fpf, "dev_enkbf": run.dev_enkbf,
            "dev_sir": run.dev_sir, "stationary_var": run.stationary_var,
        })
    summary["mean_dev_fpf"] = float(np.mean([s["dev_fpf"] for s in summary["per_seed"]]))
    summary["mean_dev_enkbf"] = float(np.mean([s["dev_enkbf"] for s in summary["per_seed"]]))
    summary["mean_dev_sir"] = float(np.mean([s["dev_sir"] for s in summary["per_seed"]]))
    summary["stationary_var"] = summary["per_seed"][-1]["stationary_var"]
    write_json(outdir / "report.json", summary)
    return summary


def run_gain_eval_experiment(cfg: dict, outdir: Path) -> dict:
    model = model_from_config(cfg)
    sim = sim_from_config(cfg)
    p = _params(cfg)
    if model.dim != 1:
        raise ScopeError("gain-eval compares against the exact 1-d gain")
    epsilons = [float(e) for e in p.get("epsilons", [sim.gain.epsilon])]
    n_query = int(p.get("n_query", 101))
    span = float(p.get("query_span_sigmas", 3.0))
    sigma = np.sqrt(sim.init_var)

    rng = np.random.default_rng(sim.seed)
    X = sim.init_mean + sigma * rng.standard_normal((sim.n_particles, 1))
    ens = Ensemble(X)
    h = model.h_fn(X)
    queries = np.linspace(sim.init_mean - span * sigma, sim.init_mean + span * sigma,
                          n_query)

    gx = np.linspace(sim.init_mean - 8.0 * sigma, sim.init_mean + 8.0 * sigma, 4001)
    rho = np.exp(-0.5 * ((gx - sim.init_mean) / sigma) ** 2)
    k_exact = exact_gain_1d(gx, rho, model.h_fn(gx[:, None]), queries)
    k_const = float(constant_gain(ens, h)[0])

    rows = []
    for eps in epsilons:
        gcfg = GainConfig(epsilon=eps, mode=sim.gain.mode, tol=sim.gain.tol,
                          max_iter=sim.gain.max_iter, iterates=sim.gain.iterates,
                          hhat=sim.gain.hhat)
        bundle = build_markov(ens, KernelConfig(eps))
        field = compute_gain_field(bundle, ens, h, gcfg)
        k_dm = gain_at_points(queries[:, None], ens, bundle, field, gcfg)[:, 0]
        for x, ke, kd in zip(queries, k_exact, k_dm):
            rows.append([x, ke, kd, k_const, eps])
    write_csv(outdir / "gain.csv", ["x_1", "K_exact", "K_dm", "K_const", "epsilon"], rows)
    return {"epsilons": epsilons, "n_query": n_query}


def run_poc_experiment(cfg: dict, outdir: Path) -> dict:
    model = model_from_config(cfg)
    sim = sim_from_config(cfg)
    p = _params(cfg)
    N_list = [int(n) for n in p.get("N_list", [50, 100, 200, 400])]
    M_ref = int(p.get("M_ref", 3200))
    reps = int(p.get("reps", 20))
    rows = run_coupled_poc(model, sim, N_list, M_ref, reps)
    write_csv(outdir / "poc.csv", ["N", "rep", "sup_D", "zeta_hat"],
              [[r.N, r.rep, r.sup_D, r.zeta_hat] for r in rows])
    per_n = {}
    for r in rows:
        per_n.setdefault(r.N, []).append(r.sup_D)
    pairs = [(n, float(np.mean(v))) for n, v in sorted(per_n.items())]
    fit = rate_regression(pairs)
    report = {
        "N_list": N_list, "M_ref": M_ref, "reps": reps,
        "mean_sup_D": {str(n): v for n, v in pairs},
        "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
        "assumption2_ok": {str(r.N): r.assumption2_ok for r in rows},
        "zeta_hat_min": min(r.zeta_hat for r in rows),
    }
    write_json(outdir / "report.json", report)
    return report


def run_bounds_experiment(cfg: dict, outdir: Path) -> dict:
    model = model_from_config(cfg)
    sim = sim_from_config(cfg)
    p = _params(cfg)
    sigma = float(p.get("sigma", np.sqrt(sim.init_var)))
    epsilons = [float(e) for e in p.get("epsilons", [sim.gain.epsilon])]
    grid_n = int(p.get("grid_n", 2001))
    span = float(p.get("span_sigmas", 8.0))
    probes = p.get("probes", [0.0])
    if model.dim != 1:
        raise ScopeError("the bound certificate experiment is 1-d")
    grid = DensityGrid.gaussian(sigma, dim=1, n=grid_n, span_sigmas=span,
                                center=sim.init_mean)
    rows, reports = [], []
    for eps in epsilons:
        cert = gain_bound_certificate(grid, model.h_fn, eps,
                                      grad_h_inf=model.grad_h_inf, tol=sim.gain.tol)
        pc = poincare_check(grid, eps, probes)
        rows.append([cert["epsilon"], cert["c_v"], cert["c_g"], cert["bound1"],
                     cert["measured_sup_K"], cert["bound2"], cert["measured_sup_gradK"]])
        reports.append({"certificate": cert, "poincare": pc})
    write_csv(outdir / "bounds.csv",
              ["epsilon", "c_v", "c_g", "bound1", "measured_sup_K", "bound2",
               "measured_sup_gradK"], rows)
    report = {"sigma": sigma, "results": reports,
              "all_pass": all(r["certificate"]["bound1_pass"]
                              and r["certificate"]["bound2_pass"]
                              and r["poincare"]["pass"] for r in reports)}
    write_json(outdir / "report.json", report)
    return report


def run_limit_enkbf_experiment(cfg: dict, outdir: Path) -> dict:
    model = model_from_config(cfg)
    sim = sim_from_config(cfg)
    p = _params(cfg)
    multipliers = [float(m) for m in p.get("multipliers", [1.0, 10.0, 100.0])]
    rng = np.random.default_rng(sim.seed)
    X = sim.init_mean + np.sqrt(sim.init_var) * rng.standard_normal(
        (sim.n_particles, model.dim))
    ens = Ensemble(X)
    h = model.h_fn(X)
    spread2 = float(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1)))
    kc = constant_gain(ens, h)
    kc_norm = float(np.linalg.norm(kc))
    if kc_norm == 0.0:
        raise ConfigError("constant gain vanished; the relative gap is undefined")
    rows = []
    gaps = []
    for mult in multipliers:
        eps = mult * spread2
        gcfg = GainConfig(epsilon=eps, tol=sim.gain.tol, hhat=sim.gain.hhat)
        bundle = build_markov(ens, KernelConfig(eps))
        field = compute_gain_field(bundle, ens, h, gcfg)
        kmean = field.K.mean(axis=0)
        gap = float(np.linalg.norm(kmean - kc) / kc_norm)
        gaps.append(gap)
        rows.append([mult, eps, float(np.linalg.norm(kmean)), kc_norm, gap])
    write_csv(outdir / "limit.csv",
              ["multiplier", "epsilon", "mean_dm_gain", "const_gain", "rel_gap"], rows)
    report = {
        "spread2": spread2, "multipliers": multipliers, "rel_gaps": gaps,
        "monotone": all(gaps[i] > gaps[i + 1] for i in range(len(gaps) - 1)),
        "final_gap": gaps[-1],
    }
    write_json(outdir / "report.json", report)
    return report


def run_constants_experiment(cfg: dict, outdir: Path) -> dict:
    model = model_from_config(cfg)
    sim = sim_from_config(cfg)
    p = _params(cfg)
    eps = sim.gain.epsilon
    d = int(p.get("d", model.dim))
    N = int(p.get("N", sim.n_particles))
    L = p.get("L")
    phi_inf = delta_v = None
    if bool(p.get("measure_meanfield", False)):
        if d != 1:
            raise ScopeError("mean-field measurement for the constants is 1-d")
        grid = DensityGrid.gaussian(np.sqrt(sim.init_var), n=2001,
                                    center=sim.init_mean)
        field = solve_meanfield_fixed_point(grid, model.h_fn, eps, tol=sim.gain.tol)
        w = grid.weights()[0]
        phi_inf = float(np.max(np.abs(field.phi)))
        delta_v = float(w @ (np.abs(grid.axes[0]) * field.nu))
    report = compute_constants(
        epsilon=eps, d=d, N=N, delta=sim.delta, L_h=model.L_h, L_M=model.L_M,
        h_inf=model.h_inf, L=None if L is None else int(L),
        phi_inf=phi_inf, delta_v=delta_v)
    lip = verify_kernel_lipschitz(d, eps, samples=int(p.get("lipschitz_samples", 100_000)),
                                  seed=sim.seed)
    out = {**report.__dict__, "notes": list(report.notes), "kernel_lipschitz": lip}
    write_json(outdir / "report.json", out)
    return out


def run_lln_experiment(cfg: dict, outdir: Path) -> dict:
    model = model_from_config(cfg)
    sim = sim_from_config(cfg)
    p = _params(cfg)
    N_list = [int(n) for n in p.get("N_list", [50, 100, 200, 400])]
    M_ref = int(p.get("M_ref", 3200))
    reps = int(p.get("reps", 20))
    report = lln_gain_gap(model, sim, N_list, M_ref, reps=reps)
    rows = []
    for n in N_list:
        for rep, g in enumerate(report["per_rep"][str(n)]):
            rows.append([n, rep, g])
    write_csv(outdir / "lln.csv", ["N", "rep", "gap_sq"], rows)
    write_json(outdir / "report.json",
               {k: v for k, v in report.items() if k != "per_rep"})
    return report


RUNNERS = {
    "filter-compare": run_filter_compare_experiment,
    "gain-eval": run_gain_eval_experiment,
    "poc": run_poc_experiment,
    "bounds": run_bounds_experiment,
    "limit-enkbf": run_limit_enkbf_experiment,
    "constants": run_constants_experiment,
    "lln": run_lln_experiment,
}
