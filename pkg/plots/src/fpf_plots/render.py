"""Figure rendering for the experiment CSV schemas.

Four figure ids, each tied to one producer schema:

    gain-overlay : gain.csv   (x_1, K_exact, K_dm, K_const, epsilon)
    poc-rate     : poc.csv    (N, rep, sup_D, zeta_hat)
    bounds       : bounds.csv (epsilon, c_v, c_g, bound1, measured_sup_K,
                               bound2, measured_sup_gradK)
    tracking     : filter.csv (t, truth_1, mean_*_1, var_*_1,
                               monitor_min_q, residual)

Rendering is strictly read-only on its inputs and writes one raster PNG at a
fixed DPI (no interactive backends), so CI artifacts are reproducible.  The
poc-rate figure annotates the least-squares slope of log mean sup-distance
against log N next to a reference line of slope -1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150

FIGURES = ("gain-overlay", "poc-rate", "bounds", "tracking")

_SCHEMAS = {
    "gain-overlay": {"x_1", "K_exact", "K_dm", "K_const", "epsilon"},
    "poc-rate": {"N", "rep", "sup_D", "zeta_hat"},
    "bounds": {"epsilon", "c_v", "c_g", "bound1", "measured_sup_K", "bound2",
               "measured_sup_gradK"},
    "tracking": {"t", "truth_1", "mean_fpf_1", "mean_enkbf_1", "mean_kb_1",
                 "mean_sir_1", "var_fpf_1", "var_enkbf_1", "var_kb_1",
                 "var_sir_1", "monitor_min_q", "residual"},
}


class SchemaError(Exception):
    """Input columns do not match the figure's expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    inputs: tuple
    output: str

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise SchemaError(f"unknown figure id {self.figure!r}; choose from {FIGURES}")
        if not self.inputs:
            raise SchemaError("figure spec needs at least one input path")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))


def read_csv(path) -> dict:
    """Columns as float arrays keyed by header name."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    cols = {name: np.array([float(r[i]) for r in rows])
            for i, name in enumerate(header)}
    return cols


def check_schema(figure, cols, path) -> None:
    expected = _SCHEMAS[figure]
    have = set(cols)
    if expected - have or (figure != "tracking" and have - expected):
        missing = sorted(expected - have)
        extra = sorted(have - expected)
        raise SchemaError(
            f"{path}: columns do not match the {figure!r} schema; "
            f"missing {missing}, unexpected {extra}")


def fit_loglog(N, values):
    """Least squares of log(value) on log(N); returns (slope, intercept, r2)."""
    x, y = np.log(np.asarray(N, dtype=float)), np.log(np.asarray(values, dtype=float))
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum((y - intercept - slope * x) ** 2)) / ss_tot
    return slope, intercept, r2


def _render_gain_overlay(cols, ax):
    x = cols["x_1"]
    for eps in np.unique(cols["epsilon"]):
        sel = cols["epsilon"] == eps
        order = np.argsort(x[sel])
        ax.plot(x[sel][order], cols["K_dm"][sel][order], label=f"diffusion map, eps={eps:g}")
    sel0 = cols["epsilon"] == cols["epsilon"][0]
    order = np.argsort(x[sel0])
    ax.plot(x[sel0][order], cols["K_exact"][sel0][order], "k--", lw=2, label="exact")
    ax.plot(x[sel0][order], cols["K_const"][sel0][order], ":", color="gray",
            label="constant gain")
    ax.set_xlabel("x")
    ax.set_ylabel("gain")
    ax.legend(fontsize=8)
    ax.set_title("gain approximations vs exact")
    return {}


def _render_poc_rate(cols, ax):
    Ns = np.unique(cols["N"]).astype(int)
    means = [float(cols["sup_D"][cols["N"] == n].mean()) for n in Ns]
    slope, intercept, r2 = fit_loglog(Ns, means)
    ax.plot(cols["N"], cols["sup_D"], ".", color="lightsteelblue", ms=4,
            label="repetitions")
    ax.plot(Ns, means, "o-", color="tab:blue", label="mean over repetitions")
    ref = np.exp(intercept) * Ns.astype(float) ** (-1.0)
    ax.plot(Ns, ref, "k--", lw=1, label="reference slope -1")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("sup coupling distance$^2$")
    ax.legend(fontsize=8)
    ax.set_title(f"coupling rate: slope {slope:.2f} (r$^2$={r2:.2f})")
    ax.annotate(f"slope = {slope:.2f}", xy=(0.05, 0.08), xycoords="axes fraction")
    return {"slope": slope, "intercept": intercept, "r2": r2}


def _render_bounds(cols, ax):
    idx = np.arange(len(cols["epsilon"]))
    w = 0.2
    ax.bar(idx - 1.5 * w, cols["bound1"], w, label="gain bound")
    ax.bar(idx - 0.5 * w, cols["measured_sup_K"], w, label="measured sup gain")
    ax.bar(idx + 0.5 * w, cols["bound2"], w, label="gradient bound")
    ax.bar(idx + 1.5 * w, cols["measured_sup_gradK"], w, label="measured sup gradient")
    ax.set_xticks(idx, [f"eps={e:g}" for e in cols["epsilon"]])
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    ax.set_title("uniform bound certificates")
    return {}


def _render_tracking(cols, ax):
    t = cols["t"]
    ax.plot(t, cols["truth_1"], color="gray", lw=1, label="truth")
    for name, style in (("mean_kb_1", "k-"), ("mean_fpf_1", "-"),
                        ("mean_enkbf_1", "--"), ("mean_sir_1", ":")):
        ax.plot(t, cols[name], style, lw=1.2, label=name[5:-2])
    ax.set_xlabel("t")
    ax.set_ylabel("state")
    ax.legend(fontsize=8, ncol=2)
    ax.set_title("posterior-mean tracking")
    return {}


_RENDERERS = {
    "gain-overlay": _render_gain_overlay,
    "poc-rate": _render_poc_rate,
    "bounds": _render_bounds,
    "tracking": _render_tracking,
}


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns the annotation metadata (slope etc.)."""
    path = spec.inputs[0]
    if not Path(path).exists():
        raise SchemaError(f"input {path} does not exist")
    cols = read_csv(path)
    check_schema(spec.figure, cols, path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        meta = _RENDERERS[spec.figure](cols, ax)
        fig.tight_layout()
        fig.savefig(spec.output, dpi=DPI)
    finally:
        plt.close(fig)
    return {"figure": spec.figure, "output": str(spec.output), **meta}
