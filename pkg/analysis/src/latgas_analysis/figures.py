"""Figure builders over the harness CSV schemas.

Expected columns:
  converge_summary.csv     N, replicas, e, exceed_max, delta
  stationary_profile.csv   N, x1, k, sim_mean, pde, abs_err
  pde_trajectory.csv       time, u1, comp0, comp1, ...
  ensembles_gap.csv        L, vol, observable, i, gap, bound_rhs,
                           empirical_constant, gap_times_vol, ...
  replacement_diagnostic.csv  N, ell, mean, sd, samples, clamp_events
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "FigureSpec",
    "plot_convergence",
    "plot_profiles",
    "plot_ensembles_scaling",
    "plot_diagnostic_trend",
]

plt.rcParams.update({"figure.dpi": 110, "font.size": 9, "svg.hashsalt": "latgas"})


@dataclass
class FigureSpec:
    """A figure request: input tables, kind, output image path."""

    inputs: list
    kind: str        # "convergence" | "profiles" | "ensembles" | "diagnostic"
    out: str


def _read_csv(path, required: set[str]) -> list[dict]:
    path = Path(path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    missing = required - set(rows[0])
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    return rows


def plot_convergence(summary_csv, out, column: str = "e"):
    """Log-log e(N) with a least-squares slope annotation.

    Returns (out path, fitted slope).  Needs at least 3 N values.
    """
    rows = _read_csv(summary_csv, {"N", column})
    Ns = np.array([float(r["N"]) for r in rows])
    es = np.array([float(r[column]) for r in rows])
    if len(Ns) < 3:
        raise ValueError(f"need >= 3 N values for a slope, got {len(Ns)}")
    order = np.argsort(Ns)
    Ns, es = Ns[order], es[order]
    slope, intercept = np.polyfit(np.log(Ns), np.log(np.maximum(es, 1e-300)), 1)

    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.loglog(Ns, es, "o-", color="tab:blue", label=column + "(N)")
    ax.loglog(Ns, np.exp(intercept) * Ns ** slope, "--", color="tab:gray",
              label=f"fit slope {slope:.2f}")
    ax.set_xlabel("N")
    ax.set_ylabel(column)
    ax.set_title("convergence of the empirical fields to the PDE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return str(out), float(slope)


def plot_profiles(sim_csv, pde_csv=None, out="profiles.png", component: int = 0):
    """Overlay the time-averaged simulated profile on the PDE curve, with the
    residual in a subpanel.

    sim_csv is the stationary_profile table (per-N rows).  If pde_csv (a
    pde_trajectory table) is given, its final time slice replaces the table's
    own pde column, resampled onto the simulation sites with a warning when
    the grids differ.
    """
    rows = _read_csv(sim_csv, {"N", "x1", "k", "sim_mean"})
    rows = [r for r in rows if int(float(r["k"])) == component]
    if not rows:
        raise ValueError(f"no rows for component {component} in {sim_csv}")

    fig, (ax, axr) = plt.subplots(
        2, 1, figsize=(4.6, 4.2), sharex=True,
        gridspec_kw={"height_ratios": [3, 1]})
    for N in sorted({int(float(r["N"])) for r in rows}):
        sub = sorted((r for r in rows if int(float(r["N"])) == N),
                     key=lambda r: float(r["x1"]))
        xs = np.array([float(r["x1"]) for r in sub])
        sim = np.array([float(r["sim_mean"]) for r in sub])
        if pde_csv is not None:
            prows = _read_csv(pde_csv, {"time", "u1", f"comp{component}"})
            tmax = max(float(r["time"]) for r in prows)
            slice_ = sorted((r for r in prows if float(r["time"]) == tmax),
                            key=lambda r: float(r["u1"]))
            gx = np.array([float(r["u1"]) for r in slice_])
            gy = np.array([float(r[f"comp{component}"]) for r in slice_])
            if len(gx) != len(xs) or not np.allclose(gx, xs):
                warnings.warn("PDE grid differs from the simulation sites; resampling")
            pde_vals = np.interp(xs, gx, gy)
        else:
            pde_vals = np.array([float(r["pde"]) for r in sub])
        ax.plot(xs, sim, "o", ms=3, label=f"sim N={N}")
        ax.plot(xs, pde_vals, "-", lw=1, color="black", alpha=0.6)
        axr.plot(xs, sim - pde_vals, ".-", ms=2, lw=0.7, label=f"N={N}")
    ax.set_ylabel(f"component {component}")
    ax.set_title("time-averaged profile vs PDE steady state")
    ax.legend(fontsize=7)
    axr.axhline(0.0, color="black", lw=0.5)
    axr.set_xlabel("u1")
    axr.set_ylabel("residual")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return str(out)


def plot_ensembles_scaling(gap_csv, out="ensembles.png"):
    """gap * |Lambda_L| against L per observable: flat curves mean the
    canonical-vs-grand-canonical gap decays at the 1/volume rate."""
    rows = _read_csv(gap_csv, {"L", "observable", "gap_times_vol"})
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    for name in sorted({r["observable"] for r in rows}):
        sub = sorted((r for r in rows if r["observable"] == name),
                     key=lambda r: int(float(r["L"])))
        Ls = [int(float(r["L"])) for r in sub]
        ys = [float(r["gap_times_vol"]) for r in sub]
        ax.plot(Ls, ys, "o-", label=name)
    ax.set_xlabel("block half-width L")
    ax.set_ylabel("gap x volume")
    ax.set_yscale("symlog", linthresh=1e-14)
    ax.set_title("equivalence-of-ensembles scaling")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return str(out)


def plot_diagnostic_trend(diag_csv, out="diagnostic.png"):
    """Replacement diagnostic against the block half-width (log-log)."""
    rows = _read_csv(diag_csv, {"ell", "mean"})
    sub = sorted(rows, key=lambda r: int(float(r["ell"])))
    ells = np.array([int(float(r["ell"])) for r in sub])
    ys = np.array([float(r["mean"]) for r in sub])
    sd = np.array([float(r.get("sd", 0.0)) for r in sub])
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.errorbar(ells, ys, yerr=sd, fmt="o-")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("block half-width")
    ax.set_ylabel("current vs local-equilibrium gap")
    ax.set_title("block-average replacement diagnostic")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return str(out)
