"""SVG figures for goodness-of-fit bands and experiment trajectories.

Figures are written without timestamps and with a fixed hash salt so that
repeated runs produce byte-identical files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .gof import FAMILIES, GofReport  # noqa: E402
from .lab import METRICS, ExperimentReport  # noqa: E402

STYLE = {
    "svg.hashsalt": "netcatalyst",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
FAMILY_TITLES = {"degree": "Degree distribution", "esp": "Edgewise shared partners", "triad": "Triad census"}
METRIC_TITLES = {"target_share": "Target degree share", "degree_gini": "Degree Gini",
                 "target_degree": "Mean target degree"}
ARM_COLORS = {"control": "0.35", "treated": "tab:red"}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def plot_gof_family(report: GofReport, family: str, path) -> Path:
    """Observed counts as a thick line over the 95% band and simulated median."""
    mask = report.family(family)
    labels = [lab for (f, lab) in report.labels if f == family]
    bands = report.bands()[mask]
    obs = report.observed[mask]
    x = np.arange(len(labels))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.2))
        ax.fill_between(x, bands[:, 0], bands[:, 2], color="0.85", step=None,
                        label=f"{100 * report.coverage:g}% band")
        ax.plot(x, bands[:, 1], color="0.45", lw=1, ls="--", label="simulated median")
        ax.plot(x, obs, color="k", lw=2.2, label="observed")
        outside = ~report.inside()[mask]
        if outside.any():
            ax.plot(x[outside], obs[outside], "o", color="tab:red", ms=4, label="outside band")
        ax.set_xticks(x, labels, rotation=45 if family == "triad" else 0)
        ax.set_ylabel("count")
        ax.set_title(f"{FAMILY_TITLES[family]} ({report.nsims} simulations)")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def plot_gof(report: GofReport, directory) -> list[Path]:
    d = Path(directory)
    return [plot_gof_family(report, fam, d / f"gof_{fam}.svg") for fam in FAMILIES]


def plot_experiment_metric(report: ExperimentReport, metric: str, path) -> Path:
    """Arm means with 2.5-97.5% replicate envelopes per wave; active waves shaded."""
    waves = np.arange(report.config.waves + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        plan = report.config.plan
        if plan is not None:
            for w in sorted(plan.active_waves):
                if w <= waves[-1]:
                    ax.axvspan(w - 0.5, w + 0.5, color="tab:blue", alpha=0.08, lw=0)
        for arm, store in (("control", report.control), ("treated", report.treated)):
            vals = store[metric]
            lo, hi = np.nanpercentile(vals, [2.5, 97.5], axis=0)
            ax.fill_between(waves, lo, hi, color=ARM_COLORS[arm], alpha=0.15, lw=0)
            ax.plot(waves, np.nanmean(vals, axis=0), "-o", color=ARM_COLORS[arm], ms=3, label=arm)
        ax.set_xticks(waves)
        ax.set_xlabel("wave")
        ax.set_ylabel(METRIC_TITLES[metric])
        ax.set_title(f"{METRIC_TITLES[metric]} ({report.replicates} paired replicates)")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def plot_experiment(report: ExperimentReport, directory) -> list[Path]:
    d = Path(directory)
    return [plot_experiment_metric(report, m, d / f"experiment_{m}.svg") for m in METRICS]
