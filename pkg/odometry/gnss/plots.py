# odometry/gnss/plots.py
"""SVG figures for experiment reports: error curves, overhead tracks, availability."""
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

logger = logging.getLogger('odometry')

# Fixed hash salt and no date stamp so reruns write identical SVG bytes.
matplotlib.rcParams["svg.hashsalt"] = "gnss-odometry"
SVG_METADATA = {"Date": None}

COLORS = {
    "tdcp": "tab:blue",
    "tdcp_dense": "tab:cyan",
    "tdcp_relpose": "tab:purple",
    "pseudorange": "tab:red",
    "doppler": "tab:orange",
    "relpose": "tab:green",
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    logger.debug(f"Wrote figure {path}.")
    return path


def plot_error_curves(reports, path, title="Position drift"):
    """Every section's horizontal error against distance, one colour per algorithm."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for report in reports:
        color = COLORS.get(report.algorithm)
        for i, section in enumerate(report.sections):
            ax.plot(section.distances, section.horizontal_errors, color=color, alpha=0.35, linewidth=0.8,
                    label=report.algorithm if i == 0 else None)
    ax.set_xlabel("Distance travelled [m]")
    ax.set_ylabel("Horizontal error [m]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if reports:
        ax.legend(loc="upper left")
    return _save(fig, path)


def plot_overhead(truth, estimates, path, title="Trajectories"):
    """Truth path and aligned estimates in the horizontal plane."""
    fig, ax = plt.subplots(figsize=(6, 6))
    xy = np.array([s.position[:2] for s in truth])
    ax.plot(xy[:, 0], xy[:, 1], color="black", linewidth=1.5, label="truth")
    for name, traj in estimates.items():
        positions = traj.positions()
        ax.plot(positions[:, 0], positions[:, 1], color=COLORS.get(name), linewidth=1.0, label=name)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("East [m]")
    ax.set_ylabel("North [m]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    return _save(fig, path)


def plot_satellite_scatter(reports, path):
    """Final section error against mean satellites used during the section."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for report in reports:
        sats = [s.mean_satellites for s in report.sections]
        errors = [s.error_50 for s in report.sections]
        ax.scatter(sats, errors, s=14, color=COLORS.get(report.algorithm), label=report.algorithm)
    ax.set_xlabel("Mean satellites used")
    ax.set_ylabel("Error at section end [m]")
    ax.grid(True, alpha=0.3)
    if reports:
        ax.legend(loc="best")
    return _save(fig, path)
