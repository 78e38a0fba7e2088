"""Optional figures written next to the CSV output (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .runner import ConvergenceTable, RunArtifact  # noqa: E402

__all__ = ["plot_run", "plot_convergence"]


def plot_run(art: RunArtifact, out_dir: str | Path) -> Path:
    """Weighted norm against t and the field z(t, y) on the sample points."""
    out = Path(out_dir) / "trajectory.png"
    t = art.trajectory.grid.nodes
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    ax0.plot(t, art.trajectory.weighted_norms(), lw=1.2)
    ax0.set_xlabel("t")
    ax0.set_ylabel("weighted norm")
    ax0.set_title(art.scenario.name)
    z = art.z_values[1:]
    mesh = ax1.pcolormesh(art.y_points, t[1:], z, shading="nearest", cmap="viridis")
    ax1.set_xlabel("y")
    ax1.set_ylabel("t")
    ax1.set_yscale("log")
    fig.colorbar(mesh, ax=ax1, label="z(t, y)")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_convergence(table: ConvergenceTable, out_dir: str | Path) -> Path:
    out = Path(out_dir) / "convergence.png"
    fig, ax = plt.subplots(figsize=(5, 4))
    M = np.asarray(table.M, dtype=float)
    ax.loglog(M, table.errors, "o-")
    ax.set_xlabel("M")
    ax.set_ylabel(table.metric)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
