"""Run a scenario, write the trajectory CSV and residual report, refinement studies."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__
from ..solver import (
    ResidualReport,
    SpectralGrid,
    Trajectory,
    linear_errors,
    solve,
)
from .scenario import Scenario, build_problem, dump_scenario

__all__ = ["RunArtifact", "run", "write_artifact", "converge", "ConvergenceTable"]


@dataclass(frozen=True)
class RunArtifact:
    scenario: Scenario
    trajectory: Trajectory
    report: ResidualReport
    csv_text: str
    report_text: str
    under_resolved: bool
    y_points: np.ndarray
    z_values: np.ndarray


def _csv(sc: Scenario, traj: Trajectory, y: np.ndarray, z: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(f"# hilfer-mild {__version__}\n")
    buf.write(f"# scenario {sc.name}\n")
    buf.write(f"# config-sha256 {sc.sha256()}\n")
    buf.write(f"# weight-exponent {traj.weight_exponent!r}\n")
    buf.write(",".join(["t", "weighted_norm"] + [f"z@y_{p + 1}" for p in range(y.size)]) + "\n")
    t = traj.grid.nodes
    wn = traj.weighted_norms()
    for j in range(t.size):
        row = [t[j], wn[j]] + list(z[j])
        buf.write(",".join(f"{v:.16e}" for v in row) + "\n")
    return buf.getvalue()


def run(sc: Scenario) -> RunArtifact:
    """Solve the scenario and render its CSV and report text.

    Row 0 of the CSV holds the weighted limit norm; its z columns are NaN when
    the solution is singular at t = 0.
    """
    spec, cfg, grid = build_problem(sc)
    with threadpool_limits(limits=1):
        traj, report = solve(spec, cfg, grid)
    space = SpectralGrid(sc.modes, sc.points)
    z = space.to_physical(traj.coeffs)
    if sc.gamma < 1.0:
        z[0] = np.nan
    under = not (report.volterra_residual_weighted <= sc.residual_cap)
    pairs = [
        ("scenario", sc.name),
        ("version", __version__),
        ("config_sha256", sc.sha256()),
        ("M", str(sc.M)),
        ("modes", str(sc.modes)),
        ("under_resolved", str(under).lower()),
    ] + report.as_pairs()
    pairs += [(f"warning_{i + 1}", w) for i, w in enumerate(report.warnings)]
    report_text = "".join(f"{k}={v}\n" for k, v in pairs)
    return RunArtifact(sc, traj, report, _csv(sc, traj, space.y, z), report_text, under, space.y, z)


def write_artifact(art: RunArtifact, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / art.scenario.csv,
        "report": out / "report.txt",
        "scenario": out / "scenario.toml",
    }
    paths["csv"].write_text(art.csv_text, encoding="utf-8")
    paths["report"].write_text(art.report_text, encoding="utf-8")
    paths["scenario"].write_text(dump_scenario(art.scenario), encoding="utf-8")
    return paths


@dataclass(frozen=True)
class ConvergenceTable:
    metric: str
    M: tuple[int, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]
    converged: tuple[bool, ...]

    @property
    def monotone(self) -> bool:
        e = self.errors
        return all(e[i + 1] < e[i] for i in range(len(e) - 1))

    def render(self) -> str:
        lines = [f"metric={self.metric}", "M,value,order"]
        for i, (m, e) in enumerate(zip(self.M, self.errors)):
            order = "" if i == 0 else f"{self.orders[i - 1]:.4f}"
            lines.append(f"{m},{e:.6e},{order}")
        lines.append(f"monotone={str(self.monotone).lower()}")
        return "\n".join(lines) + "\n"


def converge(sc: Scenario, levels: int) -> ConvergenceTable:
    """Double M ``levels - 1`` times from the scenario mesh.

    Linear scenarios report the dense weighted error against the closed form,
    other scenarios the weighted Volterra residual.
    """
    if levels < 2:
        raise ValueError("converge needs at least 2 levels")
    Ms, errs, conv = [], [], []
    metric = "dense_weighted_error" if sc.is_linear else "volterra_residual_weighted"
    for k in range(levels):
        lvl = sc.with_mesh(sc.M * 2**k)
        spec, cfg, grid = build_problem(lvl)
        with threadpool_limits(limits=1):
            traj, report = solve(spec, cfg, grid)
        if sc.is_linear:
            _, e = linear_errors(spec, traj)
        else:
            e = report.volterra_residual_weighted
        Ms.append(lvl.M)
        errs.append(e)
        conv.append(report.converged)
    orders = tuple(
        math.log2(errs[i] / errs[i + 1]) if errs[i] > 0 and errs[i + 1] > 0 else math.nan
        for i in range(levels - 1)
    )
    return ConvergenceTable(metric, tuple(Ms), tuple(errs), orders, tuple(conv))
