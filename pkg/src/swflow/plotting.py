"""Figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

from .diagnostics import ConcentrationReport
from .flow import Trajectory

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_diagnostics", "plot_concentration"]


def _positive(y: np.ndarray) -> np.ndarray:
    return np.where(y > 0, y, np.nan)


def plot_diagnostics(traj: Trajectory, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    t = np.array([r.t for r in traj.records])
    paths = []

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    parts = {
        "total": [r.energy.total for r in traj.records],
        "curvature": [r.energy.curvature_term for r in traj.records],
        "dirichlet": [r.energy.dirichlet_term for r in traj.records],
        "quartic": [r.energy.quartic_term for r in traj.records],
    }
    for label, ys in parts.items():
        ax.semilogy(t, _positive(np.asarray(ys)), label=label, lw=2 if label == "total" else 1)
    ax.set_xlabel("t")
    ax.set_ylabel(f"energy (k = {traj.k})")
    ax.set_title(f"energy decay, termination: {traj.termination}")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = out_dir / "energy.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(t, _positive(np.array([r.sup_F for r in traj.records])), label="sup |F|")
    ax.semilogy(t, _positive(np.array([r.sup_phi for r in traj.records])), label="sup |phi|")
    ax.semilogy(t, _positive(np.array([r.lp_F for r in traj.records])),
                label=f"|F| in L^{traj.k + 2}")
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = out_dir / "norms.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths


def plot_concentration(report: ConcentrationReport, out_path: str | Path, top: int = 5) -> Path:
    """Ball norms against radius at the latest time for the strongest centers."""
    out_path = Path(out_path)
    last = report.values[-1]
    order = np.argsort(last[:, -1])[::-1][:top]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for ic in order:
        c = ", ".join(f"{x:.2f}" for x in report.centers[ic])
        style = "-" if ic in report.flagged else "--"
        ax.loglog(report.radii, _positive(last[ic]), style, marker="o", label=f"({c})")
    ax.axhline(report.epsilon, color="k", lw=0.8, ls=":", label="threshold")
    ax.set_xlabel("radius")
    ax.set_ylabel(f"local L^{report.p:g} norm of F")
    ax.legend(frameon=False, fontsize="small")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
