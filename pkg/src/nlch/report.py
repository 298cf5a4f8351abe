"""Figure rendering for harness runs.

Every command that writes a CSV can also render PNG companions next to
it; these are diagnostic pictures, not archival artifacts, so nothing
downstream parses them.  The Agg backend keeps rendering headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .control import ControlField  # noqa: E402
from .fields import ScalarField  # noqa: E402
from .state import StateTrajectory  # noqa: E402

__all__ = ["render_simulate_report", "render_optimize_report",
           "render_gradcheck_report"]

_DPI = 130


def _plane(data: np.ndarray) -> np.ndarray:
    # mid-plane cut for 3d data; 2d passes through
    if data.ndim == 3:
        data = data[:, :, data.shape[2] // 2]
    return data.T  # imshow wants rows = second axis


def _heatmap(ax, field: ScalarField, title: str):
    g = field.grid
    im = ax.imshow(_plane(field.data), origin="lower",
                   extent=(0.0, g.length[0], 0.0, g.length[1]),
                   cmap="RdBu_r")
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return im


def render_simulate_report(out_dir: str, traj: StateTrajectory) -> list[str]:
    """Diagnostics panel and a final-state snapshot."""
    t = traj.times
    fig, axes = plt.subplots(1, 3, figsize=(11.5, 3.4))
    axes[0].semilogy(t, np.abs(traj.mass - traj.mass[0]) + 1e-300, lw=1.2)
    axes[0].set_title("mass drift |m(t) - m(0)|")
    axes[1].plot(t, traj.energy, lw=1.2)
    axes[1].set_title("free energy")
    axes[2].plot(t, traj.separation, lw=1.2)
    axes[2].set_ylim(bottom=0.0)
    axes[2].set_title("separation 1 - max|phi|")
    for ax in axes:
        ax.set_xlabel("t")
    fig.tight_layout()
    diag = os.path.join(out_dir, "diagnostics.png")
    fig.savefig(diag, dpi=_DPI)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = _heatmap(ax, traj.phi[-1], f"phase field at t = {t[-1]:g}")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    snap = os.path.join(out_dir, "phi_final.png")
    fig.savefig(snap, dpi=_DPI)
    plt.close(fig)
    return [diag, snap]


def render_optimize_report(out_dir: str, cost: np.ndarray,
                           stationarity: np.ndarray,
                           v_opt: ControlField) -> list[str]:
    """Cost and residual histories plus the first optimal velocity slice."""
    fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.4))
    axes[0].semilogy(np.arange(len(cost)), cost, marker=".", lw=1.2)
    axes[0].set_title("reduced cost")
    axes[0].set_xlabel("accepted iterate")
    axes[1].semilogy(np.arange(len(stationarity)), stationarity,
                     marker=".", lw=1.2)
    axes[1].set_title("stationarity residual")
    axes[1].set_xlabel("gradient evaluation")
    fig.tight_layout()
    hist = os.path.join(out_dir, "optimization.png")
    fig.savefig(hist, dpi=_DPI)
    plt.close(fig)

    s = v_opt.slices[0]
    g = s.grid
    u = _plane(s.components[0].data).copy()
    w = _plane(s.components[1].data).copy()
    speed = np.hypot(u, w)
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    im = ax.imshow(speed, origin="lower",
                   extent=(0.0, g.length[0], 0.0, g.length[1]),
                   cmap="viridis")
    if speed.max() > 0.0:  # quiver autoscale divides by max arrow length
        stride = max(1, g.n[0] // 16)
        xs = (np.arange(g.n[0]) + 0.5) * g.h[0]
        ys = (np.arange(g.n[1]) + 0.5) * g.h[1]
        ax.quiver(xs[::stride], ys[::stride],
                  u[::stride, ::stride], w[::stride, ::stride],
                  color="white", scale_units="xy", angles="xy")
    ax.set_title("optimal velocity, first slice")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    snap = os.path.join(out_dir, "control_first_slice.png")
    fig.savefig(snap, dpi=_DPI)
    plt.close(fig)
    return [hist, snap]


def render_gradcheck_report(out_dir: str, steps: np.ndarray,
                            rel_errors: np.ndarray) -> list[str]:
    """One error curve per direction; ``rel_errors`` is (pairs, steps)."""
    rel_errors = np.atleast_2d(rel_errors)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    for i, row in enumerate(rel_errors):
        ax.loglog(steps, row, marker="o", lw=1.2, label=f"direction {i}")
        k = int(np.argmin(row))
        ax.loglog([steps[k]], [row[k]], marker="*", ms=13, color="C3")
    ax.set_xlabel("FD step h")
    ax.set_ylabel("relative error vs adjoint gradient")
    ax.set_title("directional derivative check")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "grad_check.png")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return [path]
