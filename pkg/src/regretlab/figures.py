"""Figure rendering for run reports.

Reads the delimited metrics that training produces and renders the
training curves (coverage, regret, population entropy, zero-shot
metrics) plus optional maze/trajectory maps to image files next to the
CSV. Everything draws through the Agg backend so reports work headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import evaluation, maze

CURVES = (
    ("cover_coords", "unique coordinates"),
    ("regret_mean", "stage regret"),
    ("pop_entropy", "population entropy (nats)"),
    ("ar", "zero-shot success rate"),
)


def render_metric_curves(csv_path: str, out_dir: str, dpi: int = 120) -> list:
    """One PNG per tracked metric plus a combined panel; returns the paths."""
    rows = evaluation.read_metrics(csv_path)
    if not rows:
        return []
    os.makedirs(out_dir, exist_ok=True)
    steps = [r["env_steps"] for r in rows]
    paths = []
    for key, label in CURVES:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(steps, [r[key] for r in rows], lw=1.5)
        ax.set_xlabel("environment steps")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{key}.png")
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        paths.append(path)

    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    for ax, (key, label) in zip(axes.ravel(), CURVES):
        ax.plot(steps, [r[key] for r in rows], lw=1.5)
        ax.set_xlabel("environment steps")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    panel = os.path.join(out_dir, "summary.png")
    fig.savefig(panel, dpi=dpi)
    plt.close(fig)
    paths.append(panel)
    return paths


def _draw_walls(ax, spec: maze.MazeSpec) -> None:
    rows, cols = spec.walls.shape
    img = np.where(spec.walls, 0.25, 1.0)
    ax.imshow(img, cmap="gray", vmin=0, vmax=1,
              extent=[0, cols * spec.cell_size, rows * spec.cell_size, 0])
    ax.set_xlim(0, cols * spec.cell_size)
    ax.set_ylim(rows * spec.cell_size, 0)
    ax.set_aspect("equal")


def render_trajectory_map(spec: maze.MazeSpec, trajectories: list, path: str,
                          title: str = "", dpi: int = 120) -> str:
    """Maze walls with one colored line per trajectory."""
    fig, ax = plt.subplots(figsize=(5, 5))
    _draw_walls(ax, spec)
    cmap = plt.get_cmap("viridis")
    n = max(len(trajectories), 1)
    for i, positions in enumerate(trajectories):
        pts = np.atleast_2d(positions)
        ax.plot(pts[:, 0], pts[:, 1], lw=0.8, alpha=0.7, color=cmap(i / n))
    sx, sy = spec.start_position()
    ax.plot([sx], [sy], marker="*", color="red", markersize=10)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def render_run_report(run_dir: str, ckpt_path: str | None = None, dpi: int = 120) -> list:
    """Render all figures for one run directory into <run_dir>/figures."""
    out_dir = os.path.join(run_dir, "figures")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    csv_path = os.path.join(run_dir, "metrics.csv")
    if os.path.exists(csv_path):
        paths.extend(render_metric_curves(csv_path, out_dir, dpi=dpi))
    if ckpt_path is not None:
        from .runner import load_eval_context

        ctx = load_eval_context(ckpt_path)
        cfg = ctx["cfg"]
        rng = np.random.Generator(np.random.PCG64(cfg.seed + ctx["stage"]))
        skills = evaluation.thorough_skill_set(ctx["pop"], cfg.eval_grid_res,
                                               cfg.eval_component_draws, rng, cfg.option_dim)
        trajs = evaluation.rollout_skills(ctx["spec"], ctx["agent"], skills)
        paths.append(render_trajectory_map(
            ctx["spec"], trajs, os.path.join(out_dir, f"trajectories-{ctx['stage']:04d}.png"),
            title=f"skill sweep, stage {ctx['stage']}", dpi=dpi))
    return paths
