"""Coverage, zero-shot goal reaching, and metric persistence."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import maze, reprspace, sac
from .errors import ConfigError
from .skillgen import SkillPopulation

METRICS_COLUMNS = ("stage", "env_steps", "cover_coords", "regret_mean", "pop_entropy",
                   "ar", "fd_mean", "wall_clock_s")


@dataclass
class EvalReport:
    """One evaluation pass over a trained (or training) agent."""

    stage: int
    env_steps: int
    cover_coords: int
    regret_mean: float
    pop_entropy: float
    ar: float
    fd_mean: float
    n_skills: int = 0
    goal_fd: list = field(default_factory=list)
    goal_success: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "env_steps": self.env_steps,
            "cover_coords": self.cover_coords,
            "regret_mean": self.regret_mean,
            "pop_entropy": self.pop_entropy,
            "ar": self.ar,
            "fd_mean": self.fd_mean,
            "n_skills": self.n_skills,
            "goal_fd": list(map(float, self.goal_fd)),
            "goal_success": list(map(bool, self.goal_success)),
        }


def cover_coords(trajectories: list, cell_size: float) -> int:
    """Distinct discretized cells visited across all trajectory states."""
    if cell_size <= 0:
        raise ConfigError("cell_size must be positive")
    seen = set()
    for positions in trajectories:
        pts = np.atleast_2d(np.asarray(positions, dtype=float))
        if pts.size == 0:
            continue
        cells = np.floor(pts / cell_size).astype(int)
        seen.update(map(tuple, cells))
    return len(seen)


def thorough_skill_set(pop: SkillPopulation | None, grid_res: int, draws_per_component: int = 4,
                       rng: np.random.Generator | None = None, dim: int = 2) -> np.ndarray:
    """Evaluation skills: a lattice over the box plus draws per component."""
    if grid_res < 2:
        raise ConfigError("grid_res must be >= 2")
    axis = np.linspace(-1.0, 1.0, grid_res)
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    parts = [grid]
    if pop is not None and len(pop) > 0:
        if rng is None:
            rng = np.random.Generator(np.random.PCG64(0))
        for g in pop.members:
            parts.append(np.clip(g.sample(rng, draws_per_component), -1.0, 1.0))
    return np.concatenate(parts, axis=0)


def rollout_skills(spec: maze.MazeSpec, agent: sac.AgentParams, skills: np.ndarray) -> list:
    """Deterministic lockstep rollouts, one per skill; returns positions."""
    skills = np.atleast_2d(skills)
    n = len(skills)
    pos = np.tile(spec.start_position(), (n, 1))
    vel = np.zeros((n, 2))
    traj = [pos.copy()]
    for _ in range(spec.horizon):
        obs = maze.observe_batch(pos, vel)
        a = sac.act(agent, obs, skills, mode="deterministic")
        pos, vel = maze.step_batch(spec, pos, vel, a)
        traj.append(pos.copy())
    stacked = np.stack(traj, axis=1)  # (n, T+1, 2)
    return [stacked[i] for i in range(n)]


def goal_cells(spec: maze.MazeSpec, min_chebyshev: int = 2) -> np.ndarray:
    """Centers of free cells at least `min_chebyshev` cells from the start."""
    si, sj = spec.start_cell
    out = []
    for i, j in spec.free_cells():
        if max(abs(i - si), abs(j - sj)) >= min_chebyshev:
            out.append([(j + 0.5) * spec.cell_size, (i + 0.5) * spec.cell_size])
    return np.asarray(out)


@dataclass
class ZeroShotResult:
    ar: float
    fd_mean: float
    goal_fd: np.ndarray
    goal_success: np.ndarray
    mode: str


def zero_shot(spec: maze.MazeSpec, agent, rep: reprspace.ReprState, goals: np.ndarray,
              mode: str = "rsd", radius: float = 1.0) -> ZeroShotResult:
    """Goal-reaching without adaptation, under one of three skill conventions.

    rsd: the goal's representation itself is the skill. metra-f: the unit
    vector from the start representation toward the goal's, fixed for the
    episode. metra-d: that unit vector recomputed from the current state
    every step. Success is any-time proximity within `radius`; FD is the
    final position error.
    """
    if mode not in ("rsd", "metra-f", "metra-d"):
        raise ConfigError(f"unknown zero-shot mode {mode!r}")
    goals = np.atleast_2d(np.asarray(goals, dtype=float))
    for gx, gy in goals:
        if spec.is_wall_at(gx, gy):
            raise ConfigError(f"goal ({gx}, {gy}) lies inside a wall")
    n = len(goals)
    goal_obs = np.concatenate([goals, np.zeros((n, 2))], axis=1)
    phi_g = reprspace.encode(rep, goal_obs)

    pos = np.tile(spec.start_position(), (n, 1))
    vel = np.zeros((n, 2))
    phi_0 = reprspace.encode(rep, maze.observe_batch(pos, vel))
    if mode == "rsd":
        zs = phi_g.copy()
    else:
        zs = _unit_rows(phi_g - phi_0)

    best = np.linalg.norm(pos - goals, axis=1)
    for _ in range(spec.horizon):
        obs = maze.observe_batch(pos, vel)
        if mode == "metra-d":
            diff = phi_g - reprspace.encode(rep, obs)
            norms = np.linalg.norm(diff, axis=1, keepdims=True)
            fresh = norms[:, 0] > 1e-9
            zs[fresh] = diff[fresh] / norms[fresh]
        a = agent.act(obs, zs) if hasattr(agent, "act") else sac.act(agent, obs, zs, mode="deterministic")
        pos, vel = maze.step_batch(spec, pos, vel, a)
        best = np.minimum(best, np.linalg.norm(pos - goals, axis=1))
    fd = np.linalg.norm(pos - goals, axis=1)
    success = best < radius
    return ZeroShotResult(
        ar=float(success.mean()) if n else 0.0,
        fd_mean=float(fd.mean()) if n else 0.0,
        goal_fd=fd,
        goal_success=success,
        mode=mode,
    )


def _unit_rows(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=1, keepdims=True)
    return v / np.maximum(n, 1e-12)


def write_metrics(report: EvalReport, path: str, wall_clock_s: float = 0.0) -> None:
    """Append one metrics row; the header is written exactly once per file."""
    need_header = not os.path.exists(path) or os.path.getsize(path) == 0
    row = {
        "stage": report.stage,
        "env_steps": report.env_steps,
        "cover_coords": report.cover_coords,
        "regret_mean": repr(float(report.regret_mean)),
        "pop_entropy": repr(float(report.pop_entropy)),
        "ar": repr(float(report.ar)),
        "fd_mean": repr(float(report.fd_mean)),
        "wall_clock_s": repr(float(wall_clock_s)),
    }
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        if need_header:
            writer.writeheader()
        writer.writerow(row)


def read_metrics(path: str) -> list:
    """Parse a metrics CSV back into typed rows."""
    with open(path, newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            rows.append({
                "stage": int(raw["stage"]),
                "env_steps": int(raw["env_steps"]),
                "cover_coords": int(raw["cover_coords"]),
                "regret_mean": float(raw["regret_mean"]),
                "pop_entropy": float(raw["pop_entropy"]),
                "ar": float(raw["ar"]),
                "fd_mean": float(raw["fd_mean"]),
                "wall_clock_s": float(raw["wall_clock_s"]),
            })
    return rows
