"""Deterministic point-mass environments with wall layouts.

Layouts are ASCII grids: '#' wall, '.' (or 'O') free, 'S' start. A cell
(row i, col j) of size `cell_size` spans x in [j, j+1) * cell_size and
y in [i, i+1) * cell_size; the start state is the start-cell center with
zero velocity. Dynamics follow a damped velocity update with per-axis
wall collisions; the environment emits no reward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ProtocolError

OPEN_8X8 = """\
##########
#........#
#........#
#........#
#....S...#
#........#
#........#
#........#
#........#
##########
"""

UMAZE = """\
########
#S.#...#
#..#...#
#......#
########
"""

LARGE = """\
############
#....#.....#
#.##.#.#.#.#
#......#...#
#.####.###.#
#..#.#.....#
##.#.#.#.###
#S.#...#...#
############
"""

BUILTIN_LAYOUTS = {"open-8x8": OPEN_8X8, "umaze": UMAZE, "large": LARGE}

WALL_MARGIN = 1e-3


@dataclass(frozen=True)
class MazeSpec:
    """Static description of one environment: walls, start, physics, horizon."""

    walls: np.ndarray  # bool (rows, cols), True = wall
    start_cell: tuple  # (row, col)
    cell_size: float = 1.0
    dt: float = 0.1
    damping: float = 0.1
    action_scale: float = 1.0
    v_max: float = 2.0
    horizon: int = 300
    name: str = ""

    def __post_init__(self):
        if self.walls.ndim != 2:
            raise ConfigError("wall grid must be rectangular")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        i, j = self.start_cell
        if self.walls[i, j]:
            raise ConfigError("start cell lies inside a wall")
        if self.v_max * self.dt > self.cell_size:
            raise ConfigError("per-step travel exceeds one cell; collision handling assumes single-cell crossings")

    @property
    def shape(self) -> tuple:
        return self.walls.shape

    def start_position(self) -> np.ndarray:
        i, j = self.start_cell
        return np.array([(j + 0.5) * self.cell_size, (i + 0.5) * self.cell_size])

    def free_cells(self) -> list:
        return [(i, j) for i in range(self.walls.shape[0]) for j in range(self.walls.shape[1]) if not self.walls[i, j]]

    def is_wall_at(self, x: float, y: float) -> bool:
        i = int(np.floor(y / self.cell_size))
        j = int(np.floor(x / self.cell_size))
        if i < 0 or j < 0 or i >= self.walls.shape[0] or j >= self.walls.shape[1]:
            return True
        return bool(self.walls[i, j])


@dataclass(frozen=True)
class EnvState:
    position: np.ndarray  # (2,) x, y
    velocity: np.ndarray  # (2,) per-step units
    t: int


def parse_layout(text: str, name: str = "", **physics) -> MazeSpec:
    """Build a MazeSpec from an ASCII layout string."""
    rows = [line for line in text.splitlines() if line.strip()]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError("layout rows have unequal width")
    walls = np.zeros((len(rows), width), dtype=bool)
    start = None
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            if ch == "#":
                walls[i, j] = True
            elif ch in ".O":
                pass
            elif ch == "S":
                if start is not None:
                    raise ConfigError("layout declares more than one start cell")
                start = (i, j)
            else:
                raise ConfigError(f"unknown layout character {ch!r} at row {i}, col {j}")
    if start is None:
        raise ConfigError("layout has no start cell 'S'")
    return MazeSpec(walls=walls, start_cell=start, name=name, **physics)


def load_layout(name_or_path: str, **physics) -> MazeSpec:
    """Resolve a builtin layout name or read an ASCII layout file."""
    if name_or_path in BUILTIN_LAYOUTS:
        return parse_layout(BUILTIN_LAYOUTS[name_or_path], name=name_or_path, **physics)
    try:
        with open(name_or_path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"unknown layout {name_or_path!r} (not builtin, not a readable file)") from exc
    return parse_layout(text, name=name_or_path, **physics)


def reset(spec: MazeSpec, seed=None) -> EnvState:
    """Deterministic initial state: start-cell center, zero velocity.

    `seed` is accepted for interface uniformity; the initial distribution
    is a point mass so it has no effect.
    """
    return EnvState(position=spec.start_position(), velocity=np.zeros(2), t=0)


def step_batch(spec: MazeSpec, pos: np.ndarray, vel: np.ndarray, actions: np.ndarray) -> tuple:
    """Vectorized transition for N simultaneous episodes.

    pos, vel, actions: (N, 2). Returns new (pos, vel) without touching
    the inputs. Axis moves that cross into a wall cell clamp the position
    to the boundary (minus a small margin) and zero that velocity
    component; x resolves first, then y against the updated x.
    """
    a = np.clip(actions, -1.0, 1.0)
    v = np.clip((1.0 - spec.damping) * vel + spec.action_scale * a * spec.dt, -spec.v_max, spec.v_max)
    new_pos = pos.copy()
    new_vel = v.copy()
    cs = spec.cell_size
    rows, cols = spec.walls.shape
    for axis in range(2):
        cand = new_pos[:, axis] + new_vel[:, axis] * spec.dt
        # cell indices: axis 0 moves along columns (x), axis 1 along rows (y)
        other = new_pos[:, 1 - axis]
        cur_cell = np.floor(new_pos[:, axis] / cs).astype(int)
        new_cell = np.floor(cand / cs).astype(int)
        other_cell = np.floor(other / cs).astype(int)
        if axis == 0:
            tgt_i, tgt_j = other_cell, np.clip(new_cell, 0, cols - 1)
        else:
            tgt_i, tgt_j = np.clip(new_cell, 0, rows - 1), other_cell
        oob = (new_cell < 0) | (new_cell >= (cols if axis == 0 else rows))
        blocked = (new_cell != cur_cell) & (oob | spec.walls[tgt_i, tgt_j])
        boundary = np.where(new_cell > cur_cell, new_cell * cs - WALL_MARGIN, (new_cell + 1) * cs + WALL_MARGIN)
        new_pos[:, axis] = np.where(blocked, boundary, cand)
        new_vel[:, axis] = np.where(blocked, 0.0, new_vel[:, axis])
    return new_pos, new_vel


def step(spec: MazeSpec, state: EnvState, action: np.ndarray) -> EnvState:
    """Advance one timestep; actions are clipped to [-1, 1]^2 before use."""
    if state.t >= spec.horizon:
        raise ProtocolError(f"episode already terminated at t={state.t} (horizon {spec.horizon})")
    pos, vel = step_batch(spec, state.position[None, :], state.velocity[None, :], np.asarray(action, dtype=float)[None, :])
    return EnvState(position=pos[0], velocity=vel[0], t=state.t + 1)


def observe(state: EnvState) -> np.ndarray:
    """(x, y, vx, vy) read-out."""
    return np.concatenate([state.position, state.velocity])


def observe_batch(pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
    return np.concatenate([pos, vel], axis=1)
