"""Transition replay and the per-stage representation buffer."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class ReplayBuffer:
    """FIFO ring of (s, a, s', z, r) transitions with episode-start flags."""

    def __init__(self, capacity: int, obs_dim: int = 4, act_dim: int = 2, skill_dim: int = 2):
        if capacity < 1:
            raise ConfigError("replay capacity must be positive")
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, obs_dim))
        self.a = np.zeros((capacity, act_dim))
        self.s_next = np.zeros((capacity, obs_dim))
        self.z = np.zeros((capacity, skill_dim))
        self.r = np.zeros(capacity)
        self.is_initial = np.zeros(capacity, dtype=bool)
        self.idx = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add_batch(self, s, a, s_next, z, r, is_initial) -> None:
        n = len(s)
        pos = (self.idx + np.arange(n)) % self.capacity
        self.s[pos] = s
        self.a[pos] = a
        self.s_next[pos] = s_next
        self.z[pos] = z
        self.r[pos] = r
        self.is_initial[pos] = is_initial
        self.idx = int((self.idx + n) % self.capacity)
        self.size = int(min(self.size + n, self.capacity))

    def sample(self, rng: np.random.Generator, batch_size: int) -> dict:
        if self.size == 0:
            raise ConfigError("cannot sample from an empty replay buffer")
        pick = rng.integers(0, self.size, size=batch_size)
        return {
            "s": self.s[pick].copy(),
            "a": self.a[pick].copy(),
            "s_next": self.s_next[pick].copy(),
            "z": self.z[pick].copy(),
            "r": self.r[pick].copy(),
            "is_initial": self.is_initial[pick].copy(),
        }


class StageReprBuffer:
    """Representations observed during the current stage.

    Stores strided per-trajectory encodings plus a flagged final-state
    encoding per episode; cleared at every stage boundary.
    """

    def __init__(self, skill_dim: int = 2):
        self.skill_dim = skill_dim
        self._points: list = []
        self._final: list = []

    def __len__(self) -> int:
        return len(self._points)

    def add_trajectory(self, strided_phis: np.ndarray, final_phi: np.ndarray) -> None:
        self._points.extend(np.atleast_2d(strided_phis))
        self._points.append(np.asarray(final_phi, dtype=float))
        self._final.append(np.asarray(final_phi, dtype=float))

    def points(self) -> np.ndarray:
        if not self._points:
            return np.zeros((0, self.skill_dim))
        return np.asarray(self._points)

    def final_states(self) -> np.ndarray:
        if not self._final:
            return np.zeros((0, self.skill_dim))
        return np.asarray(self._final)

    def clear(self) -> None:
        self._points = []
        self._final = []
