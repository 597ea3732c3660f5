"""Bounded temporal representation: encoder, dual-constrained objective,

rescaled skill direction, and the relative-distance intrinsic reward.

The encoder ends in tanh, so representations live strictly inside the
unit box. Training maximizes alignment between per-step representation
displacement and the direction from the current representation toward
the episode's skill vector, subject to a per-step displacement budget
(1/horizon) enforced with a nonnegative dual variable, plus a term that
pins the initial-state representation to the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets
from .autodiff import Tensor, l2norm, minimum
from .errors import DegenerateDirection, SkipUpdate

DEGENERATE_EPS = 1e-6


@dataclass
class ReprState:
    """Encoder parameters plus the dual variable and constraint constants."""

    encoder: nets.NetParams  # obs -> d, final tanh
    lam: float  # dual variable, >= 0
    slack: float  # constraint cap (epsilon)
    step_budget: float  # 1/T
    center_weight: float = 1.0

    def copy(self) -> "ReprState":
        return ReprState(self.encoder.copy(), self.lam, self.slack, self.step_budget, self.center_weight)


def make_repr(obs_dim: int, skill_dim: int, hidden: int, n_hidden: int, rng, lam_init: float,
              slack: float, horizon: int, center_weight: float = 1.0) -> ReprState:
    enc = nets.init_mlp(obs_dim, skill_dim, hidden, n_hidden, rng, hidden_act="relu", final_act="tanh")
    return ReprState(enc, lam_init, slack, 1.0 / horizon, center_weight)


def encode(rep: ReprState, s: np.ndarray) -> np.ndarray:
    """Map observations into the open unit box (componentwise |u| < 1)."""
    return nets.forward(rep.encoder, s)


def skill_direction(z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Unit vector pointing from a representation toward a skill."""
    diff = np.asarray(z, dtype=float) - np.asarray(u, dtype=float)
    n = np.linalg.norm(diff)
    if n < DEGENERATE_EPS:
        raise DegenerateDirection(f"skill coincides with representation (distance {n:.2e})")
    return diff / n


def intrinsic_reward(rep: ReprState, s, s_next, z) -> np.ndarray:
    """Relative-distance reward: progress of the representation toward z.

    Accepts single transitions or batches; the magnitude can never exceed
    the representation displacement (triangle inequality), and rewards
    telescope along a trajectory to the endpoint distance difference.
    """
    u1 = encode(rep, s)
    u2 = encode(rep, s_next)
    z = np.asarray(z, dtype=float)
    return np.linalg.norm(z - u1, axis=-1) - np.linalg.norm(z - u2, axis=-1)


@dataclass
class ReprLosses:
    phi_loss: float
    lambda_loss: float
    alignment: float
    constraint_mean: float
    centering: float
    n_used: int
    n_dropped: int


def _objective_tape(rep: ReprState, batch: dict, params) -> tuple:
    """Shared builder for the representation loss on the autodiff tape.

    Returns (phi_loss Tensor, diagnostics dict of floats).
    """
    s, s_next, z = batch["s"], batch["s_next"], batch["z"]
    is_initial = batch.get("is_initial")
    u1 = nets.forward_tape(rep.encoder, s, params)
    u2 = nets.forward_tape(rep.encoder, s_next, params)
    delta = u2 - u1

    diff = np.asarray(z, dtype=float) - u1.data
    dist = np.linalg.norm(diff, axis=1)
    keep = dist >= DEGENERATE_EPS
    n_used = int(keep.sum())
    if n_used == 0:
        raise SkipUpdate("all skill directions in the batch are degenerate")

    # Alignment: displacement projected onto the (rescaled) skill direction.
    # The direction depends on u1, so gradient flows through it as well.
    zk = Tensor(np.asarray(z, dtype=float)[keep])
    toward = zk - u1[keep]
    dir_vec = toward / l2norm(toward, axis=1, keepdims=True)
    alignment = (delta[keep] * dir_vec).sum(axis=1).mean()

    # Per-step displacement budget, capped at the slack.
    constraint = minimum(rep.slack, rep.step_budget - l2norm(delta, axis=1)).mean()

    phi_obj = alignment + rep.lam * constraint
    centering_val = 0.0
    if is_initial is not None and np.any(is_initial):
        centering = -l2norm(u1[np.asarray(is_initial, dtype=bool)], axis=1).mean()
        phi_obj = phi_obj + rep.center_weight * centering
        centering_val = centering.item()
    phi_loss = -phi_obj
    diag = {
        "alignment": alignment.item(),
        "constraint_mean": constraint.item(),
        "centering": centering_val,
        "n_used": n_used,
        "n_dropped": int(len(dist) - n_used),
    }
    return phi_loss, diag


def repr_objective(batch: dict, rep: ReprState) -> ReprLosses:
    """Evaluate the representation losses without updating anything.

    `batch` maps "s", "s_next" to (B, obs) arrays, "z" to (B, d), and
    optionally "is_initial" to a (B,) bool mask of episode-start rows.
    """
    phi_loss, diag = _objective_tape(rep, batch, params=None)
    c_bar = diag["constraint_mean"]
    return ReprLosses(
        phi_loss=phi_loss.item(),
        lambda_loss=rep.lam * c_bar,
        alignment=diag["alignment"],
        constraint_mean=c_bar,
        centering=diag["centering"],
        n_used=diag["n_used"],
        n_dropped=diag["n_dropped"],
    )


def dual_update(lam: float, c_bar: float, lr: float) -> float:
    """Projected gradient step on lambda * c_bar, keeping lambda >= 0."""
    return max(0.0, lam - lr * c_bar)


def repr_step(rep: ReprState, batch: dict, opt: nets.AdamState, lr_lambda: float) -> ReprLosses:
    """One optimizer step on the encoder followed by the dual update."""
    params = nets.net_tensors(rep.encoder)
    phi_loss, diag = _objective_tape(rep, batch, params)
    phi_loss.backward()
    nets.adam_step(rep.encoder, nets.collect_grads(params), opt)
    c_bar = diag["constraint_mean"]
    lambda_loss = rep.lam * c_bar
    rep.lam = dual_update(rep.lam, c_bar, lr_lambda)
    return ReprLosses(
        phi_loss=phi_loss.item(),
        lambda_loss=lambda_loss,
        alignment=diag["alignment"],
        constraint_mean=c_bar,
        centering=diag["centering"],
        n_used=diag["n_used"],
        n_dropped=diag["n_dropped"],
    )
