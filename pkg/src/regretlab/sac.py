"""Skill-conditioned soft actor-critic and the stage-to-stage regret estimator.

The policy is a squashed diagonal Gaussian over [-1, 1]^2 conditioned on
(observation, skill); twin critics score (observation, action, skill).
Value estimates are entropy-regularized Monte Carlo averages, and regret
is the value difference between the current agent and a frozen snapshot
of the previous stage's agent, evaluated with paired noise so that
identical agents give exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets
from .autodiff import Tensor, as_tensor, concat, minimum
from .errors import NumericError

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOGPROB_EPS = 1e-6


@dataclass
class AgentParams:
    """Policy, twin critics with target copies, and the entropy coefficient."""

    policy: nets.NetParams  # (obs + d) -> 2 * act (mean, log_std)
    q1: nets.NetParams  # (obs + act + d) -> 1
    q2: nets.NetParams
    q1_target: nets.NetParams
    q2_target: nets.NetParams
    log_alpha: float
    gamma: float
    act_dim: int = 2

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))

    def copy(self) -> "AgentParams":
        return AgentParams(
            self.policy.copy(), self.q1.copy(), self.q2.copy(),
            self.q1_target.copy(), self.q2_target.copy(),
            self.log_alpha, self.gamma, self.act_dim,
        )


@dataclass(frozen=True)
class StageSnapshot:
    """Frozen agent parameters from the end of one learning stage."""

    policy: nets.NetParams
    q1: nets.NetParams
    q2: nets.NetParams
    log_alpha: float
    stage: int

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))


def snapshot(agent: AgentParams, stage: int) -> StageSnapshot:
    return StageSnapshot(agent.policy.copy(), agent.q1.copy(), agent.q2.copy(), agent.log_alpha, stage)


def make_agent(obs_dim: int, skill_dim: int, act_dim: int, hidden: int, n_hidden: int,
               rng: np.random.Generator, gamma: float, alpha_init: float) -> AgentParams:
    policy = nets.init_mlp(obs_dim + skill_dim, 2 * act_dim, hidden, n_hidden, rng, final_scale=0.01)
    q_in = obs_dim + act_dim + skill_dim
    q1 = nets.init_mlp(q_in, 1, hidden, n_hidden, rng)
    q2 = nets.init_mlp(q_in, 1, hidden, n_hidden, rng)
    return AgentParams(policy, q1, q2, q1.copy(), q2.copy(), float(np.log(alpha_init)), gamma, act_dim)


def _policy_heads(policy: nets.NetParams, sz: np.ndarray, act_dim: int) -> tuple:
    out = nets.forward(policy, sz)
    mean = out[..., :act_dim]
    log_std = np.clip(out[..., act_dim:], LOG_STD_MIN, LOG_STD_MAX)
    return mean, log_std


def _squash_logprob(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log density of a = tanh(u) under the squashed Gaussian policy."""
    std = np.exp(log_std)
    gauss = -0.5 * ((u - mean) / std) ** 2 - log_std - 0.5 * np.log(2.0 * np.pi)
    corr = np.log(1.0 - np.tanh(u) ** 2 + LOGPROB_EPS)
    return (gauss - corr).sum(axis=-1)


def act(agent: AgentParams, s: np.ndarray, z: np.ndarray, mode: str = "stochastic",
        rng: np.random.Generator | None = None) -> np.ndarray:
    """Sample (or take the mode of) the squashed policy; always in [-1, 1]."""
    sz = np.concatenate([np.atleast_2d(s), np.atleast_2d(z)], axis=1)
    mean, log_std = _policy_heads(agent.policy, sz, agent.act_dim)
    if mode == "deterministic":
        a = np.tanh(mean)
    else:
        xi = rng.standard_normal(mean.shape)
        a = np.tanh(mean + np.exp(log_std) * xi)
    return a[0] if np.ndim(s) == 1 else a


def sample_action_logprob(agent_policy: nets.NetParams, sz: np.ndarray, act_dim: int,
                          rng: np.random.Generator) -> tuple:
    mean, log_std = _policy_heads(agent_policy, sz, act_dim)
    u = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    return np.tanh(u), _squash_logprob(u, mean, log_std)


@dataclass
class SacDiagnostics:
    critic_loss: float
    policy_loss: float
    alpha: float
    entropy: float
    target_q: np.ndarray  # regression targets used this update


def _policy_tape(policy: nets.NetParams, sz_t, act_dim: int, xi: np.ndarray, params=None) -> tuple:
    """Differentiable squashed sample and its log-probability."""
    out = nets.forward_tape(policy, sz_t, params)
    mean = out[:, :act_dim]
    log_std = out[:, act_dim:].clip(LOG_STD_MIN, LOG_STD_MAX)
    std = log_std.exp()
    u = mean + std * xi
    a = u.tanh()
    gauss = (u - mean) ** 2 / (std**2) * -0.5 - log_std - 0.5 * np.log(2.0 * np.pi)
    corr = (1.0 - a**2 + LOGPROB_EPS).log()
    logp = (gauss - corr).sum(axis=1)
    return a, logp


@dataclass
class AgentOptimizers:
    policy: nets.AdamState
    q1: nets.AdamState
    q2: nets.AdamState
    alpha: nets.AdamState


def make_optimizers(lr: float) -> AgentOptimizers:
    return AgentOptimizers(nets.AdamState(lr), nets.AdamState(lr), nets.AdamState(lr), nets.AdamState(lr))


def sac_update(agent: AgentParams, batch: dict, opts: AgentOptimizers, rng: np.random.Generator,
               tau: float, target_entropy: float) -> SacDiagnostics:
    """One soft actor-critic update on a transition batch.

    batch: "s" (B, obs), "a" (B, act), "s_next" (B, obs), "z" (B, d),
    "r" (B,). Critics regress to the entropy-regularized one-step backup,
    the policy ascends the min-critic minus entropy cost, the entropy
    coefficient is tuned toward `target_entropy`, and target critics are
    blended with rate `tau`.
    """
    s, a, s_next, z, r = batch["s"], batch["a"], batch["s_next"], batch["z"], batch["r"]
    alpha = agent.alpha
    sz_next = np.concatenate([s_next, z], axis=1)
    a_next, logp_next = sample_action_logprob(agent.policy, sz_next, agent.act_dim, rng)
    saz_next = np.concatenate([s_next, a_next, z], axis=1)
    q_next = np.minimum(nets.forward(agent.q1_target, saz_next)[:, 0], nets.forward(agent.q2_target, saz_next)[:, 0])
    y = r + agent.gamma * (q_next - alpha * logp_next)
    if not np.all(np.isfinite(y)):
        raise NumericError(f"non-finite critic target (batch fingerprint {_fingerprint(batch)})")

    saz = np.concatenate([s, a, z], axis=1)
    y_t = Tensor(y[:, None])
    critic_loss_val = 0.0
    for q_net, opt in ((agent.q1, opts.q1), (agent.q2, opts.q2)):
        params = nets.net_tensors(q_net)
        pred = nets.forward_tape(q_net, saz, params)
        loss = ((pred - y_t) ** 2).mean()
        loss.backward()
        nets.adam_step(q_net, nets.collect_grads(params), opt)
        critic_loss_val += loss.item()

    # Policy: fresh reparameterized actions; critic parameters stay frozen.
    sz = np.concatenate([s, z], axis=1)
    xi = rng.standard_normal((len(s), agent.act_dim))
    params = nets.net_tensors(agent.policy)
    a_pi, logp_pi = _policy_tape(agent.policy, sz, agent.act_dim, xi, params)
    saz_pi = concat([as_tensor(s), a_pi, as_tensor(z)], axis=1)
    q_pi = minimum(nets.forward_tape(agent.q1, saz_pi)[:, 0], nets.forward_tape(agent.q2, saz_pi)[:, 0])
    policy_loss = (logp_pi * alpha - q_pi).mean()
    policy_loss.backward()
    nets.adam_step(agent.policy, nets.collect_grads(params), opts.policy)

    # Entropy coefficient: descend J(alpha) = E[-alpha (log pi + H_target)].
    logp_mean = float(np.mean(logp_pi.data))
    grad_log_alpha = -alpha * (logp_mean + target_entropy)
    la = np.array([agent.log_alpha])
    opts.alpha.apply([la], [np.array([grad_log_alpha])])
    agent.log_alpha = float(la[0])

    nets.blend_inplace(agent.q1_target, agent.q1, tau)
    nets.blend_inplace(agent.q2_target, agent.q2, tau)
    return SacDiagnostics(
        critic_loss=critic_loss_val,
        policy_loss=policy_loss.item(),
        alpha=agent.alpha,
        entropy=-logp_mean,
        target_q=y,
    )


def _fingerprint(batch: dict) -> str:
    parts = [f"{k}={np.asarray(v).sum():.6g}" for k, v in sorted(batch.items())]
    return ",".join(parts)


def _noise(seed: int, n_samples: int, act_dim: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(seed)).standard_normal((n_samples, act_dim))


def value_of(params: AgentParams | StageSnapshot, s: np.ndarray, z: np.ndarray,
             n_samples: int = 32, seed: int = 0) -> float:
    """Entropy-regularized value estimate at (s, z), deterministic per seed."""
    return float(value_batch(params, s, np.atleast_2d(z), n_samples, seed)[0])


def value_batch(params: AgentParams | StageSnapshot, s: np.ndarray, zs: np.ndarray,
                n_samples: int = 32, seed: int = 0) -> np.ndarray:
    """Vectorized value estimates for many skills at one start state."""
    zs = np.atleast_2d(zs)
    n_z, d = zs.shape
    act_dim = getattr(params, "act_dim", 2)
    xi = _noise(seed, n_samples, act_dim)
    s_rep = np.broadcast_to(np.asarray(s, dtype=float), (n_z, len(s))).reshape(n_z, -1)
    sz = np.concatenate([s_rep, zs], axis=1)
    mean, log_std = _policy_heads(params.policy, sz, act_dim)
    std = np.exp(log_std)
    # (n_z, n_samples, act): same noise rows for every skill (paired draws)
    u = mean[:, None, :] + std[:, None, :] * xi[None, :, :]
    a = np.tanh(u)
    logp = _squash_logprob(u, mean[:, None, :], log_std[:, None, :])
    saz = np.concatenate(
        [np.broadcast_to(s_rep[:, None, :], (n_z, n_samples, s_rep.shape[1])),
         a,
         np.broadcast_to(zs[:, None, :], (n_z, n_samples, d))],
        axis=2,
    ).reshape(n_z * n_samples, -1)
    q = np.minimum(nets.forward(params.q1, saz)[:, 0], nets.forward(params.q2, saz)[:, 0]).reshape(n_z, n_samples)
    alpha = params.alpha
    return (q - alpha * logp).mean(axis=1)


def value_batch_tape(params: AgentParams | StageSnapshot, s: np.ndarray, zs_t: Tensor,
                     n_samples: int, seed: int) -> Tensor:
    """Differentiable twin of ``value_batch`` with gradients flowing into zs."""
    n_z, d = zs_t.shape
    act_dim = getattr(params, "act_dim", 2)
    xi = _noise(seed, n_samples, act_dim)
    s_rep = np.broadcast_to(np.asarray(s, dtype=float), (n_z, len(s))).reshape(n_z, -1)
    sz = concat([as_tensor(s_rep), zs_t], axis=1)
    out = nets.forward_tape(params.policy, sz)
    mean = out[:, :act_dim].repeat_rows(n_samples)
    log_std = out[:, act_dim:].clip(LOG_STD_MIN, LOG_STD_MAX).repeat_rows(n_samples)
    std = log_std.exp()
    xi_all = np.tile(xi, (n_z, 1))  # row i*k+j pairs skill i with noise row j
    u = mean + std * xi_all
    a = u.tanh()
    gauss = (u - mean) ** 2 / (std**2) * -0.5 - log_std - 0.5 * np.log(2.0 * np.pi)
    corr = (1.0 - a**2 + LOGPROB_EPS).log()
    logp = (gauss - corr).sum(axis=1)
    s_big = np.repeat(s_rep, n_samples, axis=0)
    z_big = zs_t.repeat_rows(n_samples)
    saz = concat([as_tensor(s_big), a, z_big], axis=1)
    q = minimum(nets.forward_tape(params.q1, saz)[:, 0], nets.forward_tape(params.q2, saz)[:, 0])
    return (q - logp * params.alpha).reshape(n_z, n_samples).mean(axis=1)


def regret(current: AgentParams, previous: StageSnapshot | None, s0: np.ndarray, z: np.ndarray,
           n_samples: int = 32, seed: int = 0) -> float:
    """Value improvement of the current agent over the previous stage's.

    Uses paired noise draws, so regret(a, a) is exactly zero and swapping
    the agents negates the result. With no previous snapshot (stage 0)
    the regret is defined as zero.
    """
    if previous is None:
        return 0.0
    return value_of(current, s0, z, n_samples, seed) - value_of(previous, s0, z, n_samples, seed)


def regret_batch(current: AgentParams, previous: StageSnapshot | None, s0: np.ndarray,
                 zs: np.ndarray, n_samples: int = 32, seed: int = 0) -> np.ndarray:
    if previous is None:
        return np.zeros(len(np.atleast_2d(zs)))
    return value_batch(current, s0, zs, n_samples, seed) - value_batch(previous, s0, zs, n_samples, seed)
