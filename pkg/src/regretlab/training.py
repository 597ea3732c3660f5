"""Staged training loop: agent learning under population-sampled skills

interleaved with generator optimization, plus the uniform-skill baseline.

Each stage has two parts. Part 1 repeats `steps_per_stage` collection
rounds: recalibrate population sampling weights from where the last two
rounds' trajectories ended, sample a batch of skills, collect episodes,
then run inner updates that step the representation, its dual variable,
and the agent (with intrinsic rewards recomputed from the live encoder,
never the stale collection-time values). Part 2 freezes the agent,
optimizes a fresh generator against the regret landscape between the
current agent and the previous stage's snapshot, refreshes per-component
regret scores, and inserts the generator into the population.

The baseline mode replaces skill sampling with uniform unit vectors and
the representation objective/reward with their inner-product forms, and
skips Part 2 entirely.

The trainer is the sole writer of agent/encoder/population state; rollouts
and evaluation only read published parameters. Single-worker runs are
bit-reproducible for a fixed (config, seed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import maze, nets, reprspace, sac, skillgen
from .autodiff import Tensor, l2norm, minimum
from .buffers import ReplayBuffer, StageReprBuffer
from .config import RunConfig
from .errors import ConfigError
from .evaluation import EvalReport, cover_coords, goal_cells, rollout_skills, thorough_skill_set, zero_shot


@dataclass
class Trajectory:
    """One episode: transitions tagged with the episode's skill."""

    s: np.ndarray  # (T, obs)
    a: np.ndarray  # (T, act)
    s_next: np.ndarray  # (T, obs)
    z: np.ndarray  # (d,)
    r: np.ndarray  # (T,) collection-time intrinsic rewards
    positions: np.ndarray  # (T + 1, 2)


def uniform_unit_skill(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Isotropic direction on the unit sphere (baseline skill sampling)."""
    v = rng.standard_normal(dim)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.standard_normal(dim)
        n = np.linalg.norm(v)
    return v / n


def metra_reward(rep: reprspace.ReprState, s, s_next, z) -> np.ndarray:
    """Inner-product reward: representation displacement along the skill."""
    delta = reprspace.encode(rep, s_next) - reprspace.encode(rep, s)
    return (delta * np.asarray(z, dtype=float)).sum(axis=-1)


def metra_repr_objective(batch: dict, rep: reprspace.ReprState, params=None) -> tuple:
    """Baseline representation loss: displacement-skill alignment with a

    unit per-transition displacement cap (no direction rescaling, no
    centering). Returns (phi_loss Tensor, constraint mean float)."""
    u1 = nets.forward_tape(rep.encoder, batch["s"], params)
    u2 = nets.forward_tape(rep.encoder, batch["s_next"], params)
    delta = u2 - u1
    alignment = (delta * Tensor(np.asarray(batch["z"], dtype=float))).sum(axis=1).mean()
    constraint = minimum(rep.slack, 1.0 - l2norm(delta, axis=1)).mean()
    phi_loss = -(alignment + rep.lam * constraint)
    return phi_loss, constraint.item()


def metra_repr_step(rep: reprspace.ReprState, batch: dict, opt: nets.AdamState, lr_lambda: float) -> float:
    params = nets.net_tensors(rep.encoder)
    phi_loss, c_bar = metra_repr_objective(batch, rep, params)
    phi_loss.backward()
    nets.adam_step(rep.encoder, nets.collect_grads(params), opt)
    rep.lam = reprspace.dual_update(rep.lam, c_bar, lr_lambda)
    return c_bar


def collect_batch(spec: maze.MazeSpec, agent: sac.AgentParams, rep: reprspace.ReprState,
                  zs: np.ndarray, horizon: int, rng: np.random.Generator, mode: str = "rsd") -> list:
    """Roll N episodes in lockstep with stochastic actions, one skill each."""
    zs = np.atleast_2d(zs)
    n = len(zs)
    pos = np.tile(spec.start_position(), (n, 1))
    vel = np.zeros((n, 2))
    obs = [maze.observe_batch(pos, vel)]
    acts = []
    for _ in range(horizon):
        sz = np.concatenate([obs[-1], zs], axis=1)
        mean, log_std = sac._policy_heads(agent.policy, sz, agent.act_dim)
        a = np.tanh(mean + np.exp(log_std) * rng.standard_normal(mean.shape))
        pos, vel = maze.step_batch(spec, pos, vel, a)
        obs.append(maze.observe_batch(pos, vel))
        acts.append(a)
    obs = np.stack(obs, axis=1)  # (n, T+1, 4)
    acts = np.stack(acts, axis=1)  # (n, T, 2)
    out = []
    for i in range(n):
        s, s_next = obs[i, :-1], obs[i, 1:]
        if mode == "rsd":
            r = reprspace.intrinsic_reward(rep, s, s_next, zs[i])
        else:
            r = metra_reward(rep, s, s_next, zs[i])
        out.append(Trajectory(s, acts[i], s_next, zs[i].copy(), r, obs[i, :, :2].copy()))
    return out


def collect(spec: maze.MazeSpec, agent: sac.AgentParams, rep: reprspace.ReprState,
            z: np.ndarray, horizon: int, rng: np.random.Generator, mode: str = "rsd") -> Trajectory:
    """Roll one episode under a fixed skill."""
    return collect_batch(spec, agent, rep, np.atleast_2d(z), horizon, rng, mode)[0]


@dataclass
class StageResult:
    stage: int
    env_steps: int
    regret_mean: float
    pop_entropy: float
    cover: int
    ar: float
    fd_mean: float
    wall_clock_s: float
    rsg: skillgen.RsgDiagnostics | None = None
    regret_snapshot_stage: int | None = None


@dataclass
class Trainer:
    """Owns the world state of one run and advances it stage by stage."""

    cfg: RunConfig
    hooks: dict = field(default_factory=dict)
    capture_diagnostics: bool = False

    def __post_init__(self):
        cfg = self.cfg
        cfg.validate()
        self.spec = maze.load_layout(
            cfg.layout, cell_size=cfg.cell_size, dt=cfg.dt, damping=cfg.damping,
            action_scale=cfg.action_scale, v_max=cfg.v_max, horizon=cfg.max_path_length,
        )
        seeds = np.random.SeedSequence(cfg.seed).spawn(6)
        self.rngs = {
            name: np.random.Generator(np.random.PCG64(ss))
            for name, ss in zip(("init", "skill", "collect", "sac", "rsg", "eval"), seeds)
        }
        d = cfg.option_dim
        self.agent = sac.make_agent(4, d, 2, cfg.model_dim, cfg.model_layers,
                                    self.rngs["init"], cfg.gamma, cfg.alpha_init)
        self.rep = reprspace.make_repr(4, d, cfg.model_dim, cfg.model_layers, self.rngs["init"],
                                       cfg.lambda_init, cfg.dual_slack, cfg.max_path_length,
                                       cfg.center_weight)
        self.opts = sac.make_optimizers(cfg.lr_common)
        self.opts.alpha.lr = cfg.lr_alpha
        self.phi_opt = nets.AdamState(cfg.lr_phi)
        self.pop = skillgen.SkillPopulation(cfg.pop_max_size)
        self.replay = ReplayBuffer(cfg.replay_capacity, 4, 2, d)
        self.stage_buf = StageReprBuffer(d)
        self.snapshot_prev: sac.StageSnapshot | None = None
        self.stage = 0
        self.env_steps = 0
        self.last_round_finals = np.zeros((0, d))
        self.prev_round_finals = np.zeros((0, d))
        self.s0 = maze.observe(maze.reset(self.spec))
        self.last_capture: dict | None = None
        self.last_eval_report: EvalReport | None = None

    # -- stage machinery -------------------------------------------------

    def sample_skills(self, n: int) -> np.ndarray:
        d = self.cfg.option_dim
        if self.cfg.mode == "uniform-baseline":
            return np.stack([uniform_unit_skill(self.rngs["skill"], d) for _ in range(n)])
        return np.stack([skillgen.sample_skill(self.pop, self.rngs["skill"], d) for _ in range(n)])

    def _store_trajectories(self, trajs: list) -> None:
        stride = self.cfg.repr_buffer_stride
        finals = []
        for tr in trajs:
            horizon = len(tr.s)
            is_initial = np.zeros(horizon, dtype=bool)
            is_initial[0] = True
            self.replay.add_batch(tr.s, tr.a, tr.s_next, np.tile(tr.z, (horizon, 1)), tr.r, is_initial)
            phis = reprspace.encode(self.rep, tr.s[::stride])
            phi_final = reprspace.encode(self.rep, tr.s_next[-1])
            self.stage_buf.add_trajectory(phis, phi_final)
            finals.append(phi_final)
            self.env_steps += horizon
        self.prev_round_finals = self.last_round_finals
        self.last_round_finals = np.asarray(finals)

    def _inner_update(self) -> None:
        cfg = self.cfg
        batch = self.replay.sample(self.rngs["sac"], cfg.batch_size)
        if cfg.mode == "rsd":
            reprspace.repr_step(self.rep, batch, self.phi_opt, cfg.lr_lambda)
            rewards = reprspace.intrinsic_reward(self.rep, batch["s"], batch["s_next"], batch["z"])
        else:
            metra_repr_step(self.rep, batch, self.phi_opt, cfg.lr_lambda)
            rewards = metra_reward(self.rep, batch["s"], batch["s_next"], batch["z"])
        batch = dict(batch, r=rewards * cfg.reward_scale)
        sac.sac_update(self.agent, batch, self.opts, self.rngs["sac"], cfg.tau, cfg.target_entropy)
        if self.capture_diagnostics:
            self.last_capture = {
                "batch": {k: v.copy() for k, v in batch.items()},
                "rewards_used": rewards.copy(),
                "stored_rewards": self.replay.r.copy(),
                "encoder_at_update": self.rep.encoder.copy(),
            }

    def _part1(self) -> None:
        cfg = self.cfg
        for _ in range(cfg.steps_per_stage):
            if cfg.mode == "rsd" and len(self.pop) > 0 and len(self.last_round_finals) > 0:
                self.pop.weights = skillgen.recalibrate_weights(
                    self.pop, self.last_round_finals, self.prev_round_finals, cfg.p_min)
            zs = self.sample_skills(cfg.trajectory_batch)
            trajs = collect_batch(self.spec, self.agent, self.rep, zs, cfg.max_path_length,
                                  self.rngs["collect"], cfg.mode)
            self._store_trajectories(trajs)
            for _ in range(cfg.agent_policy_training_steps):
                self._inner_update()

    def _make_regret_fn(self):
        if self.snapshot_prev is None:
            return None
        agent, prev, s0 = self.agent, self.snapshot_prev, self.s0
        n, rng = self.cfg.rsg_value_samples, self.rngs["rsg"]

        def regret_fn(z_t: Tensor) -> Tensor:
            seed = int(rng.integers(0, 2**63))
            return (sac.value_batch_tape(agent, s0, z_t, n, seed)
                    - sac.value_batch_tape(prev, s0, z_t, n, seed))

        return regret_fn

    def _refresh_scores(self, gen: skillgen.Generator) -> tuple:
        """Re-score every component plus the candidate against current regret."""
        cfg = self.cfg
        rng = self.rngs["rsg"]
        seed = int(rng.integers(0, 2**63))

        def score(g: skillgen.Generator) -> float:
            zs = np.clip(g.sample(rng, cfg.regret_refresh_samples), -1.0, 1.0)
            return float(np.mean(sac.regret_batch(self.agent, self.snapshot_prev, self.s0, zs,
                                                  cfg.value_mc_samples, seed)))

        refreshed = np.array([score(g) for g in self.pop.members])
        return refreshed, score(gen)

    def _part2(self, k: int) -> tuple:
        cfg = self.cfg
        boundary = sac.snapshot(self.agent, k)
        if "part1_end" in self.hooks:
            self.hooks["part1_end"](self, k)
        regret_fn = self._make_regret_fn()
        rsg_cfg = skillgen.RsgConfig(
            steps=cfg.rsg_training_steps, lr=cfg.rsg_lr, alpha1=cfg.alpha1, alpha2=cfg.alpha2,
            sample_batch=cfg.rsg_sample_batch, dz_samples=cfg.dz_mc_samples,
            init_std=cfg.gen_init_std, score_function=cfg.rsg_score_function,
            sigma_floor=cfg.rsg_sigma_floor,
        )
        gen0 = skillgen.fresh_generator(cfg.option_dim, k, cfg.gen_init_std)
        gen, diag = skillgen.rsg_update(gen0, self.pop, regret_fn, self.stage_buf.points(),
                                        rsg_cfg, self.rngs["rsg"])
        if diag.aborted:
            regret_mean = 0.0
        else:
            refreshed, gen_score = self._refresh_scores(gen)
            # stage regret reflects the population the agent just trained
            # on, scored before this stage's generator joins it
            regret_mean = float(np.mean(refreshed)) if len(refreshed) else 0.0
            if len(refreshed):
                self.pop.regrets = refreshed
            self.pop = skillgen.population_insert(self.pop, gen, gen_score, cfg.pop_max_size)
        snapshot_stage = self.snapshot_prev.stage if self.snapshot_prev is not None else None
        self.snapshot_prev = boundary
        return regret_mean, diag, snapshot_stage

    def run_stage(self, k: int | None = None) -> StageResult:
        cfg = self.cfg
        if k is None:
            k = self.stage
        if k != self.stage:
            raise ConfigError(f"stage counter mismatch: trainer at {self.stage}, asked to run {k}")
        t0 = time.monotonic()
        self._part1()
        diag = None
        snapshot_stage = None
        if cfg.mode == "rsd":
            regret_mean, diag, snapshot_stage = self._part2(k)
        else:
            regret_mean = 0.0
        self.stage_buf.clear()
        report = self.evaluate(stage=k, regret_mean=regret_mean)
        self.last_eval_report = report
        wall = time.monotonic() - t0 if cfg.record_wall_clock else 0.0
        self.stage = k + 1
        return StageResult(
            stage=k, env_steps=self.env_steps, regret_mean=regret_mean,
            pop_entropy=report.pop_entropy, cover=report.cover_coords,
            ar=report.ar, fd_mean=report.fd_mean, wall_clock_s=wall,
            rsg=diag, regret_snapshot_stage=snapshot_stage,
        )

    # -- evaluation -------------------------------------------------------

    def evaluate(self, stage: int, regret_mean: float) -> EvalReport:
        cfg = self.cfg
        skills = thorough_skill_set(self.pop, cfg.eval_grid_res, cfg.eval_component_draws,
                                    self.rngs["eval"], cfg.option_dim)
        trajs = rollout_skills(self.spec, self.agent, skills)
        cover = cover_coords(trajs, cfg.eval_cell_size)
        goals = goal_cells(self.spec, cfg.goal_min_chebyshev)
        goal_mode = "rsd" if cfg.mode == "rsd" else "metra-f"
        zs_report = zero_shot(self.spec, self.agent, self.rep, goals, goal_mode, cfg.success_radius)
        if len(self.pop) > 0:
            entropy = skillgen.population_entropy(self.pop, cfg.entropy_mc_samples, self.rngs["eval"])
        else:
            entropy = 0.0
        return EvalReport(
            stage=stage, env_steps=self.env_steps, cover_coords=cover,
            regret_mean=regret_mean, pop_entropy=entropy,
            ar=zs_report.ar, fd_mean=zs_report.fd_mean,
            n_skills=len(skills), goal_fd=zs_report.goal_fd, goal_success=zs_report.goal_success,
        )
