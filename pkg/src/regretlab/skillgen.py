"""Regret-seeking skill generators and their bounded population.

Each generator is a diagonal Gaussian over the skill box; the population
is a mixture of up to `max_size` past generators. Training a fresh
generator ascends expected regret plus two regularizers: a KL term that
pushes it away from the existing mixture (diversity) and a proximity
term that pulls it toward recently visited state representations (so
proposed skills stay near the agent's capability frontier). Sampling
weights are recalibrated greedily from where recent trajectories ended;
eviction drops the component with the lowest stored regret.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, diag_gauss_logpdf
from .errors import ConfigError, EmptyBuffer, NumericError
from .nets import AdamState

SIGMA_FLOOR = 1e-3
LOG_RATIO_CLAMP = 20.0


@dataclass
class Generator:
    """Diagonal Gaussian over skills, tagged with its creation stage."""

    mean: np.ndarray
    log_std: np.ndarray
    stage: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_std = np.asarray(self.log_std, dtype=np.float64)
        self.log_std = np.maximum(self.log_std, np.log(SIGMA_FLOOR))

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        quad = ((z - self.mean) / self.std) ** 2
        return -0.5 * quad.sum(axis=1) - self.log_std.sum() - 0.5 * self.dim * np.log(2.0 * np.pi)

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal((n, self.dim))

    def copy(self) -> "Generator":
        return Generator(self.mean.copy(), self.log_std.copy(), self.stage)


def fresh_generator(dim: int, stage: int, init_std: float = 0.5) -> Generator:
    """Stage-start initialization: centered, wide enough to cover the box."""
    return Generator(np.zeros(dim), np.full(dim, np.log(init_std)), stage)


@dataclass
class SkillPopulation:
    """Bounded ring of generators with sampling weights and regret scores."""

    max_size: int
    members: list = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    regrets: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.members)

    def validate(self) -> None:
        if len(self.members) > self.max_size:
            raise ConfigError("population exceeds its maximum size")
        if len(self.members) and abs(self.weights.sum() - 1.0) > 1e-9:
            raise ConfigError("population weights must sum to 1")

    def copy(self) -> "SkillPopulation":
        return SkillPopulation(self.max_size, [g.copy() for g in self.members],
                               self.weights.copy(), self.regrets.copy())


def sample_skill(pop: SkillPopulation, rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Draw one skill: weighted component choice, Gaussian draw, box clip.

    An empty population (stage 0) falls back to uniform over the box.
    """
    if len(pop) == 0:
        return rng.uniform(-1.0, 1.0, size=dim)
    idx = rng.choice(len(pop), p=pop.weights)
    z = pop.members[idx].sample(rng, 1)[0]
    return np.clip(z, -1.0, 1.0)


def mixture_sample(pop: SkillPopulation, rng: np.random.Generator, n: int) -> np.ndarray:
    """Unclipped draws from the uniform-weight mixture density.

    This is the sampling path for density-based estimates (KL, entropy),
    which must match ``population_logpdf`` — per-stage sampling weights
    and the box clip play no role there.
    """
    if len(pop) == 0:
        raise ConfigError("cannot sample from an empty population")
    idx = rng.integers(0, len(pop), size=n)
    out = np.empty((n, pop.members[0].dim))
    for i in range(len(pop)):
        mask = idx == i
        if mask.any():
            out[mask] = pop.members[i].sample(rng, int(mask.sum()))
    return out


def population_logpdf(pop: SkillPopulation, z: np.ndarray) -> np.ndarray:
    """Log density of the uniform-weight component mixture at z (batched)."""
    if len(pop) == 0:
        raise ConfigError("empty population has no density")
    logs = np.stack([g.logpdf(z) for g in pop.members], axis=0)  # (k, n)
    m = logs.max(axis=0)
    return m + np.log(np.exp(logs - m).sum(axis=0)) - np.log(len(pop))


def kl_diversity(pop: SkillPopulation, gen: Generator, m_samples: int,
                 rng: np.random.Generator, clamp: float = LOG_RATIO_CLAMP) -> float:
    """Monte Carlo KL from the population mixture to a candidate generator.

    Log ratios are clamped to +-`clamp` to tame the estimator when the
    candidate has near-zero density at population samples.
    """
    if m_samples < 1:
        raise ConfigError("m_samples must be >= 1")
    z = mixture_sample(pop, rng, m_samples)
    ratio = population_logpdf(pop, z) - gen.logpdf(z)
    return float(np.clip(ratio, -clamp, clamp).mean())


def proximity(gen: Generator, buffer_points: np.ndarray) -> float:
    """Highest generator log density over visited representations."""
    pts = np.atleast_2d(np.asarray(buffer_points, dtype=float))
    if pts.size == 0:
        raise EmptyBuffer("proximity requested with an empty stage buffer")
    return float(gen.logpdf(pts).max())


def population_entropy(pop: SkillPopulation, m_samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo entropy of the uniform-weight mixture, in nats."""
    if m_samples < 1:
        raise ConfigError("m_samples must be >= 1")
    z = mixture_sample(pop, rng, m_samples)
    return float(-population_logpdf(pop, z).mean())


def population_insert(pop: SkillPopulation, gen: Generator, regret_score: float,
                      max_size: int | None = None) -> SkillPopulation:
    """Append a finished generator, evicting the lowest-regret component

    (oldest stage id among ties) when the population is full. Weights
    reset to uniform pending the next recalibration."""
    limit = pop.max_size if max_size is None else max_size
    members = [g.copy() for g in pop.members]
    regrets = list(pop.regrets)
    if len(members) >= limit:
        worst = min(range(len(members)), key=lambda i: (regrets[i], members[i].stage))
        del members[worst]
        del regrets[worst]
    members.append(gen.copy())
    regrets.append(float(regret_score))
    n = len(members)
    return SkillPopulation(limit, members, np.full(n, 1.0 / n), np.asarray(regrets))


def recalibrate_weights(pop: SkillPopulation, b_new: np.ndarray, b_old: np.ndarray,
                        p_min: float) -> np.ndarray:
    """Greedy sampling-weight update from recent final-state representations.

    Each component is scored by how much likelier the newest final states
    are under it than the previous round's; a softmax turns scores into
    weights, floored at `p_min` and renormalized. An empty previous round
    keeps the uniform weights.
    """
    n = len(pop)
    if n == 0:
        raise ConfigError("cannot recalibrate an empty population")
    b_new = np.atleast_2d(np.asarray(b_new, dtype=float))
    b_old = np.atleast_2d(np.asarray(b_old, dtype=float))
    if b_new.size == 0:
        raise ConfigError("recalibration requires at least one new final state")
    if b_old.size == 0:
        return np.full(n, 1.0 / n)
    scores = np.array([g.logpdf(b_new).max() - g.logpdf(b_old).max() for g in pop.members])
    scores -= scores.max()
    w = np.exp(scores)
    w /= w.sum()
    return _floor_simplex(w, p_min)


def _floor_simplex(w: np.ndarray, p_min: float) -> np.ndarray:
    """Project weights so every entry is >= p_min and the sum stays 1."""
    n = len(w)
    if n * p_min >= 1.0:
        raise ConfigError(f"floor {p_min} infeasible for {n} components")
    w = w.copy()
    floored = np.zeros(n, dtype=bool)
    for _ in range(n):
        below = (w < p_min) & ~floored
        if not below.any():
            break
        floored |= below
        w[floored] = p_min
        free = ~floored
        budget = 1.0 - floored.sum() * p_min
        total = w[free].sum()
        if total <= 0.0:
            w[free] = budget / max(free.sum(), 1)
        else:
            w[free] *= budget / total
    return w


@dataclass
class RsgConfig:
    """Knobs for one generator-optimization run."""

    steps: int = 500
    lr: float = 0.01
    alpha1: float = 5.0  # diversity weight
    alpha2: float = 1.0  # proximity weight
    sample_batch: int = 32  # z draws per step for the regret term
    dz_samples: int = 256  # mixture draws per step for the KL term
    init_std: float = 0.5
    score_function: bool = False  # REINFORCE fallback for the regret term
    sigma_floor: float = SIGMA_FLOOR  # training floor; never below the invariant


@dataclass
class RsgDiagnostics:
    objective: float
    regret_term: float
    dz_term: float
    dphi_term: float
    aborted: bool = False
    proximity_skipped: bool = False


def rsg_update(gen: Generator, pop: SkillPopulation, regret_fn, buffer_points,
               cfg: RsgConfig, rng: np.random.Generator) -> tuple:
    """Optimize a generator to propose high-regret, novel, reachable skills.

    `regret_fn` maps a (n, d) skill Tensor to a differentiable (n,) regret
    Tensor (None when no previous stage exists, e.g. stage 0, making the
    regret term zero). `buffer_points` holds visited representations for
    the proximity term; if empty that term is skipped and flagged.

    Returns (trained Generator, RsgDiagnostics). A non-finite objective
    aborts the optimization and returns the input generator unchanged.
    """
    mean = Tensor(gen.mean.copy(), requires_grad=True)
    log_std = Tensor(gen.log_std.copy(), requires_grad=True)
    opt = AdamState(cfg.lr)
    log_floor = np.log(max(cfg.sigma_floor, SIGMA_FLOOR))
    pts = np.atleast_2d(np.asarray(buffer_points, dtype=float)) if buffer_points is not None else np.zeros((0, gen.dim))
    have_buffer = pts.size > 0
    diag = RsgDiagnostics(0.0, 0.0, 0.0, 0.0, proximity_skipped=not have_buffer)

    for _ in range(cfg.steps):
        terms = []
        reg_val = dz_val = dphi_val = 0.0

        if regret_fn is not None:
            if cfg.score_function:
                z_raw = mean.data + np.exp(log_std.data) * rng.standard_normal((cfg.sample_batch, gen.dim))
                z_c = np.clip(z_raw, -1.0, 1.0)
                reg = np.asarray(regret_fn(Tensor(z_c)).data)
                baseline = reg.mean()
                logq = diag_gauss_logpdf(z_raw, mean, log_std)
                reg_term = (logq * (reg - baseline)).mean() + baseline
            else:
                xi = rng.standard_normal((cfg.sample_batch, gen.dim))
                z = (mean + log_std.exp() * xi).clip(-1.0, 1.0)
                reg_term = regret_fn(z).mean()
            terms.append(reg_term)
            reg_val = float(reg_term.data)

        if len(pop) > 0 and cfg.alpha1 != 0.0:
            zp = mixture_sample(pop, rng, cfg.dz_samples)
            log_p = population_logpdf(pop, zp)
            log_q = diag_gauss_logpdf(zp, mean, log_std)
            dz = (Tensor(log_p) - log_q).clip(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP).mean()
            terms.append(dz * cfg.alpha1)
            dz_val = float(dz.data)

        if have_buffer and cfg.alpha2 != 0.0:
            dphi = diag_gauss_logpdf(pts, mean, log_std).max()
            terms.append(dphi * cfg.alpha2)
            dphi_val = float(dphi.data)

        if not terms:
            break
        objective = terms[0]
        for t in terms[1:]:
            objective = objective + t
        if not np.isfinite(objective.data):
            return gen, RsgDiagnostics(float(objective.data), reg_val, dz_val, dphi_val,
                                       aborted=True, proximity_skipped=not have_buffer)
        loss = -objective
        try:
            loss.backward()
        except NumericError:
            return gen, RsgDiagnostics(float(objective.data), reg_val, dz_val, dphi_val,
                                       aborted=True, proximity_skipped=not have_buffer)
        g_mean = mean.grad if mean.grad is not None else np.zeros_like(mean.data)
        g_ls = log_std.grad if log_std.grad is not None else np.zeros_like(log_std.data)
        opt.apply([mean.data, log_std.data], [g_mean, g_ls])
        mean.grad = None
        log_std.grad = None
        np.maximum(log_std.data, log_floor, out=log_std.data)
        diag = RsgDiagnostics(float(objective.data), reg_val, dz_val, dphi_val,
                              proximity_skipped=not have_buffer)

    return Generator(mean.data.copy(), log_std.data.copy(), gen.stage), diag
