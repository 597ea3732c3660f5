"""Run configuration: defaults, JSON ingestion, and override parsing.

Every knob of a training run lives in one flat ``RunConfig``. Defaults
follow the reference hyperparameter table (horizon 300, trajectory batch
16, replay 3e6, skill dim 2, learning rates 1e-4/1e-3, 2 hidden layers,
discount 0.99, minibatch 1024, dual slack 1e-3, regularizer weights 5/1,
population cap 15, 50 collection rounds per stage) except the hidden
width, which defaults to a desk-scale 256 (the reference 1024 is one
override away). Unknown keys fail fast; overrides use key=value syntax.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigError

MODES = ("rsd", "uniform-baseline")


@dataclass
class RunConfig:
    # run identity
    mode: str = "rsd"
    seed: int = 0
    layout: str = "umaze"
    stages: int = 40

    # environment / episode
    max_path_length: int = 300
    dt: float = 0.1
    damping: float = 0.1
    action_scale: float = 1.0
    v_max: float = 2.0
    cell_size: float = 1.0

    # collection
    trajectory_batch: int = 16
    steps_per_stage: int = 50  # collection rounds per stage
    replay_capacity: int = 3_000_000
    repr_buffer_stride: int = 10

    # models
    option_dim: int = 2
    model_layers: int = 2
    model_dim: int = 256

    # agent learning
    lr_common: float = 1e-4
    lr_phi: float = 1e-3
    gamma: float = 0.99
    batch_size: int = 1024
    agent_policy_training_steps: int = 50
    tau: float = 0.005
    reward_scale: float = 1.0
    alpha_init: float = 0.01
    lr_alpha: float = 1e-4
    target_entropy: float = -2.0

    # representation
    dual_slack: float = 0.001
    lr_lambda: float = 1e-4
    lambda_init: float = 30.0
    center_weight: float = 1.0

    # skill generation
    alpha1: float = 5.0
    alpha2: float = 1.0
    pop_max_size: int = 15
    rsg_training_steps: int = 500
    rsg_lr: float = 0.01
    rsg_sample_batch: int = 32
    rsg_value_samples: int = 8
    rsg_score_function: bool = False
    rsg_sigma_floor: float = 1e-3
    dz_mc_samples: int = 256
    gen_init_std: float = 0.5
    p_min: float = 0.01
    value_mc_samples: int = 32
    regret_refresh_samples: int = 32

    # evaluation / reporting
    eval_grid_res: int = 9
    eval_component_draws: int = 4
    eval_cell_size: float = 1.0
    success_radius: float = 1.0
    goal_min_chebyshev: int = 2
    entropy_mc_samples: int = 8192
    eval_every: int = 1
    checkpoint_every: int = 1
    record_wall_clock: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma: must lie in (0, 1), got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau: must lie in [0, 1], got {self.tau}")
        positive = (
            "stages", "max_path_length", "dt", "action_scale", "v_max", "cell_size",
            "trajectory_batch", "steps_per_stage", "replay_capacity", "repr_buffer_stride",
            "option_dim", "model_layers", "model_dim", "lr_common", "lr_phi", "batch_size",
            "agent_policy_training_steps", "alpha_init", "lr_alpha", "dual_slack", "reward_scale",
            "lr_lambda", "pop_max_size", "rsg_training_steps", "rsg_lr", "rsg_sample_batch",
            "rsg_value_samples", "dz_mc_samples", "gen_init_std", "p_min", "rsg_sigma_floor",
            "value_mc_samples", "regret_refresh_samples", "eval_grid_res",
            "eval_component_draws", "eval_cell_size", "success_radius", "entropy_mc_samples",
            "eval_every", "checkpoint_every",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive, got {getattr(self, name)}")
        for name in ("seed", "damping", "lambda_init", "center_weight", "alpha1", "alpha2",
                     "goal_min_chebyshev"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be nonnegative, got {getattr(self, name)}")
        if self.eval_grid_res < 2:
            raise ConfigError(f"eval_grid_res: must be >= 2, got {self.eval_grid_res}")
        if self.pop_max_size * self.p_min >= 1.0:
            raise ConfigError("p_min too large for the population size")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value, target_type: str):
    """Coerce a JSON or override value to the declared field type."""
    try:
        if target_type == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
            raise ValueError(f"not a boolean: {value!r}")
        if target_type == "int":
            if isinstance(value, bool):
                raise ValueError("boolean where integer expected")
            out = int(float(value)) if isinstance(value, str) else int(value)
            if float(out) != float(value):
                raise ValueError(f"not an integer: {value!r}")
            return out
        if target_type == "float":
            if isinstance(value, bool):
                raise ValueError("boolean where number expected")
            return float(value)
        if target_type == "str":
            if not isinstance(value, str):
                raise ValueError(f"expected string, got {type(value).__name__}")
            return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    raise ConfigError(f"{name}: unsupported field type {target_type}")


def from_dict(doc: dict, source: str = "config") -> RunConfig:
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    kwargs = {k: _coerce(f"{source}.{k}", v, _FIELDS[k]) for k, v in doc.items()}
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def apply_overrides(cfg: RunConfig, overrides: list) -> RunConfig:
    """Apply key=value strings on top of a config."""
    doc = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"override: unknown key {key!r}")
        doc[key] = _coerce(f"override.{key}", raw.strip(), _FIELDS[key])
    return from_dict(doc, source="override")


def load_config(path: str | None, overrides: list | None = None) -> RunConfig:
    """Read a JSON config (empty file means all defaults) plus overrides."""
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        if text.strip():
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
            if not isinstance(doc, dict):
                raise ConfigError(f"{path}: top level must be an object")
    cfg = from_dict(doc, source=path or "defaults")
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg
