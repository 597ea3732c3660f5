"""Run directory lifecycle: manifests, per-stage checkpoints, metrics,

resume, and offline evaluation of saved checkpoints.

A run directory is self-describing:

    <out>/<name>-<seed>-<timestamp>/
        manifest.json     resolved config + provenance, written once
        config.json       the resolved config alone
        ckpt-XXXX.json    training state at the end of stage XXXX
        metrics.csv       one row per evaluated stage
        eval/             reports from offline evaluation
        figures/          rendered figures (report command)
"""

from __future__ import annotations

import datetime as _dt
import glob
import json
import os
import sys
import time

import numpy as np

from . import checkpoint as ckpt
from . import evaluation, maze, skillgen
from .config import RunConfig, from_dict
from .errors import ConfigError
from .training import Trainer

PACKAGE_VERSION = "0.1.0"


def version_string() -> str:
    return f"regretlab-{PACKAGE_VERSION}"


def create_run_dir(cfg: RunConfig, out_base: str, name: str | None = None) -> str:
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    base = name or f"{cfg.layout}-{cfg.mode}"
    run_dir = os.path.join(out_base, f"{base}-{cfg.seed}-{stamp}")
    suffix = 0
    while os.path.exists(run_dir):
        suffix += 1
        run_dir = os.path.join(out_base, f"{base}-{cfg.seed}-{stamp}-{suffix}")
    os.makedirs(os.path.join(run_dir, "eval"))
    manifest = {
        "name": base,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "version": version_string(),
        "start_time": _dt.datetime.now().isoformat(timespec="seconds"),
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
    }
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    with open(os.path.join(run_dir, "config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
    return run_dir


def trainer_state_doc(trainer: Trainer) -> dict:
    return {
        "stage": trainer.stage,
        "env_steps": trainer.env_steps,
        "config_hash": trainer.cfg.hash(),
        "mode": trainer.cfg.mode,
        "agent": ckpt.agent_to_doc(trainer.agent),
        "repr": ckpt.repr_to_doc(trainer.rep),
        "population": ckpt.population_to_doc(trainer.pop) if trainer.cfg.mode == "rsd" else None,
        "snapshot": ckpt.snapshot_to_doc(trainer.snapshot_prev),
        "rngs": {name: ckpt.rng_to_doc(rng) for name, rng in trainer.rngs.items()},
    }


def restore_trainer(cfg: RunConfig, doc: dict) -> Trainer:
    if doc["config_hash"] != cfg.hash():
        raise ConfigError("checkpoint was produced by a different configuration")
    trainer = Trainer(cfg)
    trainer.stage = doc["stage"]
    trainer.env_steps = doc["env_steps"]
    trainer.agent = ckpt.agent_from_doc(doc["agent"])
    trainer.rep = ckpt.repr_from_doc(doc["repr"])
    if doc.get("population") is not None:
        trainer.pop = ckpt.population_from_doc(doc["population"])
    trainer.snapshot_prev = ckpt.snapshot_from_doc(doc.get("snapshot"))
    for name, state in doc["rngs"].items():
        trainer.rngs[name] = ckpt.rng_from_doc(state)
    return trainer


def last_checkpoint(run_dir: str) -> str | None:
    paths = sorted(glob.glob(os.path.join(run_dir, "ckpt-*.json")))
    return paths[-1] if paths else None


def _truncate_metrics(path: str, max_stage: int) -> None:
    """Drop rows beyond `max_stage` so a resumed run never duplicates rows."""
    if not os.path.exists(path):
        return
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        return
    kept = [lines[0]]
    for line in lines[1:]:
        try:
            stage = int(line.split(",", 1)[0])
        except ValueError:
            continue
        if stage < max_stage:
            kept.append(line)
    with open(path, "w") as fh:
        fh.writelines(kept)


def train_run(cfg: RunConfig, run_dir: str, max_stages: int | None = None,
              resume: bool = False, force: bool = False, log=None) -> Trainer:
    """Run (or continue) training inside `run_dir` up to cfg.stages."""
    metrics_path = os.path.join(run_dir, "metrics.csv")
    if resume:
        path = last_checkpoint(run_dir)
        if path is None:
            raise ConfigError(f"no checkpoint to resume from in {run_dir}")
        doc = ckpt.load(path)
        if doc["config_hash"] != cfg.hash() and not force:
            raise ConfigError("resume refused: config hash differs from the checkpoint "
                              "(pass --force to override)")
        if force:
            doc["config_hash"] = cfg.hash()
        trainer = restore_trainer(cfg, doc)
        _truncate_metrics(metrics_path, trainer.stage)
    else:
        trainer = Trainer(cfg)
    eval_dir = os.path.join(run_dir, "eval")
    os.makedirs(eval_dir, exist_ok=True)
    end = cfg.stages if max_stages is None else min(cfg.stages, max_stages)
    while trainer.stage < end:
        k = trainer.stage
        t0 = time.monotonic()
        result = trainer.run_stage(k)
        report = trainer.last_eval_report or trainer_eval_report(trainer, result)
        evaluation.write_metrics(report, metrics_path, wall_clock_s=result.wall_clock_s)
        with open(os.path.join(eval_dir, f"stage-{k:04d}.json"), "w") as fh:
            json.dump(report.to_dict(), fh)
        if (k + 1) % cfg.checkpoint_every == 0 or trainer.stage >= end:
            ckpt.save(os.path.join(run_dir, f"ckpt-{k:04d}.json"), trainer_state_doc(trainer))
        if log is not None:
            log(f"stage {k}: cover={result.cover} regret={result.regret_mean:.4f} "
                f"entropy={result.pop_entropy:.3f} ar={result.ar:.3f} "
                f"steps={result.env_steps} ({time.monotonic() - t0:.1f}s)")
    return trainer


def trainer_eval_report(trainer: Trainer, result) -> evaluation.EvalReport:
    return evaluation.EvalReport(
        stage=result.stage, env_steps=result.env_steps, cover_coords=result.cover,
        regret_mean=result.regret_mean, pop_entropy=result.pop_entropy,
        ar=result.ar, fd_mean=result.fd_mean,
    )


def load_eval_context(ckpt_path: str) -> dict:
    """Load a checkpoint plus the run's config for offline evaluation."""
    run_dir = os.path.dirname(os.path.abspath(ckpt_path))
    cfg_path = os.path.join(run_dir, "config.json")
    if not os.path.exists(cfg_path):
        raise ConfigError(f"no config.json next to checkpoint {ckpt_path!r}")
    with open(cfg_path) as fh:
        cfg = from_dict(json.load(fh), source=cfg_path)
    doc = ckpt.load(ckpt_path)
    agent = ckpt.agent_from_doc(doc["agent"])
    rep = ckpt.repr_from_doc(doc["repr"])
    pop = ckpt.population_from_doc(doc["population"]) if doc.get("population") else skillgen.SkillPopulation(cfg.pop_max_size)
    spec = maze.load_layout(cfg.layout, cell_size=cfg.cell_size, dt=cfg.dt, damping=cfg.damping,
                            action_scale=cfg.action_scale, v_max=cfg.v_max, horizon=cfg.max_path_length)
    return {"cfg": cfg, "doc": doc, "agent": agent, "rep": rep, "pop": pop, "spec": spec,
            "run_dir": run_dir, "stage": doc["stage"]}


def eval_checkpoint(ckpt_path: str, what: str = "all", goal_mode: str = "rsd",
                    out_dir: str | None = None) -> dict:
    """Offline coverage / zero-shot evaluation; writes JSON + CSV reports."""
    ctx = load_eval_context(ckpt_path)
    cfg, spec = ctx["cfg"], ctx["spec"]
    out_dir = out_dir or os.path.join(ctx["run_dir"], "eval")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(cfg.seed + ctx["stage"]))
    results: dict = {"checkpoint": os.path.abspath(ckpt_path), "stage": ctx["stage"]}
    if what in ("coverage", "all"):
        skills = evaluation.thorough_skill_set(ctx["pop"], cfg.eval_grid_res,
                                               cfg.eval_component_draws, rng, cfg.option_dim)
        trajs = evaluation.rollout_skills(spec, ctx["agent"], skills)
        results["coverage"] = {
            "cover_coords": evaluation.cover_coords(trajs, cfg.eval_cell_size),
            "n_skills": int(len(skills)),
            "cell_size": cfg.eval_cell_size,
        }
    if what in ("zeroshot", "all"):
        goals = evaluation.goal_cells(spec, cfg.goal_min_chebyshev)
        zs = evaluation.zero_shot(spec, ctx["agent"], ctx["rep"], goals, goal_mode, cfg.success_radius)
        results["zeroshot"] = {
            "mode": goal_mode,
            "ar": zs.ar,
            "fd_mean": zs.fd_mean,
            "radius": cfg.success_radius,
            "n_goals": int(len(goals)),
            "goal_fd": [float(v) for v in zs.goal_fd],
            "goal_success": [bool(v) for v in zs.goal_success],
        }
    tag = f"{what}-{goal_mode}-{ctx['stage']:04d}" if what != "coverage" else f"{what}-{ctx['stage']:04d}"
    json_path = os.path.join(out_dir, f"{tag}.json")
    with open(json_path, "w") as fh:
        json.dump(results, fh, indent=2)
    csv_path = os.path.join(out_dir, f"{tag}.csv")
    with open(csv_path, "w") as fh:
        cov = results.get("coverage", {})
        z = results.get("zeroshot", {})
        fh.write("stage,cover_coords,n_skills,zeroshot_mode,ar,fd_mean\n")
        fh.write(f"{ctx['stage']},{cov.get('cover_coords', '')},{cov.get('n_skills', '')},"
                 f"{z.get('mode', '')},{z.get('ar', '')},{z.get('fd_mean', '')}\n")
    results["json_path"] = json_path
    results["csv_path"] = csv_path
    return results


def stderr_log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)
