"""JSON checkpoints for the full training state.

One document per stage: agent nets (policy, twin critics and targets,
entropy coefficient), the representation (encoder and dual variable),
the generator population (mean/std/weight/regret/stage per component),
the previous-stage snapshot, RNG stream states, and progress counters.
Net parameters are stored as flat float lists with shape metadata (see
``nets.NetParams.to_doc``). The replay buffer is intentionally not
persisted; a resumed run refills it from fresh collection.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import nets, sac, skillgen
from .errors import ConfigError
from .reprspace import ReprState

FORMAT_VERSION = 1


def agent_to_doc(agent: sac.AgentParams) -> dict:
    return {
        "policy": agent.policy.to_doc(),
        "q1": agent.q1.to_doc(),
        "q2": agent.q2.to_doc(),
        "q1_target": agent.q1_target.to_doc(),
        "q2_target": agent.q2_target.to_doc(),
        "log_alpha": agent.log_alpha,
        "gamma": agent.gamma,
        "act_dim": agent.act_dim,
    }


def agent_from_doc(doc: dict) -> sac.AgentParams:
    return sac.AgentParams(
        nets.NetParams.from_doc(doc["policy"]),
        nets.NetParams.from_doc(doc["q1"]),
        nets.NetParams.from_doc(doc["q2"]),
        nets.NetParams.from_doc(doc["q1_target"]),
        nets.NetParams.from_doc(doc["q2_target"]),
        doc["log_alpha"],
        doc["gamma"],
        doc["act_dim"],
    )


def repr_to_doc(rep: ReprState) -> dict:
    return {
        "encoder": rep.encoder.to_doc(),
        "lam": rep.lam,
        "slack": rep.slack,
        "step_budget": rep.step_budget,
        "center_weight": rep.center_weight,
    }


def repr_from_doc(doc: dict) -> ReprState:
    return ReprState(
        nets.NetParams.from_doc(doc["encoder"]),
        doc["lam"], doc["slack"], doc["step_budget"], doc["center_weight"],
    )


def population_to_doc(pop: skillgen.SkillPopulation) -> dict:
    return {
        "max_size": pop.max_size,
        "components": [
            {
                "mean": g.mean.tolist(),
                "log_std": g.log_std.tolist(),
                "stage": g.stage,
                "weight": float(w),
                "regret": float(r),
            }
            for g, w, r in zip(pop.members, pop.weights, pop.regrets)
        ],
    }


def population_from_doc(doc: dict) -> skillgen.SkillPopulation:
    comps = doc["components"]
    members = [skillgen.Generator(np.asarray(c["mean"]), np.asarray(c["log_std"]), c["stage"]) for c in comps]
    weights = np.array([c["weight"] for c in comps])
    regrets = np.array([c["regret"] for c in comps])
    return skillgen.SkillPopulation(doc["max_size"], members, weights, regrets)


def snapshot_to_doc(snap: sac.StageSnapshot | None) -> dict | None:
    if snap is None:
        return None
    return {
        "policy": snap.policy.to_doc(),
        "q1": snap.q1.to_doc(),
        "q2": snap.q2.to_doc(),
        "log_alpha": snap.log_alpha,
        "stage": snap.stage,
    }


def snapshot_from_doc(doc: dict | None) -> sac.StageSnapshot | None:
    if doc is None:
        return None
    return sac.StageSnapshot(
        nets.NetParams.from_doc(doc["policy"]),
        nets.NetParams.from_doc(doc["q1"]),
        nets.NetParams.from_doc(doc["q2"]),
        doc["log_alpha"],
        doc["stage"],
    )


def rng_to_doc(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return json.loads(json.dumps(state, default=int))


def rng_from_doc(doc: dict) -> np.random.Generator:
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = doc
    return rng


def save(path: str, doc: dict) -> None:
    doc = dict(doc)
    doc["format_version"] = FORMAT_VERSION
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {path!r}: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('format_version')}")
    return doc
