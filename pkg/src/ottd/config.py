"""Flat ``section.key = value`` configuration.

Config files are TOML. Nested tables are flattened into dotted keys, so
``[agent]\\nbeta = 2`` and ``"agent.beta" = 2`` mean the same thing. Every key
must be in :data:`SCHEMA`; anything else is an error. A ``manifest.json``
written by a previous run is accepted too, which makes runs replayable.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

from .agents import AgentConfig
from .errors import ConfigError
from .harness import ExperimentConfig
from .ot_core import SinkhornConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# key -> (type tag, default)
SCHEMA = {
    "env.name": ("str", "cliffwalk"),
    "env.scenario": ("str", "LU"),
    "env.layout_seed": ("int", 0),
    "experiment.agents": ("strs", ["Sarsa", "QLearning", "OtSarsa"]),
    "experiment.n_seeds": ("int", 50),
    "experiment.n_episodes": ("int", 500),
    "experiment.window": ("int", 20),
    "agent.alpha": ("float", 0.1),
    "agent.gamma": ("float", 0.99),
    "agent.epsilon": ("float", 0.1),
    "agent.beta": ("float", 0.5),
    "agent.lam": ("float", 0.9),
    "agent.trace_kind": ("str", "replacing"),
    "ot.mode": ("str", "oracle"),
    "ot.epsilon": ("float", 0.01),
    "ot.max_iterations": ("int", 1000),
    "ot.convergence_tol": ("float", 1e-9),
    "ot.guard": ("float", 1e-8),
    "ot.normalization": ("str", "shift_min"),
    "sweep.betas": ("floats", [0.1, 0.5, 1.0, 2.0]),
}


def defaults() -> dict:
    return {k: (list(v) if isinstance(v, list) else v) for k, (_, v) in SCHEMA.items()}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    tag = SCHEMA[key][0]
    try:
        if tag == "str":
            if not isinstance(value, str) or not value:
                raise TypeError
            return value
        if tag == "int":
            if isinstance(value, bool) or not float(value).is_integer():
                raise TypeError
            return int(value)
        if tag == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if tag == "strs":
            items = value.split(",") if isinstance(value, str) else list(value)
            return [str(x).strip() for x in items if str(x).strip()]
        if tag == "floats":
            items = value.split(",") if isinstance(value, str) else list(value)
            return [float(x) for x in items if str(x).strip()]
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"bad value {value!r} for {key} (expected {tag})")


def load_file(path) -> dict:
    """Flat dict of the keys set in a TOML config or a run manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        raw = doc.get("config", doc)
    else:
        try:
            raw = _flatten(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return {k: _coerce(k, v) for k, v in raw.items()}


def parse_override(text: str) -> tuple:
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not key=value")
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    return key, _coerce(key, value.strip())


def resolve(path=None, overrides=()) -> dict:
    """Defaults, then the file, then ``--set`` overrides."""
    flat = defaults()
    if path is not None:
        flat.update(load_file(path))
    for item in overrides:
        k, v = parse_override(item)
        flat[k] = v
    return flat


def to_experiment(flat: dict) -> ExperimentConfig:
    try:
        agent = AgentConfig(
            alpha=flat["agent.alpha"], gamma=flat["agent.gamma"], epsilon=flat["agent.epsilon"],
            beta=flat["agent.beta"], lam=flat["agent.lam"], trace_kind=flat["agent.trace_kind"],
        )
        sk = SinkhornConfig(epsilon=flat["ot.epsilon"], max_iterations=flat["ot.max_iterations"],
                            convergence_tol=flat["ot.convergence_tol"])
        return ExperimentConfig(
            env_name=flat["env.name"], scenario=flat["env.scenario"], agents=tuple(flat["experiment.agents"]),
            n_seeds=flat["experiment.n_seeds"], n_episodes=flat["experiment.n_episodes"], agent=agent,
            sinkhorn=sk, layout_seed=flat["env.layout_seed"], ot_mode=flat["ot.mode"], guard=flat["ot.guard"],
            normalization=flat["ot.normalization"], window=flat["experiment.window"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def from_experiment(cfg: ExperimentConfig, betas=None) -> dict:
    """Inverse of :func:`to_experiment`; every key is present."""
    flat = {
        "env.name": cfg.env_name,
        "env.scenario": cfg.scenario,
        "env.layout_seed": cfg.layout_seed,
        "experiment.agents": list(cfg.agents),
        "experiment.n_seeds": cfg.n_seeds,
        "experiment.n_episodes": cfg.n_episodes,
        "experiment.window": cfg.window,
        "agent.alpha": cfg.agent.alpha,
        "agent.gamma": cfg.agent.gamma,
        "agent.epsilon": cfg.agent.epsilon,
        "agent.beta": cfg.agent.beta,
        "agent.lam": cfg.agent.lam,
        "agent.trace_kind": cfg.agent.trace_kind,
        "ot.mode": cfg.ot_mode,
        "ot.epsilon": cfg.sinkhorn.epsilon,
        "ot.max_iterations": cfg.sinkhorn.max_iterations,
        "ot.convergence_tol": cfg.sinkhorn.convergence_tol,
        "ot.guard": cfg.guard,
        "ot.normalization": cfg.normalization,
        "sweep.betas": list(SCHEMA["sweep.betas"][1]) if betas is None else [float(b) for b in betas],
    }
    return flat


def with_beta(cfg: ExperimentConfig, beta: float) -> ExperimentConfig:
    return replace(cfg, agent=replace(cfg.agent, beta=float(beta)))
