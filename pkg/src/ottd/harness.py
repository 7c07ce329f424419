"""Multi-seed experiment runs, summaries and output files.

A run is a grid of independent (seed, agent) units. Each unit gets a fresh
environment built from the shared layout seed and a generator seeded with the
run seed, so results do not depend on which worker ran what or in which order.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .action_dist import NORMALIZATIONS
from .agents import AgentConfig, AgentKind, AgentState, run_episode
from .envs import ENV_NAMES, SCENARIOS, env_from_spec, make_spec
from .errors import UnknownScenario, WindowTooLarge
from .ot_core import SinkhornConfig
from .uncertainty import OT_MODES, UncertaintyEstimator

DEFAULT_AGENTS = ("Sarsa", "QLearning", "OtSarsa")
STD_CONVENTION = "population"


@dataclass(frozen=True)
class ExperimentConfig:
    env_name: str = "cliffwalk"
    scenario: str = "LU"
    agents: tuple = DEFAULT_AGENTS
    n_seeds: int = 50
    n_episodes: int = 500
    agent: AgentConfig = field(default_factory=AgentConfig)
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    layout_seed: int = 0
    ot_mode: str = "oracle"
    guard: float = 1e-8
    normalization: str = "shift_min"
    window: int = 20

    def __post_init__(self):
        if self.env_name not in ENV_NAMES:
            raise ValueError(f"unknown environment {self.env_name!r}; expected one of {ENV_NAMES}")
        if self.scenario not in SCENARIOS:
            raise UnknownScenario(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.n_seeds < 1 or self.n_episodes < 1:
            raise ValueError("n_seeds and n_episodes must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.window > self.n_episodes:
            raise WindowTooLarge(f"window {self.window} exceeds {self.n_episodes} episodes")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}; expected one of {NORMALIZATIONS}")
        if self.ot_mode not in OT_MODES:
            raise ValueError(f"unknown OT mode {self.ot_mode!r}")
        if not self.agents:
            raise ValueError("at least one agent kind is required")
        object.__setattr__(self, "agents", tuple(AgentKind.parse(a).value for a in self.agents))

    def estimator(self) -> UncertaintyEstimator:
        return UncertaintyEstimator(sinkhorn=self.sinkhorn, guard=self.guard, mode=self.ot_mode,
                                    normalization=self.normalization)


@dataclass
class AgentRuns:
    """Everything recorded for one agent kind; rows are seeds."""

    returns: np.ndarray  # [seed, episode]
    failures: np.ndarray  # [seed, episode]
    steps: np.ndarray  # [seed, episode]
    visitation: np.ndarray  # [seed, state] count of entries into each state

    @property
    def failures_per_seed(self) -> np.ndarray:
        return self.failures.sum(axis=1)


@dataclass
class RunMetrics:
    config: ExperimentConfig
    layout: dict
    runs: dict  # agent kind value -> AgentRuns
    wall_time: float = field(default=0.0, compare=False)

    def equals(self, other: "RunMetrics") -> bool:
        """Bitwise equality of every recorded array (wall time excluded)."""
        if self.config != other.config or self.layout != other.layout or self.runs.keys() != other.runs.keys():
            return False
        for k, a in self.runs.items():
            b = other.runs[k]
            for name in ("returns", "failures", "steps", "visitation"):
                if not np.array_equal(getattr(a, name), getattr(b, name)):
                    return False
        return True


@dataclass(frozen=True)
class SummaryRow:
    agent: str
    mean_return: float
    std_return: float
    mean_failures: float


def _run_unit(cfg: ExperimentConfig, layout: dict, agent: str, seed: int):
    from .envs import GridSpec

    env = env_from_spec(GridSpec.from_dict(layout))
    kind = AgentKind.parse(agent)
    rng = np.random.default_rng(seed)
    st = AgentState.create(env.n_observations, env.n_actions)
    estimator = cfg.estimator() if kind.uses_ot else None
    E = cfg.n_episodes
    returns, failures, steps = np.zeros(E), np.zeros(E, dtype=np.int64), np.zeros(E, dtype=np.int64)
    visits = np.zeros(env.n_states, dtype=np.int64)
    for e in range(E):
        res = run_episode(kind, st, env, cfg.agent, rng, estimator)
        returns[e], failures[e], steps[e] = res.return_, res.failures, res.steps
        np.add.at(visits, np.asarray(res.visited, dtype=np.int64), 1)
    return returns, failures, steps, visits


def default_threads() -> int:
    return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig, threads: int = 1, seeds=None) -> RunMetrics:
    """Run every (seed, agent) unit of ``cfg``.

    ``seeds`` defaults to ``range(cfg.n_seeds)``. With ``threads > 1`` units
    run in worker processes; results land in fixed slots so the output does
    not depend on scheduling.
    """
    t0 = time.perf_counter()
    seeds = list(range(cfg.n_seeds)) if seeds is None else [int(s) for s in seeds]
    layout = make_spec(cfg.env_name, cfg.scenario, cfg.layout_seed).to_dict()
    units = [(agent, i, seed) for agent in cfg.agents for i, seed in enumerate(seeds)]
    if threads > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(units))) as pool:
            futures = [pool.submit(_run_unit, cfg, layout, agent, seed) for agent, _, seed in units]
            results = [f.result() for f in futures]
    else:
        results = [_run_unit(cfg, layout, agent, seed) for agent, _, seed in units]

    n_states = layout["width"] * layout["height"]
    S, E = len(seeds), cfg.n_episodes
    runs = {}
    for agent in cfg.agents:
        runs[agent] = AgentRuns(np.zeros((S, E)), np.zeros((S, E), dtype=np.int64),
                                np.zeros((S, E), dtype=np.int64), np.zeros((S, n_states), dtype=np.int64))
    for (agent, i, _), (ret, fail, steps, visits) in zip(units, results):
        r = runs[agent]
        r.returns[i], r.failures[i], r.steps[i], r.visitation[i] = ret, fail, steps, visits
    return RunMetrics(cfg, layout, runs, time.perf_counter() - t0)


def summarize(metrics: RunMetrics, window: int | None = None) -> list[SummaryRow]:
    """Mean and population std of the last ``window`` returns pooled over seeds.

    ``mean_failures`` is the per-seed failure total over all episodes,
    averaged across seeds.
    """
    window = metrics.config.window if window is None else window
    n_episodes = metrics.config.n_episodes
    if window > n_episodes:
        raise WindowTooLarge(f"window {window} exceeds {n_episodes} episodes")
    if window < 1:
        raise ValueError("window must be >= 1")
    rows = []
    for agent, r in metrics.runs.items():
        tail = r.returns[:, -window:]
        rows.append(SummaryRow(agent, float(tail.mean()), float(tail.std()), float(r.failures_per_seed.mean())))
    return rows


def visitation_grid(metrics: RunMetrics, agent: str, layout: dict | None = None) -> np.ndarray:
    """(height x width) visit counts of ``agent`` summed over seeds and episodes."""
    layout = metrics.layout if layout is None else layout
    counts = metrics.runs[AgentKind.parse(agent).value].visitation.sum(axis=0)
    return counts.reshape(layout["height"], layout["width"])


def beta_sweep(cfg: ExperimentConfig, betas, threads: int = 1) -> dict:
    """One run per beta, everything else fixed. Keys are the betas as given."""
    betas = list(betas)
    if not betas:
        raise ValueError("betas must be non-empty")
    from dataclasses import replace

    out = {}
    for b in betas:
        if b in out:
            continue
        out[b] = run_experiment(replace(cfg, agent=replace(cfg.agent, beta=float(b))), threads)
    return out


def write_outputs(metrics: RunMetrics, out_dir, manifest: dict) -> list[Path]:
    """Write returns.csv, summary.csv, visitation_<agent>.csv and manifest.json.

    Nothing time-dependent is written, so identical runs give identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "returns.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "episode", "agent", "return", "failures", "steps"])
        for agent, r in metrics.runs.items():
            for i in range(r.returns.shape[0]):
                for e in range(r.returns.shape[1]):
                    w.writerow([i, e, agent, repr(float(r.returns[i, e])), int(r.failures[i, e]), int(r.steps[i, e])])
    written.append(path)

    path = out / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent", "mean_return", "std_return", "mean_failures"])
        for row in summarize(metrics):
            w.writerow([row.agent, repr(row.mean_return), repr(row.std_return), repr(row.mean_failures)])
    written.append(path)

    for agent in metrics.runs:
        path = out / f"visitation_{agent}.csv"
        grid = visitation_grid(metrics, agent)
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(grid.tolist())
        written.append(path)

    path = out / "manifest.json"
    doc = dict(manifest)
    doc["layout"] = metrics.layout
    doc["std_convention"] = STD_CONVENTION
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
