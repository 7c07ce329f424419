"""Benchmark grid environments: slippery grid-world, cliff walking with traps, rover POMDP.

Cells are ``(row, col)`` with row 0 at the top; state ids are row-major.
Each environment owns its episode bookkeeping (current cell, step count) and
takes the run's random generator on every call, so a run is reproducible from
its seed alone.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SteppedAfterTerminal, UnknownScenario

Cell = tuple[int, int]

UP, DOWN, LEFT, RIGHT = range(4)
MOVES4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTION_NAMES4 = ("up", "down", "left", "right")
# clockwise from north, so heading k has neighbours k-1 and k+1 (mod 8) at 45 degrees
MOVES8 = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
ACTION_NAMES8 = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

SCENARIOS = ("LU", "HU", "LARGE_HU")
ENV_NAMES = ("gridworld", "cliffwalk", "rover")

SLIPPERY_LOW, SLIPPERY_HIGH = -12.0, 10.0
GRID_STEP, GRID_WALL = -1.0, -10.0
CLIFF_STEP, CLIFF_FALL, CLIFF_GOAL = -1.0, -49.0, 101.0
ROVER_STEP, ROVER_COLLISION, ROVER_GOAL = -2.0, -10.0, 0.0
ROVER_INTENDED_P = 0.9
ROVER_SIGHTING_P = 0.6
# Sighting component of a rover observation: 0 = nothing seen, otherwise
# 1 + index of the sighted cell's offset from the rover in a 5x5 window.
SIGHTING_SLOTS = 26


@dataclass(frozen=True)
class StepOutcome:
    next: int
    reward: float
    terminal: bool
    unsafe_event: bool
    info: int | None = None
    truncated: bool = False


@dataclass(frozen=True)
class GridSpec:
    """Layout and rules of one environment instance."""

    name: str
    width: int
    height: int
    start: Cell
    goal: Cell
    special: dict = field(default_factory=dict)  # role -> frozenset of cells
    scenario: str = "LU"
    max_steps: int = 100
    layout_seed: int | None = None

    def __post_init__(self):
        cells = [self.start, self.goal]
        for role, group in self.special.items():
            cells.extend(group)
        for c in cells:
            if not self.in_bounds(c):
                raise ValueError(f"cell {c} outside {self.height}x{self.width} grid")
        if len(cells) != len(set(cells)):
            raise ValueError("start, goal and special cells must be disjoint")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def cell_id(self, cell: Cell) -> int:
        return cell[0] * self.width + cell[1]

    def cell_of(self, state: int) -> Cell:
        return divmod(int(state), self.width)

    def cells(self, role: str) -> frozenset:
        return self.special.get(role, frozenset())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "goal": list(self.goal),
            "special": {role: sorted([list(c) for c in cells]) for role, cells in sorted(self.special.items())},
            "scenario": self.scenario,
            "max_steps": self.max_steps,
            "layout_seed": self.layout_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            name=d["name"],
            width=int(d["width"]),
            height=int(d["height"]),
            start=tuple(d["start"]),
            goal=tuple(d["goal"]),
            special={role: frozenset(tuple(c) for c in cells) for role, cells in d["special"].items()},
            scenario=d["scenario"],
            max_steps=int(d["max_steps"]),
            layout_seed=d.get("layout_seed"),
        )


def _shift(cell: Cell, move) -> Cell:
    return (cell[0] + move[0], cell[1] + move[1])


def gridworld_step(state: int, action: int, spec: GridSpec, rng: np.random.Generator) -> StepOutcome:
    """One move in the slippery grid-world (no step cap; see :class:`GridWorld`)."""
    cell = spec.cell_of(state)
    target = _shift(cell, MOVES4[action])
    if not spec.in_bounds(target):
        return StepOutcome(state, GRID_WALL, False, False, state)
    nxt = spec.cell_id(target)
    if target in spec.cells("slippery"):
        return StepOutcome(nxt, float(rng.uniform(SLIPPERY_LOW, SLIPPERY_HIGH)), False, True, nxt)
    return StepOutcome(nxt, GRID_STEP, target == spec.goal, False, nxt)


def cliffwalk_step(state: int, action: int, spec: GridSpec, rng: np.random.Generator | None = None) -> StepOutcome:
    """One move in cliff walking; a trap cell forces the executed move downward."""
    cell = spec.cell_of(state)
    if cell in spec.cells("trap"):
        action = DOWN
    target = _shift(cell, MOVES4[action])
    if not spec.in_bounds(target):
        return StepOutcome(state, CLIFF_STEP, False, False, state)
    nxt = spec.cell_id(target)
    if target in spec.cells("cliff"):
        return StepOutcome(nxt, CLIFF_FALL, True, True, nxt)
    if target == spec.goal:
        return StepOutcome(nxt, CLIFF_GOAL, True, False, nxt)
    return StepOutcome(nxt, CLIFF_STEP, False, False, nxt)


def rover_move(state: int, action: int, spec: GridSpec, rng: np.random.Generator) -> StepOutcome:
    """Stochastic rover motion on true states (``next`` is a cell id, not an observation)."""
    u = rng.random()
    if u < ROVER_INTENDED_P:
        heading = action
    elif u < ROVER_INTENDED_P + (1 - ROVER_INTENDED_P) / 2:
        heading = (action - 1) % 8
    else:
        heading = (action + 1) % 8
    cell = spec.cell_of(state)
    target = _shift(cell, MOVES8[heading])
    if not spec.in_bounds(target):
        return StepOutcome(state, ROVER_STEP, False, False, state)
    if target in spec.cells("obstacle"):
        return StepOutcome(state, ROVER_COLLISION, False, True, state)
    nxt = spec.cell_id(target)
    if target == spec.goal:
        return StepOutcome(nxt, ROVER_GOAL, True, False, nxt)
    return StepOutcome(nxt, ROVER_STEP, False, False, nxt)


def _sighting_slot(rover: Cell, seen: Cell) -> int:
    dr, dc = seen[0] - rover[0], seen[1] - rover[1]
    return 1 + (dr + 2) * 5 + (dc + 2)


def sighting_cell(obs: int, spec: GridSpec) -> Cell | None:
    """Decode the sighted cell of an observation id (None when nothing was seen)."""
    state, slot = divmod(int(obs), SIGHTING_SLOTS)
    if slot == 0:
        return None
    dr, dc = divmod(slot - 1, 5)
    r, c = spec.cell_of(state)
    return (r + dr - 2, c + dc - 2)


def _nearest_adjacent_obstacle(cell: Cell, spec: GridSpec) -> Cell | None:
    best = None
    for ob in spec.cells("obstacle"):
        dr, dc = abs(ob[0] - cell[0]), abs(ob[1] - cell[1])
        if max(dr, dc) != 1:
            continue
        key = (dr * dr + dc * dc, spec.cell_id(ob))
        if best is None or key < best[0]:
            best = (key, ob)
    return None if best is None else best[1]


def rover_observe(true_state: int, spec: GridSpec, rng: np.random.Generator) -> int:
    """Observation id ``cell * 26 + sighting`` for a rover at ``true_state``.

    Next to an obstacle the rover sees its true cell with probability 0.6 and
    otherwise one of the obstacle's in-grid neighbours, uniformly. With several
    adjacent obstacles the nearest one is reported (ties: lowest cell id).
    """
    cell = spec.cell_of(true_state)
    ob = _nearest_adjacent_obstacle(cell, spec)
    if ob is None:
        return true_state * SIGHTING_SLOTS
    if rng.random() < ROVER_SIGHTING_P:
        seen = ob
    else:
        around = [(ob[0] + dr, ob[1] + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
        around = [c for c in around if spec.in_bounds(c)]
        seen = around[int(rng.integers(len(around)))]
    return true_state * SIGHTING_SLOTS + _sighting_slot(cell, seen)


class TabularEnv:
    """Shared episode bookkeeping: step cap and the stepped-after-terminal check."""

    n_actions = 4

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.n_states = spec.n_cells
        self._state: int | None = None
        self._steps = 0
        self._done = True

    @property
    def n_observations(self) -> int:
        return self.n_states

    @property
    def unsafe_cells(self) -> frozenset:
        return frozenset()

    @property
    def state(self) -> int | None:
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, rng: np.random.Generator) -> int:
        self._state = self.spec.cell_id(self.spec.start)
        self._steps = 0
        self._done = False
        return self._observe(self._state, rng)

    def _observe(self, state: int, rng) -> int:
        return state

    def _move(self, state: int, action: int, rng) -> StepOutcome:
        raise NotImplementedError

    def step(self, action: int, rng: np.random.Generator) -> StepOutcome:
        if self._done:
            raise SteppedAfterTerminal("reset() the environment before stepping again")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range")
        out = self._move(self._state, int(action), rng)
        self._state = out.info if out.info is not None else out.next
        self._steps += 1
        truncated = not out.terminal and self._steps >= self.spec.max_steps
        self._done = out.terminal or truncated
        return StepOutcome(self._observe(self._state, rng), out.reward, self._done, out.unsafe_event,
                           self._state, truncated)

    def layout_json(self) -> str:
        return json.dumps(self.spec.to_dict(), indent=2, sort_keys=True)

    def export_layout(self, path) -> None:
        Path(path).write_text(self.layout_json() + "\n")


class GridWorld(TabularEnv):
    def _move(self, state, action, rng):
        return gridworld_step(state, action, self.spec, rng)

    @property
    def unsafe_cells(self):
        return self.spec.cells("slippery")


class CliffWalk(TabularEnv):
    def _move(self, state, action, rng):
        return cliffwalk_step(state, action, self.spec, rng)

    @property
    def unsafe_cells(self):
        return self.spec.cells("cliff")


class Rover(TabularEnv):
    """Rover navigation; the agent sees ``(cell, sighting)`` observation ids."""

    n_actions = 8

    @property
    def n_observations(self) -> int:
        return self.n_states * SIGHTING_SLOTS

    @property
    def unsafe_cells(self):
        return self.spec.cells("obstacle")

    def _observe(self, state, rng):
        return rover_observe(state, self.spec, rng)

    def _move(self, state, action, rng):
        return rover_move(state, action, self.spec, rng)


# special-cell counts in the 10x10 / 10x7 scenarios
_COUNTS = {
    "gridworld": {"LU": 33, "HU": 50},
    "cliffwalk": {"LU": 2, "HU": 6},
    "rover": {"LU": 3, "HU": 10},
}


def _scaled_count(base: int, base_candidates: int, candidates: int) -> int:
    return int(round(base * candidates / base_candidates))


def _reachable(spec: GridSpec, blocked: frozenset, moves) -> bool:
    seen = {spec.start}
    todo = deque([spec.start])
    while todo:
        cell = todo.popleft()
        if cell == spec.goal:
            return True
        for mv in moves:
            nxt = _shift(cell, mv)
            if spec.in_bounds(nxt) and nxt not in blocked and nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return False


def _draw(rng: np.random.Generator, candidates: list, k: int) -> frozenset:
    idx = rng.choice(len(candidates), size=k, replace=False)
    return frozenset(candidates[i] for i in sorted(idx))


def make_spec(name: str, scenario: str = "LU", seed: int = 0) -> GridSpec:
    """Layout for one benchmark scenario; special cells are drawn from ``seed``."""
    if name not in ENV_NAMES:
        raise UnknownScenario(f"unknown environment {name!r}; expected one of {ENV_NAMES}")
    if scenario not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    rng = np.random.default_rng(seed)
    large = scenario == "LARGE_HU"
    counts = _COUNTS[name]

    if name == "cliffwalk":
        width, height = (30, 21) if large else (10, 7)
        start, goal = (height - 1, 0), (height - 1, width - 1)
        cliff = frozenset((height - 1, c) for c in range(1, width - 1))
        candidates = [(height - 2, c) for c in range(1, width - 1)]
        k = _scaled_count(counts["HU"], 8, len(candidates)) if large else counts[scenario]
        traps = _draw(rng, candidates, k)
        return GridSpec(name, width, height, start, goal, {"cliff": cliff, "trap": traps},
                        scenario, 200, seed)

    size = 30 if large else 10
    start, goal = (size - 1, 0), (0, size - 1)
    candidates = [(r, c) for r in range(size) for c in range(size) if (r, c) not in (start, goal)]
    base_candidates = 10 * 10 - 2
    k = _scaled_count(counts["HU"], base_candidates, len(candidates)) if large else counts[scenario]
    if name == "gridworld":
        return GridSpec(name, size, size, start, goal, {"slippery": _draw(rng, candidates, k)},
                        scenario, 100, seed)

    probe = GridSpec(name, size, size, start, goal, {}, scenario, 600 if large else 200, seed)
    while True:
        obstacles = _draw(rng, candidates, k)
        if _reachable(probe, obstacles, MOVES8):
            break
    return GridSpec(name, size, size, start, goal, {"obstacle": obstacles}, scenario, probe.max_steps, seed)


_ENV_CLASSES = {"gridworld": GridWorld, "cliffwalk": CliffWalk, "rover": Rover}


def env_from_spec(spec: GridSpec) -> TabularEnv:
    return _ENV_CLASSES[spec.name](spec)


def make_env(name: str, scenario: str = "LU", seed: int = 0) -> TabularEnv:
    return env_from_spec(make_spec(name, scenario, seed))
