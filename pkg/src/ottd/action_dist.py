"""Per-state distributions over actions built from Q-values and SARSA targets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteInput

UNIFORM_EPS = 1e-12
NORMALIZATIONS = ("shift_min", "proportional")


def new_qtable(n_states: int, n_actions: int, init: float = 0.0) -> np.ndarray:
    """Dense Q-table of shape ``(n_states, n_actions)``."""
    return np.full((n_states, n_actions), float(init))


@dataclass
class TargetBuffer:
    """Last SARSA target seen for every (state, action) pair."""

    values: np.ndarray
    seen: np.ndarray

    @classmethod
    def create(cls, n_states: int, n_actions: int, init: float = 0.0) -> "TargetBuffer":
        return cls(np.full((n_states, n_actions), float(init)), np.zeros((n_states, n_actions), dtype=bool))

    def copy(self) -> "TargetBuffer":
        return TargetBuffer(self.values.copy(), self.seen.copy())


@dataclass(frozen=True)
class ActionDistPair:
    q_dist: np.ndarray
    t_dist: np.ndarray


def normalize_values(raw, scheme: str = "shift_min") -> np.ndarray:
    """Map raw action values onto the probability simplex.

    ``shift_min`` subtracts the minimum and divides by the sum, so the worst
    action gets zero mass and relative gaps are kept. ``proportional`` divides
    non-negative values by their sum. Both fall back to uniform when the
    values carry no mass (all equal, or all zero).
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput(f"non-finite value in {x!r}")
    if scheme == "shift_min":
        x = x - x.min()
    elif scheme == "proportional":
        if x.min() < 0:
            raise ValueError("proportional normalization needs non-negative values")
    else:
        raise ValueError(f"unknown normalization {scheme!r}; expected one of {NORMALIZATIONS}")
    total = x.sum()
    if total < UNIFORM_EPS:
        return np.full(x.size, 1.0 / x.size)
    return x / total


def q_distribution(q: np.ndarray, s: int, n_actions: int | None = None, scheme: str = "shift_min") -> np.ndarray:
    row = q[s] if n_actions is None else q[s, :n_actions]
    return normalize_values(row, scheme)


def t_distribution(buf: TargetBuffer, s: int, n_actions: int | None = None, scheme: str = "shift_min") -> np.ndarray:
    row = buf.values[s] if n_actions is None else buf.values[s, :n_actions]
    return normalize_values(row, scheme)


def action_dists(q: np.ndarray, buf: TargetBuffer, s: int, scheme: str = "shift_min") -> ActionDistPair:
    return ActionDistPair(q_distribution(q, s, scheme=scheme), t_distribution(buf, s, scheme=scheme))


def update_target(buf: TargetBuffer, s: int, a: int, reward: float, gamma: float, q_next: float) -> None:
    """Overwrite the buffered target of ``(s, a)``; every other cell is untouched."""
    buf.values[s, a] = reward + gamma * q_next
    buf.seen[s, a] = True


def write_table_csv(values: np.ndarray, path, header=("state", "action", "value")) -> None:
    """Write a (state, action) table as long-format CSV."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in range(values.shape[0]):
            for a in range(values.shape[1]):
                w.writerow([s, a, repr(float(values[s, a]))])


def read_table_csv(path, n_states: int | None = None, n_actions: int | None = None) -> np.ndarray:
    rows = []
    with open(Path(path), newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["state"]), int(rec["action"]), float(rec["value"])))
    ns = n_states if n_states is not None else 1 + max(r[0] for r in rows)
    na = n_actions if n_actions is not None else 1 + max(r[1] for r in rows)
    out = np.zeros((ns, na))
    for s, a, v in rows:
        out[s, a] = v
    return out
