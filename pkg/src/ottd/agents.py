"""Tabular TD learners and their uncertainty-penalized variants.

Plain learners follow the usual epsilon-greedy policy on Q. The ``Ot*``
variants compute per-action uncertainty scores at the current state before
every action choice and act epsilon-greedily on ``Q - beta * U`` instead.
Score computation never touches the random generator, so with ``beta = 0``
an OT variant replays its plain counterpart exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .action_dist import TargetBuffer, new_qtable, update_target
from .errors import DimensionMismatch
from .uncertainty import UncertaintyEstimator

TRACE_KINDS = ("accumulating", "replacing")


class AgentKind(str, enum.Enum):
    QLEARNING = "QLearning"
    SARSA = "Sarsa"
    SARSA_LAMBDA = "SarsaLambda"
    OT_SARSA = "OtSarsa"
    OT_SARSA_LAMBDA = "OtSarsaLambda"

    @property
    def uses_ot(self) -> bool:
        return self in (AgentKind.OT_SARSA, AgentKind.OT_SARSA_LAMBDA)

    @property
    def uses_traces(self) -> bool:
        return self in (AgentKind.SARSA_LAMBDA, AgentKind.OT_SARSA_LAMBDA)

    @classmethod
    def parse(cls, value) -> "AgentKind":
        if isinstance(value, cls):
            return value
        for kind in cls:
            if kind.value.lower() == str(value).lower():
                return kind
        raise ValueError(f"unknown agent kind {value!r}; expected one of {[k.value for k in cls]}")


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon: float = 0.1
    beta: float = 0.5
    lam: float = 0.9
    trace_kind: str = "replacing"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not 0 <= self.lam <= 1:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if self.trace_kind not in TRACE_KINDS:
            raise ValueError(f"trace_kind must be one of {TRACE_KINDS}")


@dataclass
class AgentState:
    """Learned tables of one run. ``traces`` is reset at the start of every episode."""

    q: np.ndarray
    targets: TargetBuffer
    traces: np.ndarray

    @classmethod
    def create(cls, n_states: int, n_actions: int) -> "AgentState":
        return cls(new_qtable(n_states, n_actions), TargetBuffer.create(n_states, n_actions),
                   np.zeros((n_states, n_actions)))


@dataclass
class EpisodeResult:
    return_: float
    steps: int
    failures: int
    visited: list = field(default_factory=list)


def greedy_action(values: np.ndarray, rng: np.random.Generator) -> int:
    """Argmax with ties broken uniformly at random (draws only when tied)."""
    best = values.max()
    ties = np.flatnonzero(values == best)
    if ties.size == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


def select_eps_greedy(qvals, epsilon: float, rng: np.random.Generator) -> int:
    q = np.asarray(qvals, dtype=float)
    if q.size == 0:
        raise ValueError("no actions to choose from")
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return greedy_action(q, rng)


def select_ot_guided(qvals, u, beta: float, epsilon: float, rng: np.random.Generator) -> int:
    q = np.asarray(qvals, dtype=float)
    u = np.asarray(u, dtype=float)
    if q.shape != u.shape:
        raise DimensionMismatch(f"Q has shape {q.shape} but U has shape {u.shape}")
    return select_eps_greedy(q - beta * u, epsilon, rng)


def eps_greedy_probs(values, epsilon: float) -> np.ndarray:
    """Action probabilities of the epsilon-greedy rule, greedy mass split over ties."""
    v = np.asarray(values, dtype=float)
    n = v.size
    probs = np.full(n, epsilon / n)
    ties = v == v.max()
    probs[ties] += (1.0 - epsilon) / ties.sum()
    return probs


def q_learning_step(q: np.ndarray, s: int, a: int, r: float, s_next: int | None, cfg: AgentConfig) -> None:
    """Off-policy TD update; ``s_next=None`` marks a terminal transition."""
    bootstrap = 0.0 if s_next is None else q[s_next].max()
    q[s, a] += cfg.alpha * (r + cfg.gamma * bootstrap - q[s, a])


def sarsa_step(q: np.ndarray, buf: TargetBuffer, s: int, a: int, r: float,
               s_next: int | None, a_next: int | None, cfg: AgentConfig) -> None:
    """On-policy TD update that also refreshes the buffered target of ``(s, a)``."""
    q_next = 0.0 if s_next is None else q[s_next, a_next]
    q[s, a] += cfg.alpha * (r + cfg.gamma * q_next - q[s, a])
    update_target(buf, s, a, r, cfg.gamma, q_next)


def sarsa_lambda_step(q: np.ndarray, buf: TargetBuffer, traces: np.ndarray, s: int, a: int, r: float,
                      s_next: int | None, a_next: int | None, cfg: AgentConfig) -> None:
    q_next = 0.0 if s_next is None else q[s_next, a_next]
    delta = r + cfg.gamma * q_next - q[s, a]
    if cfg.trace_kind == "accumulating":
        traces[s, a] += 1.0
    else:
        traces[s, a] = 1.0
    q += (cfg.alpha * delta) * traces
    traces *= cfg.gamma * cfg.lam
    update_target(buf, s, a, r, cfg.gamma, q_next)


@dataclass(frozen=True)
class Policy:
    """Action selection for one agent kind."""

    kind: AgentKind
    cfg: AgentConfig
    estimator: UncertaintyEstimator | None = None

    def scores(self, st: AgentState, s: int) -> np.ndarray:
        return self.estimator.scores(st.q[s], st.targets.values[s])

    def act(self, st: AgentState, s: int, rng: np.random.Generator) -> int:
        if self.kind.uses_ot:
            return select_ot_guided(st.q[s], self.scores(st, s), self.cfg.beta, self.cfg.epsilon, rng)
        return select_eps_greedy(st.q[s], self.cfg.epsilon, rng)


def run_episode(kind, st: AgentState, env, cfg: AgentConfig, rng: np.random.Generator,
                estimator: UncertaintyEstimator | None = None) -> EpisodeResult:
    """Reset ``env`` and run one learning episode until it terminates.

    The return is undiscounted. ``visited`` lists the true state entered on
    every step, so its length equals ``steps``.
    """
    kind = AgentKind.parse(kind)
    if kind.uses_ot and estimator is None:
        estimator = UncertaintyEstimator()
    policy = Policy(kind, cfg, estimator)
    if kind.uses_traces:
        st.traces.fill(0.0)

    s = env.reset(rng)
    if getattr(env, "done", False):
        return EpisodeResult(0.0, 0, 0, [])
    a = policy.act(st, s, rng)
    total, steps, failures, visited = 0.0, 0, 0, []
    while True:
        out = env.step(a, rng)
        total += out.reward
        steps += 1
        failures += int(out.unsafe_event)
        visited.append(out.info if out.info is not None else out.next)
        # a time-limit cut is not a terminal state: keep bootstrapping through it
        absorbing = out.terminal and not out.truncated
        s_next = None if absorbing else out.next
        if kind is AgentKind.QLEARNING:
            q_learning_step(st.q, s, a, out.reward, s_next, cfg)
            a_next = None if out.terminal else policy.act(st, s_next, rng)
        else:
            a_next = None if absorbing else policy.act(st, s_next, rng)
            if kind.uses_traces:
                sarsa_lambda_step(st.q, st.targets, st.traces, s, a, out.reward, s_next, a_next, cfg)
            else:
                sarsa_step(st.q, st.targets, s, a, out.reward, s_next, a_next, cfg)
        if out.terminal:
            return EpisodeResult(total, steps, failures, visited)
        s, a = s_next, a_next
