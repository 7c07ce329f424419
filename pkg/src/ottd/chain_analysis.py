"""Markov chains induced by fixed policies on explicit MDPs.

Used to measure how much long-run probability mass a policy puts on unsafe
states, and to compare the plain epsilon-greedy policy with the
uncertainty-penalized one on the same (Q, U) snapshot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .agents import eps_greedy_probs
from .errors import InvalidPolicy, NonConvergence

PROB_ATOL = 1e-9
STATIONARY_TOL = 1e-10
STATIONARY_MAX_ITER = 1_000_000
MASS_FLOOR = 1e-12


@dataclass
class ExplicitMDP:
    """Dense finite MDP. ``transition[s, a, s2]`` is T(s2 | s, a)."""

    transition: np.ndarray
    reward: np.ndarray
    unsafe: frozenset = frozenset()
    discount: float = 0.99

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        if self.transition.ndim != 3 or self.transition.shape[0] != self.transition.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {self.transition.shape}")
        if self.transition.min() < 0 or not np.allclose(self.transition.sum(axis=2), 1.0, atol=PROB_ATOL):
            raise ValueError("every T(.|s,a) must be a probability vector")
        self.reward = np.asarray(self.reward, dtype=float)
        if self.reward.shape != self.transition.shape[:2]:
            raise ValueError(f"reward must have shape {self.transition.shape[:2]}")
        self.unsafe = frozenset(int(s) for s in self.unsafe)
        if any(not 0 <= s < self.n_states for s in self.unsafe):
            raise ValueError("unsafe states must be valid state ids")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "unsafe": sorted(self.unsafe),
            "discount": self.discount,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExplicitMDP":
        mdp = cls(d["transition"], d["reward"], frozenset(d.get("unsafe", ())), float(d.get("discount", 0.99)))
        if "n_states" in d and d["n_states"] != mdp.n_states or "n_actions" in d and d["n_actions"] != mdp.n_actions:
            raise ValueError("declared sizes disagree with the transition tensor")
        return mdp

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "ExplicitMDP":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class StationaryResult:
    distribution: np.ndarray
    iterations: int
    residual: float


def induced_chain(mdp: ExplicitMDP, policy) -> np.ndarray:
    """P(s2|s) = sum_a pi(a|s) T(s2|s,a)."""
    pi = np.asarray(policy, dtype=float)
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidPolicy(f"policy has shape {pi.shape}, expected {(mdp.n_states, mdp.n_actions)}")
    if not np.isfinite(pi).all() or pi.min() < 0:
        raise InvalidPolicy("policy has negative or non-finite entries")
    bad = np.flatnonzero(np.abs(pi.sum(axis=1) - 1.0) > PROB_ATOL)
    if bad.size:
        raise InvalidPolicy(f"policy rows {bad.tolist()} do not sum to 1")
    return np.einsum("sa,sat->st", pi, mdp.transition)


def _check_ergodic(P: np.ndarray) -> None:
    """Require exactly one closed class, and that class aperiodic.

    Transient states are allowed: they carry no stationary mass and do not
    break uniqueness. A periodic or split chain would let power iteration
    settle on one of many fixed points (a permutation matrix keeps the uniform
    start fixed), so those are rejected up front.
    """
    adj = csr_matrix(P > 0)
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        leaving = P[np.ix_(members, np.flatnonzero(labels != c))].sum() if n_comp > 1 else 0.0
        if leaving <= 0:
            closed.append(members)
    if len(closed) != 1:
        raise NonConvergence(f"chain has {len(closed)} closed classes; stationary distribution is not unique")
    members = closed[0]
    sub = P[np.ix_(members, members)] > 0
    level = np.full(members.size, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(sub[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    us, vs = np.nonzero(sub)
    period = reduce(math.gcd, (int(level[u] + 1 - level[v]) for u, v in zip(us, vs)), 0)
    if period != 1:
        raise NonConvergence(f"recurrent class has period {period}; power iteration cannot converge")


def stationary_distribution(P, tol: float = STATIONARY_TOL, max_iter: int = STATIONARY_MAX_ITER) -> StationaryResult:
    """Power iteration from the uniform vector until ||mu P - mu||_1 <= tol.

    The iterate is multiplied by P, P^2, P^4, ... so nearly decomposable chains
    still converge within the budget, and the loop only stops once the
    estimated distance to the fixed point is below ``tol`` as well.

    Raises:
        NonConvergence: for reducible or periodic chains, or when ``max_iter``
            multiplications do not reach ``tol``.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if P.min() < 0 or not np.allclose(P.sum(axis=1), 1.0, atol=PROB_ATOL):
        raise ValueError("P must be row-stochastic")
    _check_ergodic(P)
    mu = np.full(P.shape[0], 1.0 / P.shape[0])
    floor = 64 * np.finfo(float).eps * P.shape[0]
    prev = float(np.abs(mu @ P - mu).sum())
    Q, steps = P.copy(), 1  # Q = P^steps; squaring keeps slowly mixing chains within budget
    residual = prev
    for it in range(1, max_iter + 1):
        mu = mu @ Q
        mu /= mu.sum()
        residual = float(np.abs(mu @ P - mu).sum())
        # a small residual is not enough on slowly mixing chains: the distance to the
        # fixed point is about residual / (1 - rate), with the per-step rate read off
        # the residual shrinkage over the last `steps` steps
        rate = (residual / prev) ** (1.0 / steps) if prev > 0 else 0.0
        rate = min(rate, 1 - 1e-12)
        if residual <= tol and (residual / (1 - rate) <= tol or residual <= floor):
            return StationaryResult(mu, it, residual)
        prev = residual
        if steps < 2**50:
            Q = Q @ Q
            Q /= Q.sum(axis=1, keepdims=True)
            steps *= 2
    raise NonConvergence(f"power iteration residual {residual:.3g} after {max_iter} iterations")


def unsafe_mass(mu, unsafe) -> float:
    mu = np.asarray(mu, dtype=float)
    idx = sorted(int(s) for s in unsafe)
    return float(mu[idx].sum()) if idx else 0.0


def eps_greedy_policy(values: np.ndarray, epsilon: float) -> np.ndarray:
    """Explicit policy matrix of epsilon-greedy on a (states x actions) table."""
    return np.vstack([eps_greedy_probs(row, epsilon) for row in np.asarray(values, dtype=float)])


def theorem1_ratio(mdp: ExplicitMDP, q, u_scores, epsilon: float, beta: float):
    """Unsafe stationary mass of the penalized policy relative to the plain one.

    Returns ``(c_hat, mass_base, mass_ot)``; ``c_hat`` is ``inf`` when the
    plain policy puts (numerically) no mass on unsafe states.
    """
    q = np.asarray(q, dtype=float)
    u = np.asarray(u_scores, dtype=float)
    if q.shape != u.shape:
        raise ValueError(f"Q has shape {q.shape} but U has shape {u.shape}")
    base = eps_greedy_policy(q, epsilon)
    ot = eps_greedy_policy(q - beta * u, epsilon)
    mass_base = unsafe_mass(stationary_distribution(induced_chain(mdp, base)).distribution, mdp.unsafe)
    if np.array_equal(base, ot):
        return 1.0, mass_base, mass_base
    mass_ot = unsafe_mass(stationary_distribution(induced_chain(mdp, ot)).distribution, mdp.unsafe)
    c_hat = math.inf if mass_base <= MASS_FLOOR else mass_ot / mass_base
    return c_hat, mass_base, mass_ot


def risky_ring(p: float = 0.3, ring: int = 4) -> ExplicitMDP:
    """Safe ring of ``ring`` states plus one unsafe state.

    Action 0 steps around the ring. Action 1 also steps around the ring but
    with probability ``p`` detours into the unsafe state, which always
    returns to state 0. Only action 1 can reach the unsafe state.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    n = ring + 1
    bad = ring
    T = np.zeros((n, 2, n))
    for s in range(ring):
        T[s, 0, (s + 1) % ring] = 1.0
        T[s, 1, (s + 1) % ring] = 1.0 - p
        T[s, 1, bad] += p
    T[bad, :, 0] = 1.0
    R = np.zeros((n, 2))
    R[:ring, 1] = 0.1
    R[bad, :] = -1.0
    return ExplicitMDP(T, R, frozenset({bad}))


def tabularize(env) -> ExplicitMDP:
    """Explicit model of a deterministic grid environment (grid-world or cliff walking).

    Terminal cells are kept as states that send every action back to the
    start, so the induced chain is recurrent and visits to the cliff or goal
    show up in the stationary distribution. Slippery rewards enter through
    their mean.
    """
    from .envs import CliffWalk, GridWorld, SLIPPERY_HIGH, SLIPPERY_LOW, cliffwalk_step, gridworld_step

    if not isinstance(env, (GridWorld, CliffWalk)):
        raise ValueError("only grid-world and cliff walking have deterministic dynamics")
    spec = env.spec
    step = gridworld_step if isinstance(env, GridWorld) else cliffwalk_step
    n, A = spec.n_cells, env.n_actions
    start = spec.cell_id(spec.start)
    T = np.zeros((n, A, n))
    R = np.zeros((n, A))
    absorbing = {spec.cell_id(spec.goal)} | {spec.cell_id(c) for c in spec.cells("cliff")}
    slippery = {spec.cell_id(c) for c in spec.cells("slippery")}
    # rewards of slippery cells are the only random part; a stub rng keeps the step pure
    stub = np.random.default_rng(0)
    for s in range(n):
        for a in range(A):
            if s in absorbing:
                T[s, a, start] = 1.0
                continue
            out = step(s, a, spec, stub)
            T[s, a, out.next] = 1.0
            R[s, a] = 0.5 * (SLIPPERY_LOW + SLIPPERY_HIGH) if out.next in slippery else out.reward
    unsafe = frozenset(spec.cell_id(c) for c in env.unsafe_cells)
    return ExplicitMDP(T, R, unsafe)


@dataclass
class Snapshot:
    """(Q, U) tables plus the policy parameters needed by :func:`theorem1_ratio`."""

    q: np.ndarray
    u: np.ndarray
    epsilon: float = 0.1
    beta: float = 0.5
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"q": np.asarray(self.q).tolist(), "u": np.asarray(self.u).tolist(),
                "epsilon": self.epsilon, "beta": self.beta, "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "Snapshot":
        return cls(np.asarray(d["q"], dtype=float), np.asarray(d["u"], dtype=float),
                   float(d.get("epsilon", 0.1)), float(d.get("beta", 0.5)), dict(d.get("meta", {})))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "Snapshot":
        return cls.from_dict(json.loads(Path(path).read_text()))


def risky_ring_snapshot(beta: float = 2.0, epsilon: float = 0.1, ring: int = 4) -> Snapshot:
    """Snapshot where the risky action looks slightly better but carries all the uncertainty."""
    n = ring + 1
    q = np.zeros((n, 2))
    q[:ring, 0] = 1.0
    q[:ring, 1] = 1.1
    u = np.zeros((n, 2))
    u[:ring, 1] = 1.0
    return Snapshot(q, u, epsilon, beta)
