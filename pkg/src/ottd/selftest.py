"""Quick built-in checks behind ``ottd selftest``.

Each check returns ``(name, passed, detail)``. They are small versions of the
test-suite oracles, meant to catch a broken install in a few seconds.
"""

from __future__ import annotations

import numpy as np

from .action_dist import ActionDistPair
from .agents import AgentConfig, AgentState, run_episode, select_eps_greedy, select_ot_guided
from .chain_analysis import induced_chain, risky_ring, risky_ring_snapshot, stationary_distribution, theorem1_ratio
from .envs import make_env
from .ot_core import SinkhornConfig, exact_ot, sinkhorn, zero_one_cost
from .uncertainty import flow_imbalance, uncertainty_scores


def _pairs(n_pairs: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(n_pairs):
        n = int(rng.integers(2, 9))
        yield rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))


def check_oracle_agreement(n_pairs: int = 200):
    cfg = SinkhornConfig(epsilon=0.005)
    worst = 0.0
    for mu, nu in _pairs(n_pairs, 1):
        _, c = sinkhorn(mu, nu, zero_one_cost(mu.size), cfg)
        worst = max(worst, abs(c - 0.5 * np.abs(mu - nu).sum()))
    return "sinkhorn vs closed-form distance", worst <= 0.02, f"max error {worst:.2e}"


def check_flow_identity(n_pairs: int = 200):
    worst_exact = worst_sk = 0.0
    for mu, nu in _pairs(n_pairs, 2):
        C = zero_one_cost(mu.size)
        worst_exact = max(worst_exact, np.abs(flow_imbalance(exact_ot(mu, nu, C)[0]) - np.abs(mu - nu)).max())
        worst_sk = max(worst_sk, np.abs(flow_imbalance(sinkhorn(mu, nu, C)[0]) - np.abs(mu - nu)).max())
    ok = worst_exact <= 1e-12 and worst_sk <= 1e-4
    return "flow imbalance equals |mu - nu|", ok, f"exact {worst_exact:.1e}, sinkhorn {worst_sk:.1e}"


def check_score_sum(n_pairs: int = 200):
    worst = 0.0
    for mu, nu in _pairs(n_pairs, 3):
        s = uncertainty_scores(ActionDistPair(mu, nu), mode="oracle")
        worst = max(worst, abs(s.u.sum() - 2.0))
    return "scores sum to 2", worst <= 1e-9, f"max deviation {worst:.1e}"


def check_decision():
    q = np.array([0.2, 0.3, 0.1, 0.4])
    u = np.array([0.21, 0.37, 0.78, 0.62])
    rng = np.random.default_rng(0)
    ours, plain = select_ot_guided(q, u, 0.5, 0.0, rng), select_eps_greedy(q, 0.0, rng)
    return "penalized selection example", (ours, plain) == (1, 3), f"penalized a{ours + 1}, plain a{plain + 1}"


def check_beta_zero(episodes: int = 20):
    env = make_env("cliffwalk", "LU", 0)
    cfg = AgentConfig(beta=0.0)
    tables, paths = [], []
    for kind in ("Sarsa", "OtSarsa"):
        rng = np.random.default_rng(7)
        st = AgentState.create(env.n_states, env.n_actions)
        paths.append([run_episode(kind, st, env, cfg, rng).visited for _ in range(episodes)])
        tables.append(st.q)
    ok = np.array_equal(tables[0], tables[1]) and paths[0] == paths[1]
    return "beta = 0 replays plain SARSA", ok, f"{episodes} episodes"


def check_stationary():
    P = np.array([[0.9, 0.1], [0.5, 0.5]])
    mu = stationary_distribution(P).distribution
    err = np.abs(mu - [5 / 6, 1 / 6]).max()
    mdp, snap = risky_ring(), risky_ring_snapshot()
    c_hat, _, _ = theorem1_ratio(mdp, snap.q, snap.u, snap.epsilon, snap.beta)
    base = stationary_distribution(induced_chain(mdp, np.full((mdp.n_states, 2), 0.5))).distribution
    ok = err <= 1e-8 and c_hat < 1 and abs(base.sum() - 1) <= 1e-12
    return "stationary distribution and ring ratio", ok, f"error {err:.1e}, c_hat {c_hat:.3f}"


def run_checks():
    checks = (check_oracle_agreement, check_flow_identity, check_score_sum, check_decision,
              check_beta_zero, check_stationary)
    results = []
    for check in checks:
        try:
            results.append(check())
        except Exception as exc:  # report, keep going
            results.append((check.__name__, False, f"{type(exc).__name__}: {exc}"))
    return results
