"""Discrete optimal transport between probability vectors.

Two solvers share one return type:

* :func:`sinkhorn` solves the entropy-regularized problem. It runs log-domain
  Sinkhorn sweeps on a decreasing schedule of regularization weights and
  finishes each level with damped Newton steps on the dual, which is what
  makes tolerances of 1e-9 reachable at ``epsilon`` around 1e-3.
* :func:`exact_ot` solves the unregularized linear program for small supports
  and serves as the oracle for the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, InvalidProbability, NonConvergence, SupportTooLarge

PROB_ATOL = 1e-9
ORACLE_MAX_SUPPORT = 12


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver settings.

    Attributes:
        epsilon: entropic regularization weight (> 0).
        max_iterations: budget counting Sinkhorn sweeps and Newton steps together.
        convergence_tol: allowed max-abs violation of the column marginal.
        scaling_factor: ratio between consecutive regularization levels.
        sweeps_per_level: Sinkhorn sweeps tried before Newton polishing a level.
        newton: if False, only Sinkhorn sweeps are used at the final level.
    """

    epsilon: float = 0.01
    max_iterations: int = 1000
    convergence_tol: float = 1e-9
    scaling_factor: float = 0.5
    sweeps_per_level: int = 3
    newton: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.scaling_factor < 1:
            raise ValueError("scaling_factor must lie in (0, 1)")


@dataclass(frozen=True)
class TransportPlan:
    entries: np.ndarray
    source: np.ndarray
    target: np.ndarray
    iterations: int = field(default=0, compare=False)

    @property
    def shape(self):
        return self.entries.shape

    def row_violation(self) -> float:
        return float(np.abs(self.entries.sum(axis=1) - self.source).max())

    def column_violation(self) -> float:
        return float(np.abs(self.entries.sum(axis=0) - self.target).max())


def as_probvec(x, name: str = "vector") -> np.ndarray:
    """Validate ``x`` as a probability vector and return it as a float array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidProbability(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise InvalidProbability(f"{name} has non-finite entries")
    if v.min() < 0:
        raise InvalidProbability(f"{name} has negative entries")
    if abs(v.sum() - 1.0) > PROB_ATOL:
        raise InvalidProbability(f"{name} sums to {v.sum()!r}, not 1")
    return v


def zero_one_cost(n: int) -> np.ndarray:
    """Cost 1 between distinct support points and 0 on the diagonal."""
    return 1.0 - np.eye(n)


def is_zero_one_cost(cost: np.ndarray) -> bool:
    c = np.asarray(cost)
    return c.ndim == 2 and c.shape[0] == c.shape[1] and np.array_equal(c, zero_one_cost(c.shape[0]))


def _check_problem(mu, nu, cost):
    a = as_probvec(mu, "mu")
    b = as_probvec(nu, "nu")
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape != (a.size, b.size):
        raise DimensionMismatch(f"cost has shape {C.shape}, expected {(a.size, b.size)}")
    if not np.all(np.isfinite(C)) or C.min() < 0:
        raise ValueError("cost entries must be finite and non-negative")
    return a, b, C


def _lse_rows(M):
    m = M.max(axis=1)
    return m + np.log(np.exp(M - m[:, None]).sum(axis=1))


def _lse_cols(M):
    m = M.max(axis=0)
    return m + np.log(np.exp(M - m[None, :]).sum(axis=0))


class _Dual:
    """Entropic dual objective for fixed marginals, cost and regularization."""

    def __init__(self, a, b, C, eps):
        self.a, self.b, self.C, self.eps = a, b, C, eps
        self.log_a, self.log_b = np.log(a), np.log(b)

    def plan(self, f, g):
        return np.exp((f[:, None] + g[None, :] - self.C) / self.eps)

    def value(self, f, g, P=None):
        if P is None:
            P = self.plan(f, g)
        return f @ self.a + g @ self.b - self.eps * P.sum()

    def sweep(self, f, g):
        e = self.eps
        g = e * self.log_b - e * _lse_cols((f[:, None] - self.C) / e)
        f = e * self.log_a - e * _lse_rows((g[None, :] - self.C) / e)
        return f, g

    def violation(self, P):
        """Column violation after rescaling rows onto ``a`` exactly."""
        rows = P.sum(axis=1)
        Q = P * (self.a / rows)[:, None]
        return float(np.abs(Q.sum(axis=0) - self.b).max())

    def newton_step(self, f, g, tol):
        a, b, e = self.a, self.b, self.eps
        n, m = a.size, b.size
        P = self.plan(f, g)
        r, c = P.sum(axis=1), P.sum(axis=0)
        grad = np.concatenate([a - r, b - c])
        H = np.zeros((n + m, n + m))
        H[:n, :n] = np.diag(r)
        H[n:, n:] = np.diag(c)
        H[:n, n:] = P
        H[n:, :n] = P.T
        H /= e
        d = np.linalg.lstsq(H, grad, rcond=1e-13)[0]
        # Couplings that have underflowed leave part of the gradient outside
        # the numerical range of H; climb along it with a bounded step.
        perp = grad - H @ d
        pm = np.abs(perp).max()
        if pm > tol:
            d = d + perp * (2.0 * e / pm)
        big = np.abs(d).max() / e
        t = min(1.0, 5.0 / big) if big > 0 else 1.0
        base = self.value(f, g, P)
        slope = grad @ d
        gnorm = np.abs(grad).max()
        for _ in range(60):
            fn, gn = f + t * d[:n], g + t * d[n:]
            Pn = self.plan(fn, gn)
            new_gnorm = max(np.abs(a - Pn.sum(axis=1)).max(), np.abs(b - Pn.sum(axis=0)).max())
            if self.value(fn, gn, Pn) >= base + 1e-4 * t * slope or new_gnorm < (1 - 1e-4 * t) * gnorm:
                return fn, gn
            t *= 0.5
        return fn, gn


def _solve_positive(a, b, C, cfg: SinkhornConfig):
    """Entropic OT for strictly positive marginals. Returns (P, iterations)."""
    n, m = C.shape
    f, g = np.zeros(n), np.zeros(m)
    levels = []
    e = max(float(C.max()), cfg.epsilon)
    while e > cfg.epsilon:
        levels.append(e)
        e *= cfg.scaling_factor
    levels.append(cfg.epsilon)

    used = 0
    for k, eps in enumerate(levels):
        final = k == len(levels) - 1
        tol = cfg.convergence_tol if final else max(cfg.convergence_tol, 1e-3)
        dual = _Dual(a, b, C, eps)
        sweeps = cfg.sweeps_per_level if (cfg.newton or not final) else cfg.max_iterations
        done = False
        for _ in range(sweeps):
            if used >= cfg.max_iterations:
                break
            f, g = dual.sweep(f, g)
            used += 1
            if dual.violation(dual.plan(f, g)) <= tol:
                done = True
                break
        while not done and cfg.newton and used < cfg.max_iterations:
            f, g = dual.newton_step(f, g, tol)
            used += 1
            done = dual.violation(dual.plan(f, g)) <= tol
        if final:
            # one last f-update makes the rows exact without dividing by underflowed sums
            f = eps * dual.log_a - eps * _lse_rows((g[None, :] - C) / eps)
            return dual.plan(f, g), used
    raise AssertionError("unreachable")


def sinkhorn(mu, nu, cost, cfg: SinkhornConfig | None = None):
    """Entropy-regularized transport plan from ``mu`` to ``nu``.

    Returns ``(plan, transport_cost)`` where the cost is the linear part
    ``sum(P * C)`` only. Rows of the plan match ``mu`` exactly; the residual
    violation (at most ``cfg.convergence_tol``) sits in the columns. Zero-mass
    support points get empty rows/columns.

    Raises:
        DimensionMismatch: if ``cost`` does not have shape ``(len(mu), len(nu))``.
        NonConvergence: if the column violation still exceeds the tolerance
            once ``cfg.max_iterations`` is spent.
    """
    cfg = cfg or SinkhornConfig()
    a, b, C = _check_problem(mu, nu, cost)
    rows, cols = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    P = np.zeros_like(C)
    a_s, b_s = a[rows] / a[rows].sum(), b[cols] / b[cols].sum()
    if rows.size == 1 or cols.size == 1:
        sub, iters = np.outer(a_s, b_s), 0
    else:
        sub, iters = _solve_positive(a_s, b_s, C[np.ix_(rows, cols)], cfg)
    P[np.ix_(rows, cols)] = sub * a[rows].sum()
    P *= np.divide(a, P.sum(axis=1), out=np.zeros_like(a), where=a > 0)[:, None]
    plan = TransportPlan(P, a, b, iterations=iters)
    violation = plan.column_violation()
    if violation > cfg.convergence_tol:
        raise NonConvergence(
            f"column marginal off by {violation:.3g} after {iters} iterations "
            f"(epsilon={cfg.epsilon}); increase max_iterations or epsilon"
        )
    return plan, float((P * C).sum())


def _zero_one_plan(a, b):
    keep = np.minimum(a, b)
    P = np.diag(keep)
    surplus = a - keep
    deficit = b - keep
    i = j = 0
    n = a.size
    while i < n and j < n:
        if surplus[i] <= 0:
            i += 1
            continue
        if deficit[j] <= 0:
            j += 1
            continue
        x = min(surplus[i], deficit[j])
        P[i, j] += x
        surplus[i] -= x
        deficit[j] -= x
    return P


def exact_ot(mu, nu, cost):
    """Optimal plan of the unregularized problem, for supports up to 12 points.

    The 0-1 cost has a closed form (keep ``min(mu_i, nu_i)`` in place, route
    the surplus off-diagonal); any other cost goes through the HiGHS LP solver.
    """
    a, b, C = _check_problem(mu, nu, cost)
    if a.size > ORACLE_MAX_SUPPORT or b.size > ORACLE_MAX_SUPPORT:
        raise SupportTooLarge(f"exact_ot handles at most {ORACLE_MAX_SUPPORT} points per side")
    if is_zero_one_cost(C):
        P = _zero_one_plan(a, b)
    else:
        n, m = C.shape
        A_eq = np.vstack([np.kron(np.eye(n), np.ones((1, m))), np.kron(np.ones((1, n)), np.eye(m))])
        res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
        if res.status != 0:
            raise RuntimeError(f"transport LP failed: {res.message}")
        P = np.clip(res.x.reshape(n, m), 0.0, None)
    return TransportPlan(P, a, b), float((P * C).sum())


def wasserstein_distance(mu, nu, cost, p: int = 1, cfg: SinkhornConfig | None = None,
                         mode: str = "sinkhorn") -> float:
    """``<P, C> ** (1/p)`` with ``P`` from :func:`sinkhorn` or, with ``mode="oracle"``, :func:`exact_ot`."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if mode == "oracle":
        _, c = exact_ot(mu, nu, cost)
    elif mode == "sinkhorn":
        _, c = sinkhorn(mu, nu, cost, cfg)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return max(c, 0.0) ** (1.0 / p)
