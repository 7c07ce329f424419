"""Per-action uncertainty scores from the transport plan between Q and target distributions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .action_dist import ActionDistPair, normalize_values
from .errors import DimensionMismatch
from .ot_core import SinkhornConfig, TransportPlan, exact_ot, is_zero_one_cost, sinkhorn, zero_one_cost

DEFAULT_GUARD = 1e-8
OT_MODES = ("oracle", "sinkhorn")


@dataclass(frozen=True)
class UncertaintyScores:
    delta: np.ndarray
    total: float
    u: np.ndarray


def flow_imbalance(plan) -> np.ndarray:
    """|outgoing - incoming| off-diagonal mass for every support point of a square plan."""
    P = plan.entries if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"flow imbalance needs a square plan, got shape {P.shape}")
    diag = np.diag(P)
    outgoing = P.sum(axis=1) - diag
    incoming = P.sum(axis=0) - diag
    return np.abs(outgoing - incoming)


def uncertainty_scores(pair: ActionDistPair, cost=None, cfg: SinkhornConfig | None = None,
                       guard: float = DEFAULT_GUARD, mode: str = "sinkhorn") -> UncertaintyScores:
    """Flow imbalance of each action normalized by the Wasserstein-1 distance.

    When the distance is at most ``guard`` (no mismatch between the two
    distributions) every score is zero.
    """
    if guard <= 0:
        raise ValueError("guard must be positive")
    n = pair.q_dist.size
    if pair.t_dist.size != n:
        raise DimensionMismatch("Q and target distributions have different lengths")
    C = zero_one_cost(n) if cost is None else np.asarray(cost, dtype=float)
    if mode == "oracle":
        plan, total = exact_ot(pair.q_dist, pair.t_dist, C)
    elif mode == "sinkhorn":
        plan, total = sinkhorn(pair.q_dist, pair.t_dist, C, cfg)
    else:
        raise ValueError(f"unknown OT mode {mode!r}; expected one of {OT_MODES}")
    delta = flow_imbalance(plan)
    if total <= guard:
        return UncertaintyScores(delta, total, np.zeros(n))
    return UncertaintyScores(delta, total, delta / total)


@dataclass(frozen=True)
class UncertaintyEstimator:
    """Everything needed to turn (Q row, target row) into scores.

    With the 0-1 cost in oracle mode the optimal plan keeps ``min(q, t)`` on
    the diagonal, so the imbalance is ``|q - t|`` and the distance is half its
    sum; that shortcut avoids building the plan on every action selection.
    """

    cost: np.ndarray | None = None
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    guard: float = DEFAULT_GUARD
    mode: str = "oracle"
    normalization: str = "shift_min"

    def __post_init__(self):
        if self.mode not in OT_MODES:
            raise ValueError(f"unknown OT mode {self.mode!r}")
        if self.guard <= 0:
            raise ValueError("guard must be positive")

    def _fast(self) -> bool:
        return self.mode == "oracle" and self.normalization == "shift_min" and (
            self.cost is None or is_zero_one_cost(self.cost))

    def scores(self, q_values, target_values) -> np.ndarray:
        q_values = np.asarray(q_values, dtype=float)
        n = q_values.size
        if self._fast():
            q = _shift_normalize(q_values)
            t = _shift_normalize(np.asarray(target_values, dtype=float))
            delta = np.abs(q - t)
            total = 0.5 * delta.sum()
            if total <= self.guard:
                return np.zeros(n)
            return delta / total
        pair = ActionDistPair(normalize_values(q_values, self.normalization),
                              normalize_values(target_values, self.normalization))
        return uncertainty_scores(pair, self.cost, self.sinkhorn, self.guard, self.mode).u

    def score_table(self, q: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Scores for every state of a (states x actions) table pair."""
        return np.vstack([self.scores(q[s], targets[s]) for s in range(q.shape[0])])


def _shift_normalize(x: np.ndarray) -> np.ndarray:
    if not np.isfinite(x).all():
        return normalize_values(x)  # raises NonFiniteInput
    x = x - x.min()
    total = x.sum()
    if total < 1e-12:
        return np.full(x.size, 1.0 / x.size)
    return x / total
