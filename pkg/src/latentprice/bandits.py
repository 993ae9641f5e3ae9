"""Finite-armed bandit policies: UCB with optional inflated radii, and Exp3."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray


@dataclass
class UcbState:
    """Per-arm pull counts and reward sums.

    Arms flagged in ``inflated`` get the extra radius term
    ``alpha * log_inv_delta / (gamma**2 * s)``.
    """

    counts: NDArray[np.int64]
    sums: NDArray[np.float64]
    log_inv_delta: float
    alpha: float = 0.0
    gamma: float = 1.0
    inflated: NDArray[np.bool_] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.log_inv_delta <= 0:
            raise ValueError("log_inv_delta must be positive")
        if self.alpha < 0 or not (0 < self.gamma <= 1):
            raise ValueError("need alpha >= 0 and gamma in (0, 1]")
        if self.inflated is None:
            self.inflated = np.zeros(len(self.counts), dtype=bool)

    @classmethod
    def fresh(
        cls,
        n_arms: int,
        delta: float,
        alpha: float = 0.0,
        gamma: float = 1.0,
        inflated: Sequence[bool] | None = None,
    ) -> UcbState:
        if n_arms < 1:
            raise ValueError("need at least one arm")
        flags = np.zeros(n_arms, dtype=bool) if inflated is None else np.asarray(inflated, bool)
        return cls(
            counts=np.zeros(n_arms, dtype=np.int64),
            sums=np.zeros(n_arms),
            log_inv_delta=math.log(1.0 / delta),
            alpha=alpha,
            gamma=gamma,
            inflated=flags,
        )

    @property
    def n_arms(self) -> int:
        return len(self.counts)

    def update(self, k: int, reward: float) -> None:
        self.counts[k] += 1
        self.sums[k] += reward


def ucb_radius(state: UcbState, s: int, k: int) -> float:
    if s == 0:
        return math.inf
    lg = state.log_inv_delta
    r = math.sqrt(lg / s)
    if state.inflated[k]:
        r += state.alpha * lg / (state.gamma**2 * s)
    return r


def ucb_index(state: UcbState, k: int) -> float:
    s = int(state.counts[k])
    if s == 0:
        return math.inf
    return float(state.sums[k]) / s + ucb_radius(state, s, k)


def ucb_select(state: UcbState) -> int:
    """Arm with the largest index, lowest index on ties."""
    best, best_val = 0, -math.inf
    for k in range(state.n_arms):
        val = ucb_index(state, k)
        if val > best_val:
            best, best_val = k, val
    return best


def run_ucb(state: UcbState, pull: Callable[[int], float], rounds: int) -> list[int]:
    """Play ``rounds`` rounds, calling ``pull(k)`` for the reward.

    Indices only change for the arm just played, so a heap keyed on
    ``(-index, arm)`` reproduces ``ucb_select`` exactly at O(log K) per round.
    Returns the sequence of arms played.
    """
    heap = [(-ucb_index(state, k), k) for k in range(state.n_arms)]
    heapq.heapify(heap)
    # plain lists in the hot loop, written back at the end
    counts = state.counts.tolist()
    sums = state.sums.tolist()
    lg = state.log_inv_delta
    inflated = state.inflated.tolist()
    alpha, g2 = state.alpha, state.gamma**2
    played: list[int] = []
    try:
        for _ in range(rounds):
            k = heap[0][1]
            reward = pull(k)
            if reward is None:
                break
            counts[k] += 1
            sums[k] += reward
            played.append(k)
            s = counts[k]
            radius = math.sqrt(lg / s)
            if inflated[k]:
                radius += alpha * lg / (g2 * s)
            heapq.heapreplace(heap, (-(sums[k] / s + radius), k))
    finally:
        state.counts[:] = counts
        state.sums[:] = sums
    return played


@dataclass
class Exp3State:
    """Cumulative importance-weighted loss estimates with a fixed rate.

    Kept as plain floats: the policy is used with a handful of arms and is
    stepped once per round.
    """

    est_losses: list[float]
    rate: float

    @classmethod
    def fresh(cls, n_arms: int, horizon: int) -> Exp3State:
        if n_arms < 2:
            raise ValueError("Exp3 needs at least two arms")
        rate = math.sqrt(2.0 * math.log(n_arms) / (horizon * n_arms))
        return cls(est_losses=[0.0] * n_arms, rate=rate)

    @property
    def n_arms(self) -> int:
        return len(self.est_losses)

    def probabilities(self) -> list[float]:
        low = min(self.est_losses)
        w = [math.exp(-self.rate * (x - low)) for x in self.est_losses]
        total = sum(w)
        return [x / total for x in w]


def exp3_step(state: Exp3State, rng: np.random.Generator) -> int:
    u = rng.random()
    acc = 0.0
    probs = state.probabilities()
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k
    return state.n_arms - 1


def exp3_update(state: Exp3State, arm: int, loss: float, prob: float | None = None) -> Exp3State:
    """Charge ``loss / P(arm)`` to the played arm. ``prob`` is the sampling
    probability used for the draw; it is recomputed when omitted."""
    if not (0.0 <= loss <= 1.0):
        raise ValueError(f"loss {loss!r} outside [0, 1]")
    if prob is None:
        prob = state.probabilities()[arm]
    state.est_losses[arm] += loss / prob
    return state
