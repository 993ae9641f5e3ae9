"""Distribution-free pricing: macrostep bisection, then UCB on the findings.

The search phase bisects intervals with long macrosteps, comparing the
acceptance rate at each midpoint with those at the interval ends. A drop
bigger than the detection threshold signals a valuation. Intervals whose
ends show no drop are dropped as spurious. Once every interval is narrower
than ``T**-0.5`` the surviving left ends become the arms of a UCB policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from latentprice.bandits import UcbState, run_ucb
from latentprice.demand import ValuationDistribution
from latentprice.market import Market, RegretTrace, compute_pseudo_regret

EXACT_ZERO = "exact"
PRINTED_ZERO = "printed"


@dataclass
class SearchArm:
    a: float
    b: float
    active: bool = True


@dataclass
class SearchPhase:
    """State of the bisection phase.

    ``zero_anchor`` selects the acceptance rate assumed at price 0: the exact
    value 1 (default) or 0. With 0 the first comparison never sees a drop,
    so everything below 1/2 is skipped.
    """

    T: int
    delta: float
    zero_anchor: str = EXACT_ZERO
    arms: list[SearchArm] = field(default_factory=lambda: [SearchArm(0.0, 1.0)])
    allocated: int = 1
    means: dict[float, float] = field(default_factory=dict)
    macrosteps: int = 0

    def __post_init__(self) -> None:
        if self.zero_anchor not in (EXACT_ZERO, PRINTED_ZERO):
            raise ValueError(f"unknown zero anchor {self.zero_anchor!r}")
        self.means.setdefault(0.0, 1.0 if self.zero_anchor == EXACT_ZERO else 0.0)
        # no buyer accepts more than the top of the range, and 1 is never posted
        self.means.setdefault(1.0, 0.0)

    @property
    def width_limit(self) -> float:
        return self.T**-0.5

    @property
    def length(self) -> int:
        return math.ceil(8 * math.sqrt(self.T / self.allocated) * math.log(1 / self.delta))

    @property
    def threshold(self) -> float:
        return (self.allocated / self.T) ** 0.25 / 2

    def candidate(self) -> int | None:
        for i, arm in enumerate(self.arms):
            if arm.active and arm.b - arm.a > self.width_limit:
                return i
        return None

    def active_arms(self) -> list[SearchArm]:
        return [arm for arm in self.arms if arm.active]

    def _is_new(self, i: int, x: float, mean: float, thr: float) -> bool:
        if mean < thr:
            return False
        for j, other in enumerate(self.arms):
            if j == i or not other.active:
                continue
            sign = (x > other.a) - (x < other.a)
            if sign * (self.means[other.a] - mean) < thr:
                return False
        return True

    def macrostep(self, market: Market) -> bool:
        """One bisection step; False when the phase is over."""
        i = self.candidate()
        if i is None or market.exhausted:
            return False
        arm = self.arms[i]
        x = (arm.a + arm.b) / 2
        rounds = min(self.length, market.remaining)
        mean = market.post(x, rounds) / rounds
        self.means[x] = mean
        thr = self.threshold
        self.macrosteps += 1
        if self.means[arm.a] - mean < thr:
            if mean - self.means[arm.b] >= thr:
                arm.a = x
            else:
                arm.active = False
        else:
            if self._is_new(i, x, mean, thr):
                self.arms.append(SearchArm(x, arm.b))
                self.allocated += 1
            arm.b = x
        return True

    def run(self, market: Market) -> None:
        while self.macrostep(market):
            pass


def run_distribution_free(
    model: ValuationDistribution,
    T: int,
    delta: float | None = None,
    rng=None,
    zero_anchor: str = EXACT_ZERO,
) -> RegretTrace:
    if T < 4:
        raise ValueError("T must be at least 4")
    delta = T**-2.0 if delta is None else delta
    market = Market(model, T, rng)
    phase = SearchPhase(T, delta, zero_anchor)
    phase.run(market)
    search_rounds = market.t
    arms = phase.active_arms() or phase.arms
    prices = [arm.a for arm in arms]
    if not market.exhausted:
        state = UcbState.fresh(len(prices), delta)

        def pull(k: int) -> float | None:
            if market.exhausted:
                return None
            return prices[k] * market.post(prices[k], 1)

        run_ucb(state, pull, market.remaining)
    trace = market.trace(
        algorithm="distfree",
        T=T,
        delta=delta,
        macrosteps=phase.macrosteps,
        search_rounds=search_rounds,
        arms=len(prices),
    )
    trace.regret = compute_pseudo_regret(trace, model)
    return trace
