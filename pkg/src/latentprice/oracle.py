"""Multi-interval cautious search when the seller observes exact demand.

Each arm is an interval believed to hold one valuation, together with the
demand at its left end. The arm with the largest ``b * D`` is advanced one
cautious step at a time. A demand value that matches no known arm reveals
a new valuation and opens a new interval above the step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from latentprice.demand import ValuationDistribution
from latentprice.market import OracleMarket, RegretTrace, compute_pseudo_regret

DEMAND_TOL = 1e-9


@dataclass
class OracleArm:
    a: float = 0.0
    b: float = 1.0
    n: int = 1
    eps: float = 0.5
    demand: float = 1.0

    def pinned(self, T: int) -> bool:
        return self.b - self.a <= 1.0 / T


def _select(arms: list[OracleArm]) -> int:
    best, best_val = 0, -1.0
    for i, arm in enumerate(arms):
        val = arm.b * arm.demand
        if val > best_val:
            best, best_val = i, val
    return best


def oracle_step(
    arms: list[OracleArm], T: int, oracle: Callable[[float], float]
) -> tuple[float, int]:
    """Post one price and update ``arms`` in place.

    Returns the posted price and the index of the arm that posted it.
    """
    i = _select(arms)
    arm = arms[i]
    if arm.pinned(T):
        oracle(arm.a)
        return arm.a, i
    x = arm.a + arm.n * arm.eps
    d = oracle(x)
    if not (0.0 <= d <= 1.0):
        raise ValueError(f"oracle returned {d!r}, outside [0, 1]")
    if abs(d - arm.demand) <= DEMAND_TOL:
        if x + arm.eps < arm.b:
            arm.n += 1
        else:
            arm.a, arm.n, arm.eps = x, 1, arm.eps * arm.eps
        return x, i
    known = [other.demand for other in arms] + [0.0]
    if all(abs(d - k) > DEMAND_TOL for k in known):
        # the new arm continues the search that accepted x, refining the
        # step when x was the last one that fits below b
        eps = arm.eps if x + arm.eps < arm.b else arm.eps * arm.eps
        arms.append(OracleArm(a=x, b=arm.b, n=1, eps=eps, demand=d))
    arm.a, arm.b, arm.n, arm.eps = x - arm.eps, x, 1, arm.eps * arm.eps
    return x, i


def run_oracle_pricer(model: ValuationDistribution, T: int) -> RegretTrace:
    """Deterministic run against the exact-demand oracle."""
    if T < 2:
        raise ValueError("T must be at least 2")
    market = OracleMarket(model, T)
    arms = [OracleArm()]
    while not market.exhausted:
        i = _select(arms)
        if arms[i].pinned(T):
            # the greedy pick never changes once the chosen arm is pinned
            market.post(arms[i].a, market.remaining)
            break
        oracle_step(arms, T, market.post)
    trace = market.trace(algorithm="oracle", T=T, arms=len(arms))
    trace.regret = compute_pseudo_regret(trace, model)
    return trace
