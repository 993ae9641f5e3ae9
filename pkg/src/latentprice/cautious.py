"""Cautious search for a single valuation under yes/no feedback.

The search raises its price in steps of ``eps`` inside ``[a, b]``. When the
next step would leave the interval, or when a price is refused, the
interval shrinks to one step and ``eps`` is squared. Refusals are costly
and rare; accepted prices lose little revenue.

All arithmetic is generic, so passing ``Fraction`` endpoints gives an exact
search.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, Union

import numpy as np

from latentprice.demand import point_mass
from latentprice.market import RegretTrace, compute_pseudo_regret

Number = Union[float, Fraction]


@dataclass(frozen=True)
class SearchState:
    a: Number = 0.0
    b: Number = 1.0
    n: int = 1
    eps: Number = 0.5
    steps_taken: int = 0
    overshoots: int = 0

    @classmethod
    def exact(cls) -> SearchState:
        return cls(a=Fraction(0), b=Fraction(1), eps=Fraction(1, 2))

    @property
    def width(self) -> Number:
        return self.b - self.a


def next_price(state: SearchState) -> Number:
    return state.a + state.n * state.eps


def observe(state: SearchState, accepted: bool) -> SearchState:
    """Update after the buyer's answer to ``next_price(state)``."""
    x = next_price(state)
    steps = state.steps_taken + 1
    eps = state.eps
    if accepted:
        if x + eps < state.b:
            return replace(state, n=state.n + 1, steps_taken=steps)
        return replace(state, a=x, n=1, eps=eps * eps, steps_taken=steps)
    return replace(
        state,
        a=x - eps,
        b=x,
        n=1,
        eps=eps * eps,
        steps_taken=steps,
        overshoots=state.overshoots + 1,
    )


def iter_search(v: Number, state: SearchState | None = None) -> Iterator[SearchState]:
    """Endless noiseless search for ``v``; yields the state before each step."""
    state = SearchState() if state is None else state
    while True:
        yield state
        state = observe(state, next_price(state) <= v)


def search_prices(v: float, T: int) -> tuple[list[float], float, int]:
    """Prices posted before the interval gets narrower than ``1/T``.

    Returns the list of prices, the left endpoint posted afterwards, and the
    number of overshoots.
    """
    a, b, n, eps = 0.0, 1.0, 1, 0.5
    limit = 1.0 / T
    prices: list[float] = []
    overshoots = 0
    while len(prices) < T and b - a >= limit:
        x = a + n * eps
        prices.append(x)
        if x <= v:
            if x + eps < b:
                n += 1
            else:
                a, n, eps = x, 1, eps * eps
        else:
            a, b, n, eps = x - eps, x, 1, eps * eps
            overshoots += 1
    return prices, a, overshoots


def run_cautious_search(v: float, T: int) -> RegretTrace:
    """Noiseless search for a point-mass buyer over ``T`` rounds.

    Once the interval is narrower than ``1/T`` its left endpoint is posted
    for every remaining round.
    """
    if not (0.0 <= v <= 1.0):
        raise ValueError("v must lie in [0, 1]")
    if T < 1:
        raise ValueError("T must be positive")
    prices, tail_price, overshoots = search_prices(v, T)
    lengths = [1] * len(prices)
    if len(prices) < T:
        prices.append(tail_price)
        lengths.append(T - len(lengths))
    p = np.asarray(prices)
    model = point_mass(v)
    trace = RegretTrace(
        prices=p,
        lengths=np.asarray(lengths, dtype=np.int64),
        feedback=(p <= v).astype(float),
        feedback_kind="demand",
        meta={"algorithm": "cautious", "T": T, "overshoots": overshoots},
    )
    trace.regret = compute_pseudo_regret(trace, model)
    return trace


def shrink_envelope(count: int) -> list[Fraction]:
    """Slowest possible interval-width profile of the search, step by step.

    Two steps at width 1, then width ``2**-(2**s)`` repeated ``2**(2**s)``
    times for s = 0, 1, 2, ...
    """
    out: list[Fraction] = [Fraction(1), Fraction(1)][:count]
    s = 0
    while len(out) < count:
        width = Fraction(1, 2 ** (2**s))
        out.extend([width] * min(2 ** (2**s), count - len(out)))
        s += 1
    return out
