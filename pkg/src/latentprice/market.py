"""Posted-price environments and the regret traces they produce.

Pricing policies only ever see what a market returns from ``post``: a count
of sales for stochastic buyers, or the exact demand for the oracle market.
The model itself stays private to the market and to the regret accounting.
"""

from __future__ import annotations

import sys
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from latentprice.demand import ValuationDistribution, summarize

BLOCK = 1 << 16
UNBOUNDED = sys.maxsize


def _check_price(price: float) -> None:
    if not (0.0 <= price <= 1.0):
        raise ValueError(f"price {price!r} outside [0, 1]")


@dataclass
class RegretTrace:
    """Run record, stored as runs of equal consecutive prices.

    ``feedback`` holds one sale indicator per round for sale markets and one
    demand value per segment for the oracle market. ``regret`` is the
    cumulative regret after each round once it has been computed.
    """

    prices: NDArray[np.float64]
    lengths: NDArray[np.int64]
    feedback: NDArray[Any]
    feedback_kind: str = "sale"
    regret: NDArray[np.float64] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return int(self.lengths.sum())

    def round_prices(self) -> NDArray[np.float64]:
        return np.repeat(self.prices, self.lengths)

    def round_feedback(self) -> NDArray[np.float64]:
        if self.feedback_kind == "demand":
            return np.repeat(self.feedback, self.lengths)
        return self.feedback.astype(float)

    def round_revenue(self) -> NDArray[np.float64]:
        return self.round_prices() * self.round_feedback()

    @property
    def final_regret(self) -> float:
        if self.regret is None or self.regret.size == 0:
            return 0.0
        return float(self.regret[-1])

    def regret_at(self, t: int) -> float:
        """Cumulative regret after ``t`` rounds (clipped to the run length)."""
        if self.regret is None or t <= 0 or self.regret.size == 0:
            return 0.0
        return float(self.regret[min(t, self.regret.size) - 1])


class _Recorder:
    """Shared bookkeeping: horizon, clock, and run-length encoded prices."""

    def __init__(self, horizon: int | None) -> None:
        if horizon is not None and horizon < 0:
            raise ValueError("horizon must be non-negative")
        self.horizon = UNBOUNDED if horizon is None else int(horizon)
        self.t = 0
        self._prices: list[float] = []
        self._lengths: list[int] = []

    @property
    def remaining(self) -> int:
        return self.horizon - self.t

    @property
    def exhausted(self) -> bool:
        return self.t >= self.horizon

    def _record(self, price: float, n: int) -> bool:
        """Append ``n`` rounds at ``price``; True when a new segment started."""
        if self._prices and self._prices[-1] == price:
            self._lengths[-1] += n
            return False
        self._prices.append(price)
        self._lengths.append(n)
        return True


class Market(_Recorder):
    """Stochastic buyers drawn i.i.d. from a hidden model.

    Buyers are coupled to a stream of uniforms ``U_t`` drawn in fixed blocks,
    and the buyer of round ``t`` accepts price ``x`` iff ``U_t < D(x)``. This
    is the inverse-transform draw of a valuation, so any two policies facing
    the same seed meet the same buyers.
    """

    def __init__(
        self,
        model: ValuationDistribution,
        horizon: int | None,
        rng: np.random.Generator | int | None = None,
    ) -> None:
        super().__init__(horizon)
        self._vals = model.valuations
        self._tail = [float(x) for x in model._tail]
        self._rng = np.random.default_rng(rng)
        self._buf = np.empty(0)
        self._pos = 0
        self._buf_list: list[float] | None = None
        cap = self.horizon if self.horizon < 1 << 24 else BLOCK
        self._sales = np.zeros(max(cap, 1), dtype=bool)

    def _uniforms(self, n: int) -> NDArray[np.float64]:
        avail = self._buf.size - self._pos
        if avail < n:
            blocks = -(-(n - avail) // BLOCK)
            fresh = [self._rng.random(BLOCK) for _ in range(blocks)]
            self._buf = np.concatenate([self._buf[self._pos :], *fresh])
            self._buf_list = None
            self._pos = 0
        out = self._buf[self._pos : self._pos + n]
        self._pos += n
        return out

    def _store(self, start: int, sales: NDArray[np.bool_] | bool, n: int) -> None:
        if start + n > self._sales.size:
            grown = np.zeros(max(2 * self._sales.size, start + n), dtype=bool)
            grown[: self._sales.size] = self._sales
            self._sales = grown
        self._sales[start : start + n] = sales

    def post(self, price: float, rounds: int = 1) -> int:
        """Post ``price`` for up to ``rounds`` rounds and return the number of
        sales. Posting stops at the horizon."""
        _check_price(price)
        n = min(int(rounds), self.horizon - self.t)
        if n <= 0:
            return 0
        d = self._tail[bisect_left(self._vals, price)]
        if n == 1:
            # scalar path: single rounds dominate bandit loops
            if self._pos >= self._buf.size:
                self._uniforms(1)
                self._pos -= 1
            if self._buf_list is None:
                self._buf_list = self._buf.tolist()
            sale = self._buf_list[self._pos] < d
            self._pos += 1
            if self.t >= self._sales.size:
                self._store(self.t, sale, 1)
            else:
                self._sales[self.t] = sale
            self._record(price, 1)
            self.t += 1
            return int(sale)
        hits = self._uniforms(n) < d
        self._store(self.t, hits, n)
        self._record(price, n)
        self.t += n
        return int(np.count_nonzero(hits))

    def post_until_refused(self, price: float) -> int:
        """Post ``price`` round after round until a buyer refuses it or the
        horizon is reached. Returns the number of rounds played; the same
        buyers are met as with repeated ``post(price, 1)``."""
        _check_price(price)
        d = self._tail[bisect_left(self._vals, price)]
        played = 0
        while self.t < self.horizon:
            n = min(BLOCK, self.horizon - self.t)
            u = self._uniforms(n)
            refused = np.flatnonzero(u >= d)
            k = int(refused[0]) + 1 if refused.size else n
            # hand back the uniforms this call did not use
            self._pos -= n - k
            self._store(self.t, u[:k] < d, k)
            self._record(price, k)
            self.t += k
            played += k
            if refused.size:
                break
        return played

    def trace(self, **meta: Any) -> RegretTrace:
        return RegretTrace(
            prices=np.asarray(self._prices, dtype=float),
            lengths=np.asarray(self._lengths, dtype=np.int64),
            feedback=self._sales[: self.t].copy(),
            feedback_kind="sale",
            meta=dict(meta),
        )


class OracleMarket(_Recorder):
    """Feedback is the exact demand at the posted price."""

    def __init__(self, model: ValuationDistribution, horizon: int | None) -> None:
        super().__init__(horizon)
        self._vals = model.valuations
        self._tail = [float(x) for x in model._tail]
        self._demands: list[float] = []

    def post(self, price: float, rounds: int = 1) -> float:
        """Demand at ``price``; the rounds are charged even though the value
        does not depend on them."""
        _check_price(price)
        n = min(int(rounds), self.horizon - self.t)
        d = self._tail[bisect_left(self._vals, price)]
        if n <= 0:
            return d
        if self._record(price, n):
            self._demands.append(d)
        self.t += n
        return d

    def trace(self, **meta: Any) -> RegretTrace:
        return RegretTrace(
            prices=np.asarray(self._prices, dtype=float),
            lengths=np.asarray(self._lengths, dtype=np.int64),
            feedback=np.asarray(self._demands, dtype=float),
            feedback_kind="demand",
            meta=dict(meta),
        )


class ExpectedSalesMarket(OracleMarket):
    """Returns ``rounds * D(x)`` as the sale count, so every sample mean is
    exact. Used to replay sale-based policies without estimation error."""

    def post(self, price: float, rounds: int = 1) -> float:
        n = min(int(rounds), self.remaining)
        return super().post(price, rounds) * max(n, 0)


class SequenceMarket(_Recorder):
    """Buyers given by a fixed list of valuations (an oblivious adversary)."""

    def __init__(self, valuations: Sequence[float], horizon: int | None = None) -> None:
        values = np.asarray(valuations, dtype=float)
        if horizon is None:
            horizon = values.size
        if values.size < horizon:
            raise ValueError("sequence shorter than horizon")
        super().__init__(horizon)
        self.values = values[:horizon]
        self._sales = np.zeros(horizon, dtype=bool)

    def post(self, price: float, rounds: int = 1) -> int:
        _check_price(price)
        n = min(int(rounds), self.horizon - self.t)
        if n <= 0:
            return 0
        if n == 1:
            sale = bool(self.values[self.t] >= price)
            self._sales[self.t] = sale
            self._record(price, 1)
            self.t += 1
            return int(sale)
        hits = self.values[self.t : self.t + n] >= price
        self._sales[self.t : self.t + n] = hits
        self._record(price, n)
        self.t += n
        return int(np.count_nonzero(hits))

    def trace(self, **meta: Any) -> RegretTrace:
        return RegretTrace(
            prices=np.asarray(self._prices, dtype=float),
            lengths=np.asarray(self._lengths, dtype=np.int64),
            feedback=self._sales[: self.t].copy(),
            feedback_kind="sale",
            meta=dict(meta),
        )


def compute_pseudo_regret(
    trace: RegretTrace, model: ValuationDistribution
) -> NDArray[np.float64]:
    """Cumulative gap between the best expected revenue and the expected
    revenue of the posted prices, one entry per round."""
    best = summarize(model).optimal_revenue
    gaps = np.maximum(best - trace.prices * model.demand_many(trace.prices), 0.0)
    return np.cumsum(np.repeat(gaps, trace.lengths))


def hindsight_regret(
    trace: RegretTrace, values: NDArray[np.float64], candidates: Sequence[float]
) -> NDArray[np.float64]:
    """Realized regret against the best fixed price among ``candidates``,
    with the comparator chosen on the full run."""
    values = np.asarray(values, dtype=float)[: trace.rounds]
    earned = np.cumsum(trace.round_revenue())
    fixed = [np.cumsum(np.where(values >= c, c, 0.0)) for c in candidates]
    best = max(range(len(fixed)), key=lambda k: fixed[k][-1] if values.size else 0.0)
    return fixed[best] - earned
