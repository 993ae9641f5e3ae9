"""Multi-interval cautious search under sale feedback, given a floor on the
smallest demand drop.

Each price is held for a whole macrostep so that its acceptance rate can be
compared with the rate at the arm's left end. A drop of at least half the
floor counts as passing a valuation. Arms are chosen by an optimistic
revenue index built from the samples each arm has retained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from latentprice.demand import ValuationDistribution, summarize
from latentprice.market import Market, RegretTrace, compute_pseudo_regret


def macrostep_length(gamma: float, delta: float) -> int:
    if not (0 < gamma <= 1):
        raise ValueError("gamma must lie in (0, 1]")
    return math.ceil(8 * math.log(1 / delta) / gamma**2)


def max_macrosteps(T: int, gamma: float, delta: float) -> int:
    """Largest number of complete macrosteps that fit in ``T`` rounds."""
    return T // macrostep_length(gamma, delta)


@dataclass
class GammaArm:
    """Search interval with retained demand samples.

    Positions are kept in unit coordinates ``u`` and mapped to prices by
    ``origin + scale * u``. Arms starting from [0, 1] use the identity map,
    so all their prices are exact dyadic numbers.
    """

    gamma: float
    length: int
    ua: float = 0.0
    ub: float = 1.0
    n: int = 1
    eps: float = 0.5
    retained: int = 0
    sales: float = 0.0
    picks: int = 0
    overshoots: int = 0
    origin: float = 0.0
    scale: float = 1.0

    def price(self, u: float) -> float:
        return self.origin + self.scale * u

    @property
    def a(self) -> float:
        return self.price(self.ua)

    @property
    def b(self) -> float:
        return self.price(self.ub)

    @property
    def demand_hat(self) -> float:
        return self.sales / self.retained if self.retained else math.nan

    def pinned(self, T: int) -> bool:
        return self.b - self.a <= 1.0 / T


def gamma_index(arm: GammaArm, log_inv_delta: float) -> float:
    """Optimistic revenue ``b * Dhat + sqrt(ln(1/delta) / N)``."""
    if arm.retained == 0:
        return math.inf
    return arm.b * arm.demand_hat + math.sqrt(log_inv_delta / arm.retained)


class GammaPricer:
    """Macrostep state machine shared by the K-valuation pricer and the
    two-arm variant (which disables spawning)."""

    def __init__(
        self,
        T: int,
        delta: float,
        arms: list[GammaArm],
        anchors: dict[float, float],
        spawn: bool = True,
    ) -> None:
        if not (0 < delta < 1):
            raise ValueError("delta must lie in (0, 1)")
        self.T = T
        self.delta = delta
        self.log_inv_delta = math.log(1 / delta)
        self.arms = arms
        self.anchor = dict(anchors)
        self.spawn = spawn
        self.macrosteps = 0

    @classmethod
    def standard(cls, T: int, gamma: float, delta: float) -> GammaPricer:
        arm = GammaArm(gamma=gamma, length=macrostep_length(gamma, delta))
        return cls(T, delta, [arm], {0.0: 1.0})

    def select(self) -> int:
        best, best_val = 0, -math.inf
        for i, arm in enumerate(self.arms):
            val = gamma_index(arm, self.log_inv_delta)
            if val > best_val:
                best, best_val = i, val
        return best

    def _is_new(self, i: int, x: float, mean: float, threshold: float) -> bool:
        # the zero-demand anchor at price 0 and every other arm's left end
        if mean < threshold:
            return False
        for j, other in enumerate(self.arms):
            if j == i:
                continue
            aj = other.a
            sign = (x > aj) - (x < aj)
            if sign * (self.anchor[aj] - mean) < threshold:
                return False
        return True

    def macrostep(self, market: Market) -> None:
        """One macrostep; a final macrostep cut short by the horizon posts its
        price but changes nothing."""
        i = self.select()
        arm = self.arms[i]
        length = arm.length
        complete = market.remaining >= length
        if arm.pinned(self.T):
            sales = market.post(arm.a, length)
            if complete:
                arm.retained += length
                arm.sales += sales
                arm.picks += 1
                self.macrosteps += 1
            return
        ux = arm.ua + arm.n * arm.eps
        x = arm.price(ux)
        sales = market.post(x, length)
        if not complete:
            return
        self.macrosteps += 1
        mean = sales / length
        self.anchor[x] = mean
        arm.picks += 1
        eps = arm.eps
        if self.anchor[arm.a] - mean < arm.gamma / 2:
            arm.retained += length
            arm.sales += sales
            if ux + eps < arm.ub:
                arm.n += 1
            else:
                arm.ua, arm.n, arm.eps = ux, 0, eps * eps
            return
        arm.overshoots += 1
        if self.spawn and self._is_new(i, x, mean, arm.gamma / 2):
            self.arms.append(
                GammaArm(
                    gamma=arm.gamma,
                    length=length,
                    ua=ux,
                    ub=arm.ub,
                    n=1,
                    eps=eps if ux + eps < arm.ub else eps * eps,
                    retained=length,
                    sales=sales,
                    picks=1,
                    origin=arm.origin,
                    scale=arm.scale,
                )
            )
        arm.ua, arm.ub, arm.n, arm.eps = ux - eps, ux, 0, eps * eps

    def run(self, market: Market) -> None:
        while not market.exhausted:
            self.macrostep(market)


def run_gamma_pricer(
    model: ValuationDistribution,
    T: int,
    gamma: float,
    delta: float | None = None,
    rng=None,
) -> RegretTrace:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    delta = T**-2.0 if delta is None else delta
    pricer = GammaPricer.standard(T, gamma, delta)
    market = Market(model, T, rng)
    pricer.run(market)
    trace = market.trace(
        algorithm="gamma",
        T=T,
        delta=delta,
        gamma=gamma,
        arms=len(pricer.arms),
        in_contract=gamma <= summarize(model).min_prob,
    )
    trace.regret = compute_pseudo_regret(trace, model)
    return trace
