"""Pricing with at most two valuations and no prior knowledge.

The pipeline brackets the valuations with a repeated-vote bisection, finds
a probe price ``w`` between them, estimates both probabilities at ``w``
with capped estimators, and then either commits to one valuation when the
estimates make the answer obvious or hands over to a two-arm version of
the macrostep pricer tuned with the estimated probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from latentprice.demand import ValuationDistribution
from latentprice.estimation import EstimatorState, JointCappedEstimator, Status
from latentprice.gamma import GammaArm, GammaPricer
from latentprice.market import Market, RegretTrace, compute_pseudo_regret

V1_OPTIMAL = "v1-optimal"
V2_OPTIMAL = "v2-optimal"
ESTIMATES = "run-2ucb"
NONE = "none"


def noisy_macrostep_length(gamma: float, delta: float) -> int:
    if not (0 < gamma < 1) or not (0 < delta < 1):
        raise ValueError("need gamma and delta in (0, 1)")
    return math.ceil(math.log(delta) / math.log(1 - gamma))


def last_phase(T: int) -> int:
    return max(0, math.ceil(math.log2(math.log2(T)))) if T > 2 else 0


class NoisyCautiousSearch:
    """Cautious search where each step is a macrostep of repeated offers.

    For ``target=1`` a macrostep succeeds when every offer is accepted, for
    ``target=2`` when at least one is. A failure ends the phase: the next
    phase restarts from the last success with step ``2**-(2**s)``. After the
    final phase the last successful price is posted for good.
    """

    def __init__(self, target: int, gamma: float, delta: float, T: int) -> None:
        if target not in (1, 2):
            raise ValueError("target must be 1 or 2")
        self.target = target
        self.length = noisy_macrostep_length(gamma, delta)
        self.final = last_phase(T)
        self.a, self.b = 0.0, 1.0
        self.s, self.n, self.eps = 0, 1, 0.5
        self.best = 0.0
        self.v_hat: float | None = None
        self.done = False
        self.macrosteps = 0
        self.failures = 0

    def next_price(self) -> float:
        return self.a if self.done else self.a + self.n * self.eps

    def success(self, sales: int, rounds: int) -> bool:
        return sales == rounds if self.target == 1 else sales > 0

    def observe(self, sales: int, rounds: int) -> bool:
        """Record a macrostep at ``next_price()``; returns whether it succeeded."""
        x = self.next_price()
        ok = self.success(sales, rounds)
        self.macrosteps += 1
        if ok:
            self.v_hat = x
        if self.done:
            return ok
        if ok:
            self.best = x
            self.n += 1
            if self.a + self.n * self.eps >= self.b:
                self._end_phase(None)
        else:
            self.failures += 1
            self._end_phase(x)
        return ok

    def _end_phase(self, failed: float | None) -> None:
        while True:
            self.a = self.best
            if failed is not None:
                self.b = failed
                failed = None
            self.s += 1
            if self.s > self.final:
                self.done = True
                return
            self.eps = 2.0 ** -(2**self.s)
            self.n = 1
            if self.a + self.eps < self.b:
                return


def run_noisy_search(search: NoisyCautiousSearch, market: Market) -> float | None:
    """Drive ``search`` until the horizon; returns the last successful price."""
    while not market.exhausted:
        if search.done:
            market.post(search.a, market.remaining)
            break
        length = min(search.length, market.remaining)
        sales = market.post(search.next_price(), length)
        if length < search.length:
            break
        search.observe(sales, length)
    return search.v_hat


@dataclass
class CoupledResult:
    p_hat: float | None
    v_hat: float | None
    macrosteps: int
    exhausted: bool = False


def capped_on_search(
    search: NoisyCautiousSearch,
    market: Market,
    delta: float,
    rho: int,
    theta: float = 0.0,
) -> CoupledResult:
    """Estimate ``D`` (``rho=0``) or ``1 - D`` (``rho=1``) from every round of
    the successful search macrosteps.

    After the estimator stops the search keeps going until it has run
    ``ceil(6 / p_hat)`` macrosteps in total.
    """
    est = EstimatorState(alpha=1.0, delta=delta, theta=theta, rho=rho)
    p_hat: float | None = None
    while True:
        if p_hat is not None and search.macrosteps >= math.ceil(6 / p_hat):
            return CoupledResult(p_hat, search.v_hat, search.macrosteps)
        length = search.length
        if market.remaining < length:
            market.post(search.next_price(), market.remaining)
            return CoupledResult(p_hat, search.v_hat, search.macrosteps, exhausted=True)
        x = search.next_price()
        outcomes = [market.post(x, 1) for _ in range(length)]
        if search.observe(sum(outcomes), length) and p_hat is None:
            for sale in outcomes:
                est.feed(float(sale))
                status = est.stopped()
                if status is Status.READY:
                    p_hat = est.estimate()
                    break
                if status is Status.BELOW:
                    return CoupledResult(None, search.v_hat, search.macrosteps)


@dataclass
class MeanEstimationResult:
    """Verdict of the cautious mean estimation at a probe price.

    ``p_low``/``p_high`` estimate the probabilities of the lower and the
    upper valuation; ``probe_mean``/``probe_samples`` are the acceptance
    statistics gathered at the probe.
    """

    verdict: str
    p_low: float | None = None
    p_high: float | None = None
    probe_mean: float = math.nan
    probe_samples: int = 0
    last_theta: float = 0.25


def _feed_joint(joint: JointCappedEstimator, market: Market, w: float) -> bool:
    """Sample at ``w`` until the joint estimator settles; False on horizon."""
    while joint.running():
        if market.exhausted:
            return False
        joint.feed(float(market.post(w, 1)))
    return True


def cautious_mean_estimation(
    w: float, delta: float, market: Market, T: int
) -> MeanEstimationResult:
    joint = JointCappedEstimator(theta=0.25, delta=delta)

    def result(verdict: str, low=None, high=None, theta=0.25) -> MeanEstimationResult:
        return MeanEstimationResult(
            verdict, low, high, joint.direct.mean, joint.t, last_theta=theta
        )

    if not _feed_joint(joint, market, w):
        return result(NONE)
    first = joint.result()
    if first.high is not None and first.low is not None:
        return result(ESTIMATES, first.low, first.high)
    if first.low is not None:
        # the lower valuation carries most of the mass
        probes = math.ceil(math.log(delta) / math.log(0.75))
        for s in range(2, math.ceil(math.log2(T)) + 1):
            if market.remaining < probes:
                return result(NONE, theta=2.0**-s)
            if market.post(2.0**-s, probes) == probes:
                return result(V1_OPTIMAL, theta=2.0**-s)
            joint.raise_cap(2.0 ** -(s + 1))
            if not _feed_joint(joint, market, w):
                return result(NONE, theta=2.0 ** -(s + 1))
            again = joint.result()
            if again.high is not None and again.low is not None:
                return result(ESTIMATES, again.low, again.high, theta=2.0 ** -(s + 1))
        return result(NONE, first.low, None, theta=2.0 ** -(math.ceil(math.log2(T)) + 1))
    if first.high is not None:
        # the upper valuation carries most of the mass
        search = NoisyCautiousSearch(2, 0.75, delta, T)
        coupled = capped_on_search(search, market, delta, rho=1)
        if coupled.p_hat is None or coupled.v_hat is None:
            return result(NONE, None, first.high)
        p_low = coupled.p_hat
        price = min(max(coupled.v_hat * (1 - p_low) - p_low, 0.0), 1.0)
        rounds = math.ceil(math.log(1 / delta) / p_low)
        if market.remaining < rounds:
            market.post(price, market.remaining)
            return result(NONE, p_low, first.high)
        if market.post(price, rounds) < rounds:
            return result(V2_OPTIMAL, p_low, first.high)
        return result(ESTIMATES, p_low, first.high)
    return result(NONE)


def two_arm_length(gamma: float, delta: float) -> int:
    return math.ceil(8 * math.log(1 / delta) / -math.log(1 - gamma))


def two_ucb(
    gamma1: float,
    gamma2: float,
    delta: float,
    market: Market,
    T: int,
    w: float = 0.5,
    w_mean: float | None = None,
    w_samples: int = 0,
) -> GammaPricer:
    """Two fixed arms ``[0, w]`` and ``[w, 1]`` searched by macrosteps.

    ``w_mean``/``w_samples`` seed the upper arm with acceptance statistics
    already collected at ``w``. Without them the first macrostep of the upper
    arm measures ``w`` itself.
    """
    lower = GammaArm(gamma=gamma1, length=two_arm_length(gamma1, delta), scale=w)
    upper = GammaArm(
        gamma=gamma2, length=two_arm_length(gamma2, delta), origin=w, scale=1.0 - w
    )
    anchors = {0.0: 1.0}
    if w_mean is not None and w_samples > 0:
        anchors[upper.a] = w_mean
        upper.retained = w_samples
        upper.sales = w_mean * w_samples
    else:
        upper.n = 0
        anchors[upper.a] = 1.0
    pricer = GammaPricer(T, delta, [lower, upper], anchors, spawn=False)
    pricer.run(market)
    return pricer


def bracket_search(market: Market, T: int, delta: float) -> tuple[float, float]:
    """Repeated-vote bisection of depth ``ceil(log2 T)``."""
    depth = math.ceil(math.log2(T))
    votes = math.ceil(math.log(1 / delta) / math.log(4 / 3))
    lo, hi = 0.0, 1.0
    for _ in range(depth):
        if market.remaining < votes:
            break
        mid = (lo + hi) / 2
        if market.post(mid, votes) > votes / 2:
            lo = mid
        else:
            hi = mid
    return lo, hi


@dataclass
class PipelineReport:
    bracket: tuple[float, float] = (0.0, 1.0)
    p2_tilde: float = 0.0
    w: float = math.nan
    estimation: MeanEstimationResult | None = None
    final_policy: str = NONE
    phase_rounds: dict[str, int] = field(default_factory=dict)


def run_pipeline(market: Market, T: int, delta: float) -> PipelineReport:
    report = PipelineReport()
    mark = market.t

    def close(phase: str) -> None:
        nonlocal mark
        report.phase_rounds[phase] = market.t - mark
        mark = market.t

    a1, a2 = bracket_search(market, T, delta)
    report.bracket = (a1, a2)
    close("bracket")

    est = EstimatorState(alpha=1.0, delta=delta, theta=a1)
    status = Status.CONTINUE
    while status is Status.CONTINUE and not market.exhausted:
        est.feed(float(market.post(a2, 1)))
        status = est.stopped()
    report.p2_tilde = est.estimate() if status is Status.READY else 0.0
    if report.p2_tilde > 0:
        w = a2
    else:
        # a refusal shows a valuation below a1; without one, a1 is never left
        market.post_until_refused(a1)
        w = a1
    report.w = w
    close("probe")
    if market.exhausted:
        return report

    cme = cautious_mean_estimation(w, delta, market, T)
    report.estimation = cme
    close("estimation")
    if market.exhausted:
        return report

    if cme.verdict in (V1_OPTIMAL, V2_OPTIMAL):
        target = 1 if cme.verdict == V1_OPTIMAL else 2
        report.final_policy = f"search-{target}"
        run_noisy_search(NoisyCautiousSearch(target, 0.5, delta, T), market)
    else:
        # inconclusive estimation falls back on the last certified thresholds
        g1 = cme.p_low if cme.p_low is not None else cme.last_theta
        g2 = cme.p_high if cme.p_high is not None else cme.last_theta
        report.final_policy = ESTIMATES if cme.verdict == ESTIMATES else "fallback-2ucb"
        two_ucb(g1, g2, delta, market, T, w=w, w_mean=cme.probe_mean, w_samples=cme.probe_samples)
    close("final")
    return report


def run_two_valuation(
    model: ValuationDistribution,
    T: int,
    delta: float | None = None,
    rng=None,
) -> tuple[RegretTrace, PipelineReport]:
    if model.size > 2:
        raise ValueError("the two-valuation pipeline needs at most two valuations")
    if T < 4:
        raise ValueError("T must be at least 4")
    delta = T**-2.0 if delta is None else delta
    market = Market(model, T, rng)
    report = run_pipeline(market, T, delta)
    trace = market.trace(
        algorithm="twoval",
        T=T,
        delta=delta,
        verdict=report.estimation.verdict if report.estimation else NONE,
    )
    trace.regret = compute_pseudo_regret(trace, model)
    return trace, report
