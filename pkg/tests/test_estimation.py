import math

import numpy as np
import pytest

from latentprice.demand import ValuationDistribution, point_mass
from latentprice.estimation import (
    EstimatorState,
    JointCappedEstimator,
    Status,
    joint_capped,
    run_estimator,
    sample_cap,
    stopping_time_bound,
    stopping_times,
)
from latentprice.market import Market
from latentprice.twoval import NoisyCautiousSearch, capped_on_search

E_INV = math.exp(-1)


def test_feed_examples():
    s = EstimatorState().feed(1).feed(1)
    assert (s.mean, s.var) == (1.0, 0.0)
    s = EstimatorState().feed(0).feed(1)
    assert (s.mean, s.var) == (0.5, 0.5)
    s = EstimatorState(rho=1).feed(1)
    assert s.mean == 0.0 and s.t == 1
    with pytest.raises(ValueError):
        EstimatorState().feed(1.5)


def test_first_sample_never_stops():
    s = EstimatorState(delta=0.9).feed(1)
    assert s.stopped() is Status.CONTINUE


def test_all_ones_stop_at_six():
    status, s = run_estimator([1.0] * 20, alpha=1.0, delta=E_INV)
    assert status is Status.READY and s.t == 6
    # (7/3)/(t - 1) <= 1/2 first holds at t = 6
    assert 7 / 3 / 4 > 0.5 >= 7 / 3 / 5


def test_all_zeros_hit_cap():
    assert sample_cap(0.1, E_INV) == 402
    status, s = run_estimator([0.0] * 1000, alpha=1.0, delta=E_INV, theta=0.1)
    assert status is Status.BELOW and s.t == 403
    assert sample_cap(0.0, 0.1) is None


def test_estimate_values():
    s = EstimatorState(alpha=1.0, delta=0.5)
    s.mean, s.t, s.m2 = 0.6, 1000, 0.0
    assert s.estimate() == pytest.approx(0.3)
    s = EstimatorState(alpha=3.0, delta=0.5)
    s.mean, s.t, s.m2 = 0.8, 1000, 0.0
    assert s.estimate() == pytest.approx(0.6)
    with pytest.raises(RuntimeError):
        EstimatorState().estimate()


def test_stopping_time_bound_value():
    # ceil(2 * ln(1000) * (sqrt(315) + 22)) + 2
    expected = math.ceil(2 * math.log(1000) * (math.sqrt(315) + 22)) + 2
    assert stopping_time_bound(0.5, 1.0, 1e-3) == expected == 552


def test_welford_matches_two_pass():
    rng = np.random.default_rng(3)
    x = rng.random(10**5)
    s = EstimatorState()
    for v in x:
        s.feed(float(v))
    assert abs(s.mean - x.mean()) < 1e-10
    assert abs(s.var - x.var(ddof=1)) < 1e-10


def test_vectorised_stopping_matches_loop():
    rng = np.random.default_rng(4)
    rows = (rng.random((40, 3000)) < rng.uniform(0.02, 0.9, size=(40, 1))).astype(float)
    for theta in (0.0, 0.05):
        t, mean, code = stopping_times(rows, 1.0, 1e-3, theta)
        for r in range(rows.shape[0]):
            status, s = run_estimator(rows[r], 1.0, 1e-3, theta)
            want = {Status.READY: 1, Status.BELOW: -1, Status.CONTINUE: 0}[status]
            assert code[r] == want
            if want:
                assert t[r] == s.t
                assert mean[r] == pytest.approx(s.mean, abs=1e-12)


def test_sandwich_small_monte_carlo():
    rng = np.random.default_rng(5)
    mu, delta = 0.25, 1e-2
    t0 = stopping_time_bound(mu, 1.0, delta)
    rows = (rng.random((2000, t0 + 200)) < mu).astype(float)
    t, mean, code = stopping_times(rows, 1.0, delta)
    assert np.all(code == 1)
    bad = np.mean(~((mean / 2 < mu) & (mu < 1.5 * mean)))
    assert bad <= 3 * t0 * delta
    assert np.mean(t > t0) <= 3 * t0 * delta


def test_joint_alternating():
    res = joint_capped([0.0, 1.0] * 5000, theta=0.25, delta=0.01)
    assert res.high == pytest.approx(res.low)
    assert res.high == pytest.approx(0.25)
    est = JointCappedEstimator(0.25, 0.01)
    ready = []
    for x in [0.0, 1.0] * 5000:
        est.feed(x)
        ready.append((est.direct.condition(), est.complement.condition()))
        if not est.running():
            break
    assert ready[-1] == (True, True)
    assert all(a == b for a, b in ready[1::2])


def test_joint_all_ones():
    res = joint_capped([1.0] * 10**4, theta=0.25, delta=0.01)
    assert res.high == pytest.approx(0.5)
    assert res.low is None and not res.exhausted
    assert res.samples == sample_cap(0.25, 0.01) + 1


@pytest.mark.parametrize("p", [0.9, 0.95])
def test_joint_bernoulli_high_side(p):
    rng = np.random.default_rng(6)
    mu = 1 - p
    certified = sound = 0
    for _ in range(1000):
        res = joint_capped((rng.random(5000) < p).astype(float), theta=0.25, delta=1e-3)
        certified += res.low is None
        # either verdict is correct here: mu <= theta, or an estimate in (mu/3, mu)
        sound += res.low is None or mu / 3 < res.low < mu
    assert sound >= 990
    if p == 0.95:
        # far below the threshold the cap is reached first
        assert certified >= 990


def test_capped_on_search_all_accepted():
    T = 10**5
    market = Market(point_mass(1.0), T, 0)
    search = NoisyCautiousSearch(1, 0.5, 0.01, T)
    res = capped_on_search(search, market, 0.01, rho=0)
    assert res.p_hat == pytest.approx(0.5)
    assert res.macrosteps == 12
    assert res.v_hat is not None and res.v_hat > 0.5


def test_capped_on_search_uncapped_never_stops():
    T = 2000
    market = Market(point_mass(1.0), T, 0)
    res = capped_on_search(NoisyCautiousSearch(1, 0.5, 0.01, T), market, 0.01, rho=1)
    assert res.p_hat is None and res.exhausted and market.exhausted


def test_capped_on_search_complement_sandwich():
    # demand 0.75 at every positive price
    model = ValuationDistribution((0.0, 1.0), (0.25, 0.75))
    T = 10**5
    inside = 0
    for seed in range(1000):
        market = Market(model, T, seed)
        search = NoisyCautiousSearch(2, 0.75, 1e-2, T)
        res = capped_on_search(search, market, 1e-2, rho=1)
        inside += res.p_hat is not None and 0.25 / 3 < res.p_hat < 0.25
    assert inside >= 950
