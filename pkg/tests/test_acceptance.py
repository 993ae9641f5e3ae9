"""Acceptance criteria, one test (or a few parts) per criterion.

Each check records a PASS/FAIL line through the ``criterion`` fixture; the
per-criterion verdicts are printed again at the end of the session.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from latentprice.adversarial import make_sequence, run_adversarial
from latentprice.bandits import UcbState, run_ucb
from latentprice.cautious import SearchState, iter_search, next_price, run_cautious_search, search_prices
from latentprice.cli import main
from latentprice.demand import ValuationDistribution, point_mass, random_instance, two_point_hard_instance
from latentprice.distfree import SearchPhase
from latentprice.estimation import sample_cap, stopping_time_bound, stopping_times
from latentprice.gamma import run_gamma_pricer
from latentprice.harness import run_grid_ucb
from latentprice.market import Market
from latentprice.oracle import OracleArm, _select, oracle_step, run_oracle_pricer
from latentprice.twoval import V1_OPTIMAL, V2_OPTIMAL, cautious_mean_estimation, run_two_valuation

GRID21 = [k / 20 for k in range(21)]


def binomial_envelope(bound: float, n: int, sigmas: float) -> float:
    p = min(bound, 1.0)
    return p + sigmas * math.sqrt(p * (1 - p) / n)


# 1 ---------------------------------------------------------------------------


def test_criterion_1_shrink_rate(criterion):
    steps = 10**5
    worst = Fraction(0)
    violations = mismatches = 0
    for v in GRID21:
        target = Fraction(v)
        for m, state in enumerate(iter_search(target, SearchState.exact()), start=1):
            violations += state.width > Fraction(2, m)
            worst = max(worst, state.width * m / 2)
            # widths never grow, so once below 2/steps the bound holds up to steps
            if m == steps or state.width <= Fraction(2, steps):
                break
        # the float search used by the pricers posts the same prices
        prices, _, _ = search_prices(v, steps)
        exact = []
        for state in iter_search(target, SearchState.exact()):
            if len(exact) == len(prices):
                break
            exact.append(float(next_price(state)))
        mismatches += prices != exact
    ok = violations == 0 and mismatches == 0
    assert criterion(1, "cautious-search shrink rate", "b-a <= 2/m", ok,
                     f"21 targets, m <= 1e5, max m(b-a)/2 = {float(worst):.3f}, "
                     f"{violations} violations, {mismatches} float/exact mismatches")


# 2 ---------------------------------------------------------------------------


def test_criterion_2_cautious_regret(criterion):
    worst, worst_at = -math.inf, None
    for T in (10**3, 10**4, 10**5, 10**6):
        budget = 3 * math.log(math.log(T)) + 8
        for v in GRID21:
            slack = run_cautious_search(v, T).final_regret - budget
            if slack > worst:
                worst, worst_at = slack, (T, v)
    ok = worst <= 0
    assert criterion(2, "cautious-search regret", "regret <= 3 lnln T + 8", ok,
                     f"84 runs, worst regret - budget = {worst:.3f} at T,v={worst_at}")


# 3 ---------------------------------------------------------------------------


def test_criterion_3_oracle_regret(criterion):
    T = 10**5
    rng = np.random.default_rng(2024)
    worst = -math.inf
    runs = 0
    for K in (1, 2, 3, 4):
        budget = K * (3 * math.log(math.log(T)) + 10)
        for _ in range(20):
            model = random_instance(K, rng, min_spacing=1 / T)
            worst = max(worst, run_oracle_pricer(model, T).final_regret / budget)
            runs += 1
    ok = worst <= 1
    assert criterion(3, "oracle-pricer regret", "regret <= K(3 lnln T + 10)", ok,
                     f"{runs} instances, worst regret/budget = {worst:.3f}")


# 4 ---------------------------------------------------------------------------


def replay_subsequences(model: ValuationDistribution, T: int) -> dict[float, list[float]]:
    arms = [OracleArm()]
    subs: dict[float, list[float]] = {v: [] for v in model.valuations}
    for _ in range(T):
        arm = arms[_select(arms)]
        if arm.pinned(T):
            break
        a, b = arm.a, arm.b
        x, _ = oracle_step(arms, T, model.demand)
        for v in model.valuations:
            if a <= v <= b:
                subs[v].append(x)
    return subs


def test_criterion_4_single_search_equivalence(criterion):
    T = 10**4
    rng = np.random.default_rng(4)
    mismatches = compared = 0
    for _ in range(50):
        model = random_instance(int(rng.integers(1, 5)), rng, min_spacing=1 / T)
        for v, seq in replay_subsequences(model, T).items():
            ref, _, _ = search_prices(v, T)
            compared += len(seq)
            mismatches += seq != ref[: len(seq)]
    ok = mismatches == 0
    assert criterion(4, "oracle/single-search equivalence", "price subsequences", ok,
                     f"50 instances, {compared} prices compared, {mismatches} mismatching valuations")


# 5 ---------------------------------------------------------------------------


def estimator_trials(mu: float, delta: float, trials: int, length: int, seed: int, theta=0.0):
    rng = np.random.default_rng(seed)
    out_t, out_mean, out_code = [], [], []
    for start in range(0, trials, 500):
        rows = (rng.random((min(500, trials - start), length)) < mu).astype(np.float64)
        t, mean, code = stopping_times(rows, 1.0, delta, theta)
        out_t.append(t)
        out_mean.append(mean)
        out_code.append(code)
    return np.concatenate(out_t), np.concatenate(out_mean), np.concatenate(out_code)


def test_criterion_5_multiplicative_estimation(criterion):
    delta, trials = 1e-3, 10**4
    all_ok = True
    for mu in (0.05, 0.25, 0.5, 0.9):
        t0 = stopping_time_bound(mu, 1.0, delta)
        t, mean, code = estimator_trials(mu, delta, trials, 2 * t0, seed=int(mu * 1000))
        ready = code == 1
        inside = ready & (mean / 2 < mu) & (mu < 1.5 * mean)
        miss_rate = 1 - inside.mean()
        late_rate = np.mean(~ready | (t > t0))
        limit = binomial_envelope(3 * t0 * delta, trials, 3)
        ok = miss_rate <= limit and late_rate <= limit
        all_ok &= ok
        criterion(5, "multiplicative mean estimation", f"mu={mu}", ok,
                  f"t0={t0}, sandwich misses {miss_rate:.4f}, tau>t0 {late_rate:.4f}, "
                  f"envelope {limit:.4f}")
    assert all_ok


# 6 ---------------------------------------------------------------------------


def test_criterion_6_capped_soundness(criterion):
    delta, trials = 1e-3, 10**4
    all_ok = True
    for theta in (0.05, 0.1, 0.25):
        cap = sample_cap(theta, delta)
        for ratio in (0.5, 0.8, 1.0, 1.25, 2.0):
            mu = theta * ratio
            _, _, code = estimator_trials(mu, delta, trials, cap + 1, seed=int(1e4 * mu), theta=theta)
            below = np.mean(code == -1)
            wrong = below if mu > theta else 0.0
            limit = binomial_envelope(3 * cap * delta, trials, 3)
            ok = wrong <= limit
            all_ok &= ok
            criterion(6, "capped estimation soundness", f"theta={theta} mu={mu:.4g}", ok,
                      f"below-threshold rate {below:.4f}, wrong {wrong:.4f}, envelope {limit:.4f}")
    assert all_ok


# 7 ---------------------------------------------------------------------------


def test_criterion_7_gamma_log_growth(criterion):
    model = ValuationDistribution((0.3, 0.9), (0.5, 0.5))
    T = 5 * 10**5
    seeds = range(20)
    gamma_mean = {h: np.mean([run_gamma_pricer(model, h, 0.4, rng=s).final_regret for s in seeds])
                  for h in (T, 2 * T)}
    grid_mean = {h: np.mean([run_grid_ucb(model, h, rng=s).final_regret for s in seeds])
                 for h in (T, 2 * T)}
    g_ratio = gamma_mean[2 * T] / gamma_mean[T]
    u_ratio = grid_mean[2 * T] / grid_mean[T]
    ok_g = criterion(7, "gamma-pricer log growth", "gamma ratio <= 1.35", g_ratio <= 1.35,
                     f"{gamma_mean[T]:.0f} -> {gamma_mean[2 * T]:.0f}, ratio {g_ratio:.3f}")
    ok_u = criterion(7, "gamma-pricer log growth", "grid-UCB ratio > 1.38", u_ratio > 1.38,
                     f"{grid_mean[T]:.0f} -> {grid_mean[2 * T]:.0f}, ratio {u_ratio:.3f}")
    assert ok_g and ok_u


# 8 ---------------------------------------------------------------------------


LOCALIZATION_MODELS = {
    "hard-1": two_point_hard_instance(1),
    "three-point": ValuationDistribution((0.2, 0.5, 0.8), (0.3, 0.4, 0.3)),
    "point-0.6": point_mass(0.6),
}


@pytest.mark.parametrize("name", sorted(LOCALIZATION_MODELS))
def test_criterion_8_distfree_localization(criterion, name):
    model = LOCALIZATION_MODELS[name]
    T, seeds = 10**6, 50
    K = model.size
    relevant = [v for v, p in zip(model.valuations, model.probabilities) if p >= (K / T) ** 0.25]
    good = 0
    worst_steps = 0
    for seed in range(seeds):
        phase = SearchPhase(T, T**-2.0)
        # the phase is run to completion; its length is not capped at T
        phase.run(Market(model, None, seed))
        live = phase.active_arms()
        worst_steps = max(worst_steps, phase.macrosteps)
        good += all(any(a.a <= v <= a.b and a.b - a.a <= T**-0.5 for a in live) for v in relevant)
    ok = good >= 0.9 * seeds and worst_steps <= math.sqrt(K * T)
    assert criterion(8, "distribution-free localization", name, ok,
                     f"{good}/{seeds} seeds localized, max macrosteps {worst_steps}")


# 9 ---------------------------------------------------------------------------


def pipeline_regrets(model, T, seeds):
    return [run_two_valuation(model, T, rng=s)[0].final_regret for s in seeds]


def test_criterion_9_two_valuation_budget(criterion):
    T = 10**6
    lt = math.log(T)
    budget = 10 * (lt / 0.25 + lt * math.log(lt))
    mean = np.mean(pipeline_regrets(two_point_hard_instance(1), T, range(20)))
    ok = mean <= budget
    assert criterion(9, "two-valuation pipeline", "regret budget", ok,
                     f"mean regret {mean:.0f} vs 10(lnT/D + lnT lnlnT) = {budget:.0f}")


def test_criterion_9_two_valuation_growth(criterion):
    T = 5 * 10**5
    model = two_point_hard_instance(1)
    low = np.mean(pipeline_regrets(model, T, range(20)))
    high = np.mean(pipeline_regrets(model, 2 * T, range(20)))
    ok = high / low <= 1.35
    assert criterion(9, "two-valuation pipeline", "ratio <= 1.35", ok,
                     f"{low:.0f} -> {high:.0f}, ratio {high / low:.3f}")


def correct_verdict(verdict: str, v1: float, v2: float, p1: float) -> bool:
    r1, r2 = v1, v2 * (1 - p1)
    if verdict == V1_OPTIMAL:
        return r1 >= r2 - 1e-12
    if verdict == V2_OPTIMAL:
        return r2 >= r1 - 1e-12
    return True


def test_criterion_9_verdict_soundness(criterion):
    T = 10**5
    delta = T**-2.0
    cells = [
        (v1, v2, p1, (v1 + v2) / 2 if where == "mid" else v2)
        for v1, v2, p1, where in itertools.product(
            (0.1, 0.3, 0.45), (0.5, 0.9), (0.05, 0.5, 0.8, 0.9, 0.97), ("mid", "top")
        )
    ]
    issued = wrong = 0
    for k in range(1000):
        v1, v2, p1, w = cells[k % len(cells)]
        model = ValuationDistribution((v1, v2), (p1, 1 - p1))
        res = cautious_mean_estimation(w, delta, Market(model, T, k), T)
        issued += res.verdict in (V1_OPTIMAL, V2_OPTIMAL)
        wrong += not correct_verdict(res.verdict, v1, v2, p1)
    # the same grid through the whole pipeline
    grid = [(0.0, 0.5, 0.5), (0.4, 1.0, 0.05), (0.45, 0.5, 0.2), (0.3, 0.4, 0.15),
            (0.2, 0.9, 0.85), (0.1, 0.3, 0.9), (0.05, 0.2, 0.85), (0.13, 0.8, 0.86)]
    p_issued = p_wrong = 0
    for k in range(200):
        v1, v2, p1 = grid[k % len(grid)]
        model = ValuationDistribution((v1, v2), (p1, 1 - p1))
        verdict = run_two_valuation(model, T, rng=k)[0].meta["verdict"]
        p_issued += verdict in (V1_OPTIMAL, V2_OPTIMAL)
        p_wrong += not correct_verdict(verdict, v1, v2, p1)
    ok = wrong == 0 and p_wrong == 0
    assert criterion(9, "two-valuation pipeline", "verdict soundness", ok,
                     f"1000 estimation runs: {issued} verdicts, {wrong} wrong; "
                     f"200 pipeline runs: {p_issued} verdicts, {p_wrong} wrong")


# 10 --------------------------------------------------------------------------


def test_criterion_10_adversarial(criterion):
    T, seeds = 10**4, 50
    v1, v2 = 0.5, 0.75
    budget = 2 * math.sqrt(T) + math.sqrt(4 * T * math.log(2))
    means = {}
    per_run_ok = True
    for kind in ("all-v2", "all-v1", "alternating"):
        seq = make_sequence(kind, v1, v2, T)
        regrets = []
        for s in range(seeds):
            tr = run_adversarial(v1, v2, seq, T, rng=s)
            regrets.append(tr.final_regret)
            per_run_ok &= tr.meta["decrements"] < math.sqrt(T)
            per_run_ok &= bool(np.all(tr.meta["b_path"] >= v1 - T**-0.5))
        means[kind] = float(np.mean(regrets))
    worst = max(means, key=means.get)
    ok_mean = criterion(10, "adversarial pricer", "worst mean regret", means[worst] <= budget,
                        f"{worst} {means[worst]:.1f} vs {budget:.1f}")
    ok_runs = criterion(10, "adversarial pricer", "per-run decrements and floor", per_run_ok,
                        f"{3 * seeds} runs")
    assert ok_mean and ok_runs


# 11 --------------------------------------------------------------------------


def test_criterion_11_inflated_ucb(criterion):
    T, seeds = 10**4, 50
    means = (0.7, 0.3)
    gap = means[0] - means[1]
    delta = T**-2.0
    lg = math.log(1 / delta)
    all_ok = True
    for alpha, gamma in itertools.product((0.0, 16.0), (0.25, 0.5)):
        rhs = 1 + (2 * (delta * T) ** 2 + 8 * alpha * lg / gamma**2) * 2 + 4 * lg / gap
        pulls = []
        for s in range(seeds):
            rng = np.random.default_rng(s)
            draws = rng.random((2, T))
            used = [0, 0]

            def pull(k: int) -> float:
                r = float(draws[k, used[k]] < means[k])
                used[k] += 1
                return r

            state = UcbState.fresh(2, delta, alpha=alpha, gamma=gamma, inflated=[False, True])
            run_ucb(state, pull, T)
            pulls.append(int(state.counts[1]))
        mean = float(np.mean(pulls))
        slack = 3 * float(np.std(pulls, ddof=1)) / math.sqrt(seeds)
        ok_pulls = mean <= rhs + slack
        ok_regret = gap * mean <= rhs + gap * slack
        all_ok &= ok_pulls and ok_regret
        criterion(11, "inflated UCB", f"alpha={alpha:g} gamma={gamma}", ok_pulls and ok_regret,
                  f"suboptimal pulls {mean:.1f}, regret {gap * mean:.1f}, bound {rhs:.1f}")
    assert all_ok


# 12 --------------------------------------------------------------------------


RUN_CONFIGS = [
    ["--algorithm", "cautious", "--instance", "point", "--param", "v=0.37", "-T", "5000"],
    ["--algorithm", "oracle", "--instance", "random", "--param", "K=3", "-T", "20000"],
    ["--algorithm", "distfree", "--instance", "hard-1", "-T", "50000", "--seeds", "0-2"],
    ["--algorithm", "gamma", "--instance", "hard-1", "--gamma", "0.4", "-T", "50000",
     "--seeds", "1-3"],
    ["--algorithm", "twoval", "--instance", "hard-1", "-T", "50000", "--seeds", "0,5"],
    ["--algorithm", "adversarial", "--v1", "0.5", "--v2", "0.75", "-T", "5000", "--seeds", "0-2"],
    ["--algorithm", "grid-ucb", "--instance", "hard-2", "-T", "20000", "--seeds", "0-1",
     "--per-round"],
]


def test_criterion_12_reproducibility(criterion, tmp_path):
    identical = 0
    for k, args in enumerate(RUN_CONFIGS):
        outputs = []
        for rep in range(2):
            out = tmp_path / f"{k}-{rep}"
            assert main(["run", *args, "-o", str(out)]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        identical += outputs[0] == outputs[1] and any(n.endswith(".csv") for n in outputs[0])
    ok = identical == len(RUN_CONFIGS)
    assert criterion(12, "reproducibility", "byte-identical run output", ok,
                     f"{identical}/{len(RUN_CONFIGS)} configurations identical")
