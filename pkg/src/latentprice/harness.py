"""Experiment orchestration: seeded replications, regret summaries, scaling fits."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from latentprice.adversarial import load_sequence, make_sequence, run_adversarial
from latentprice.bandits import UcbState, run_ucb
from latentprice.cautious import run_cautious_search
from latentprice.demand import ValuationDistribution, make_instance
from latentprice.distfree import EXACT_ZERO, run_distribution_free
from latentprice.gamma import run_gamma_pricer
from latentprice.market import Market, RegretTrace, compute_pseudo_regret
from latentprice.oracle import run_oracle_pricer
from latentprice.twoval import run_two_valuation

OUTPUT_ENV = "LATENTPRICE_OUTPUT_DIR"
ALGORITHMS = ("cautious", "oracle", "distfree", "gamma", "twoval", "adversarial", "grid-ucb")
ADVERSARIES = ("all-v1", "all-v2", "alternating")


@dataclass
class ExperimentConfig:
    algorithm: str
    instance: str = "hard-1"
    instance_params: dict[str, Any] = field(default_factory=dict)
    T: int = 10_000
    delta: float | None = None
    gamma: float | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    master_seed: int = 0
    output: str | None = None
    v1: float | None = None
    v2: float | None = None
    adversary: str = "alternating"
    sequence_file: str | None = None
    zero_anchor: str = EXACT_ZERO
    workers: int = 1
    per_round: bool = False

    @property
    def resolved_delta(self) -> float:
        return float(self.T) ** -2.0 if self.delta is None else self.delta

    def model(self) -> ValuationDistribution:
        return make_instance(self.instance, **self.instance_params)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.T < 4:
            raise ValueError("T must be at least 4")
        if self.delta is not None and not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.algorithm == "gamma" and (self.gamma is None or self.gamma <= 0):
            raise ValueError("the gamma pricer needs a positive gamma")
        if self.algorithm == "adversarial":
            if self.v1 is None or self.v2 is None:
                raise ValueError("the adversarial pricer needs v1 and v2")
            if self.sequence_file is None and self.adversary not in ADVERSARIES:
                raise ValueError(f"unknown adversary {self.adversary!r}")
            if self.sequence_file is not None:
                seq = load_sequence(self.sequence_file, self.v1, self.v2)
                if seq.size < self.T:
                    raise ValueError("sequence shorter than horizon")
            return
        model = self.model()
        if self.algorithm == "twoval" and model.size > 2:
            raise ValueError("the two-valuation pipeline needs an instance with K <= 2")
        if self.algorithm == "cautious" and model.size != 1:
            raise ValueError("cautious search needs a single-valuation instance")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ExperimentConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def replication_rng(master_seed: int, seed: int) -> np.random.Generator:
    """Independent stream for one replication.

    The stream depends only on the pair ``(master_seed, seed)``, never on
    which worker runs it or in what order.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(seed,)))


def run_grid_ucb(
    model: ValuationDistribution, T: int, delta: float | None = None, rng=None
) -> RegretTrace:
    """UCB over the uniform grid of ``ceil(sqrt(T))`` prices in (0, 1]."""
    delta = T**-2.0 if delta is None else delta
    size = math.ceil(math.sqrt(T))
    prices = [(k + 1) / size for k in range(size)]
    market = Market(model, T, rng)
    state = UcbState.fresh(size, delta)
    run_ucb(state, lambda k: prices[k] * market.post(prices[k], 1), T)
    trace = market.trace(algorithm="grid-ucb", T=T, delta=delta, arms=size)
    trace.regret = compute_pseudo_regret(trace, model)
    return trace


def run_single(config: ExperimentConfig, seed: int) -> RegretTrace:
    rng = replication_rng(config.master_seed, seed)
    T, delta = config.T, config.resolved_delta
    algo = config.algorithm
    if algo == "adversarial":
        if config.sequence_file is not None:
            seq = load_sequence(config.sequence_file, config.v1, config.v2)
        else:
            seq = make_sequence(config.adversary, config.v1, config.v2, T)
        trace = run_adversarial(config.v1, config.v2, seq, T, rng=rng)
        trace.meta.pop("b_path", None)
    else:
        model = config.model()
        if algo == "cautious":
            trace = run_cautious_search(model.valuations[0], T)
        elif algo == "oracle":
            trace = run_oracle_pricer(model, T)
        elif algo == "distfree":
            trace = run_distribution_free(model, T, delta, rng=rng, zero_anchor=config.zero_anchor)
        elif algo == "gamma":
            trace = run_gamma_pricer(model, T, config.gamma, delta, rng=rng)
        elif algo == "twoval":
            trace, _ = run_two_valuation(model, T, delta, rng=rng)
        else:
            trace = run_grid_ucb(model, T, delta, rng=rng)
        trace.meta["instance"] = model.name
    trace.meta.update(seed=seed, T=T, delta=delta, algorithm=algo)
    if config.gamma is not None:
        trace.meta["gamma"] = config.gamma
    return trace


def checkpoints(T: int) -> list[int]:
    """1-2-5 grid of round counts up to ``T``, always ending at ``T``."""
    out = []
    scale = 1
    while scale <= T:
        for m in (1, 2, 5):
            if m * scale <= T:
                out.append(m * scale)
        scale *= 10
    if out[-1] != T:
        out.append(T)
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[RegretTrace]
    summary: dict[str, Any]


def summarize_traces(traces: Sequence[RegretTrace], T: int) -> dict[str, Any]:
    finals = np.array([tr.final_regret for tr in traces])
    n = finals.size
    half = [tr.regret_at(T // 2) for tr in traces]
    decades = [10**k for k in range(2, int(math.log10(T)) + 1)]
    mean_half = float(np.mean(half))
    return {
        "runs": n,
        "mean_final_regret": float(finals.mean()),
        "max_final_regret": float(finals.max()),
        "stderr_final_regret": float(finals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "decade_regret": {t: float(np.mean([tr.regret_at(t) for tr in traces])) for t in decades},
        "within_run_doubling_ratio": float(finals.mean() / mean_half) if mean_half > 0 else math.nan,
    }


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    config.validate()
    seeds = list(config.seeds)
    if config.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            traces = list(pool.map(run_single, [config] * len(seeds), seeds))
    else:
        traces = [run_single(config, s) for s in seeds]
    return ExperimentResult(config, traces, summarize_traces(traces, config.T))


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    low: float
    high: float
    intercept: float
    points: int


def scaling_report(horizons: Sequence[int], regrets: Sequence[Sequence[float]]) -> ScalingFit:
    """Fit ``log(1 + regret)`` against ``log T`` over all replications.

    ``regrets[i]`` holds the final regrets of the runs at ``horizons[i]``.
    Needs at least three horizons with ten runs each.
    """
    if len(horizons) != len(regrets):
        raise ValueError("one list of regrets per horizon is required")
    if len(set(horizons)) < 3 or min(len(r) for r in regrets) < 10:
        raise ValueError("insufficient points: need >= 3 horizons with >= 10 runs each")
    x = np.concatenate([np.full(len(r), math.log(T)) for T, r in zip(horizons, regrets)])
    y = np.log1p(np.concatenate([np.asarray(r, dtype=float) for r in regrets]))
    if np.ptp(y) == 0:
        return ScalingFit(0.0, 0.0, 0.0, float(y[0]), y.size)
    fit = stats.linregress(x, y)
    q = stats.t.ppf(0.975, y.size - 2)
    return ScalingFit(
        slope=float(fit.slope),
        low=float(fit.slope - q * fit.stderr),
        high=float(fit.slope + q * fit.stderr),
        intercept=float(fit.intercept),
        points=int(y.size),
    )


# ------------------------------------------------------------------ output


def _fmt(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def output_dir(config_output: str | None) -> Path:
    base = config_output or os.environ.get(OUTPUT_ENV) or "results"
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_results(result: ExperimentResult, out: Path) -> list[Path]:
    """Summary, checkpoint and plot-data files; per-round traces on request."""
    cfg = result.config
    written = []
    scalar_keys = sorted(
        {k for tr in result.traces for k, v in tr.meta.items() if isinstance(v, (int, float, str, bool))}
        - {"seed"}
    )
    rows = []
    for tr in result.traces:
        revenue = float(tr.round_revenue().sum())
        rows.append(
            [tr.meta["seed"], tr.rounds, tr.final_regret, revenue]
            + [tr.meta.get(k, "") for k in scalar_keys]
        )
    path = out / "summary.csv"
    _write_csv(path, ["seed", "rounds", "final_regret", "revenue", *scalar_keys], rows)
    written.append(path)

    grid = checkpoints(cfg.T)
    path = out / "checkpoints.csv"
    _write_csv(
        path,
        ["seed", "t", "regret"],
        [[tr.meta["seed"], t, tr.regret_at(t)] for tr in result.traces for t in grid],
    )
    written.append(path)

    mean_curve = [float(np.mean([tr.regret_at(t) for tr in result.traces])) for t in grid]
    plot = {
        "title": f"{cfg.algorithm} on {cfg.instance}",
        "x_label": "round",
        "y_label": "cumulative regret",
        "series": [{"label": "mean regret", "x": grid, "y": mean_curve}]
        + [
            {"label": f"seed {tr.meta['seed']}", "x": grid, "y": [tr.regret_at(t) for t in grid]}
            for tr in result.traces
        ],
    }
    path = out / "plot.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plot, fh, indent=1, sort_keys=True)
        fh.write("\n")
    written.append(path)

    path = out / "run_summary.json"
    with open(path, "w", encoding="utf-8") as fh:
        # output location and worker count do not affect results, so they are left out
        settings = {k: v for k, v in cfg.to_dict().items() if k not in ("output", "workers")}
        json.dump({"config": settings, "summary": result.summary}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    written.append(path)

    if cfg.per_round:
        for tr in result.traces:
            path = out / f"trace_seed{tr.meta['seed']}.csv"
            written.append(write_trace(tr, path))
    return written


def write_trace(trace: RegretTrace, path: Path) -> Path:
    prices = trace.round_prices()
    feedback = trace.round_feedback()
    revenue = prices * feedback
    regret = trace.regret if trace.regret is not None else np.zeros(prices.size)
    column = "demand" if trace.feedback_kind == "demand" else "sale"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "price", column, "revenue", "regret"])
        for t in range(prices.size):
            writer.writerow(
                [t + 1, repr(float(prices[t])), repr(float(feedback[t])), repr(float(revenue[t])),
                 repr(float(regret[t]))]
            )
    return path


def run_sweep(config: ExperimentConfig, horizons: Sequence[int]) -> tuple[list[ExperimentResult], ScalingFit | None]:
    results = []
    for T in horizons:
        cfg = ExperimentConfig.from_dict({**config.to_dict(), "T": int(T)})
        results.append(run_experiment(cfg))
    finals = [[tr.final_regret for tr in res.traces] for res in results]
    try:
        fit = scaling_report(list(horizons), finals)
    except ValueError:
        fit = None
    return results, fit
