"""Finite-support valuation distributions and their demand curves.

A buyer population is described by a handful of valuations and their
probabilities. Demand at a price is the mass of valuations at or above it,
so the curve is a non-increasing step function with a drop at each
valuation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

PROB_TOL = 1e-12
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ValuationDistribution:
    """Buyer valuations ``v_1 < ... < v_K`` in [0, 1] with their probabilities.

    Probabilities must sum to one within ``1e-12``; they are renormalized
    exactly on construction.
    """

    valuations: tuple[float, ...]
    probabilities: tuple[float, ...]
    name: str = ""
    _tail: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.valuations)
        probs = tuple(float(p) for p in self.probabilities)
        if len(vals) == 0:
            raise ValueError("at least one valuation is required")
        if len(vals) != len(probs):
            raise ValueError("valuations and probabilities differ in length")
        if any(not (0.0 <= v <= 1.0) for v in vals):
            raise ValueError("valuations must lie in [0, 1]")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("valuations must be strictly increasing")
        if any(not (0.0 < p <= 1.0) for p in probs):
            raise ValueError("probabilities must lie in (0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        probs = tuple(p / total for p in probs)
        # tail[k] = P(V >= v_k); tail[K] = 0
        tail = np.zeros(len(vals) + 1)
        tail[:-1] = np.cumsum(np.asarray(probs)[::-1])[::-1]
        tail[0] = 1.0
        object.__setattr__(self, "valuations", vals)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "_tail", tail)

    @property
    def size(self) -> int:
        return len(self.valuations)

    def demand(self, price: float) -> float:
        """Probability that a buyer accepts ``price``."""
        return evaluate_demand(self, price)

    def demand_many(self, prices: ArrayLike) -> NDArray[np.float64]:
        prices = np.asarray(prices, dtype=float)
        idx = np.searchsorted(self.valuations, prices, side="left")
        return self._tail[idx]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "valuations": list(self.valuations),
            "probabilities": list(self.probabilities),
        }


@dataclass(frozen=True)
class DemandPoint:
    price: float
    demand: float
    revenue: float

    @classmethod
    def at(cls, model: ValuationDistribution, price: float) -> DemandPoint:
        d = evaluate_demand(model, price)
        return cls(price=price, demand=d, revenue=price * d)


@dataclass(frozen=True)
class InstanceSummary:
    """Revenue landscape of a model.

    ``gaps[j]`` is the revenue shortfall of valuation ``j`` against the optimum.
    ``min_gap`` is the smallest strictly positive gap, or None when every
    valuation is optimal. ``min_spacing`` is None for a single valuation.
    """

    optimal_price: float
    optimal_revenue: float
    gaps: tuple[float, ...]
    min_gap: float | None
    min_prob: float
    min_spacing: float | None


def evaluate_demand(model: ValuationDistribution, price: float) -> float:
    """Total mass of valuations at or above ``price``."""
    if not (0.0 <= price <= 1.0):
        raise ValueError(f"price {price!r} outside [0, 1]")
    idx = int(np.searchsorted(model.valuations, price, side="left"))
    return float(model._tail[idx])


def revenues(model: ValuationDistribution) -> NDArray[np.float64]:
    """Expected revenue ``v * D(v)`` at each valuation."""
    vals = np.asarray(model.valuations)
    return vals * model._tail[:-1]


def summarize(model: ValuationDistribution) -> InstanceSummary:
    rev = revenues(model)
    best = float(rev.max())
    # smallest valuation whose revenue ties the maximum
    k = int(np.flatnonzero(rev >= best - TIE_TOL)[0])
    opt_rev = float(rev[k])
    gaps = np.maximum(opt_rev - rev, 0.0)
    gaps[gaps <= TIE_TOL] = 0.0
    positive = gaps[gaps > 0]
    vals = np.asarray(model.valuations)
    return InstanceSummary(
        optimal_price=model.valuations[k],
        optimal_revenue=opt_rev,
        gaps=tuple(float(g) for g in gaps),
        min_gap=float(positive.min()) if positive.size else None,
        min_prob=min(model.probabilities),
        min_spacing=float(np.diff(vals).min()) if model.size > 1 else None,
    )


def sample_buyer(model: ValuationDistribution, rng: np.random.Generator) -> float:
    """Draw one valuation."""
    return float(sample_buyers(model, rng, 1)[0])


def sample_buyers(
    model: ValuationDistribution, rng: np.random.Generator, size: int
) -> NDArray[np.float64]:
    cdf = np.cumsum(model.probabilities)
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    idx = np.minimum(idx, model.size - 1)
    return np.asarray(model.valuations)[idx]


# ---------------------------------------------------------------- generators


def two_point_hard_instance(which: int, eta: float = 0.125) -> ValuationDistribution:
    """The pair of nearly indistinguishable instances.

    ``which=1`` puts mass 1/2 on 0 and on 1/2. ``which=2`` moves mass ``eta``
    from 0 to ``(1 - eta)/2``, which then becomes the unique best price.
    """
    if which == 1:
        return ValuationDistribution((0.0, 0.5), (0.5, 0.5), name="hard-1")
    if which == 2:
        if not (0.0 < eta <= 0.25):
            raise ValueError("eta must lie in (0, 1/4]")
        return ValuationDistribution(
            (0.0, (1.0 - eta) / 2.0, 0.5), (0.5 - eta, eta, 0.5), name=f"hard-2(eta={eta!r})"
        )
    raise ValueError("which must be 1 or 2")


def equal_revenue_family(K: int, j: int = 0, epsilon: float = 0.01) -> ValuationDistribution:
    """Grid ``1/2 + i/(2K)``, ``i = 0..K``, with equal revenue 1/2 at every point.

    The base law has ``P(V >= v) = 1/(2v)`` on the grid. For ``j > 0`` a share
    ``4*K*epsilon`` of the mass at grid point ``j - 1`` is moved up to point
    ``j``, which lifts the revenue there above 1/2. The support has ``K + 1``
    points.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if j != 0 and not (math.ceil(K / 2) <= j <= K):
        raise ValueError(f"j must be 0 or in [{math.ceil(K / 2)}, {K}]")
    if not (0.0 < epsilon < 1.0 / 40.0) or 4 * K * epsilon >= 1.0:
        raise ValueError("epsilon must satisfy 0 < epsilon < 1/40 and 4*K*epsilon < 1")
    grid = 0.5 + np.arange(K + 1) / (2.0 * K)
    tail = 1.0 / (2.0 * grid)
    probs = tail - np.append(tail[1:], 0.0)
    probs[0] = 1.0 - tail[1]
    if j > 0:
        moved = 4 * K * epsilon * probs[j - 1]
        probs[j - 1] -= moved
        probs[j] += moved
    tag = f"equal-revenue(K={K},j={j}" + (f",eps={epsilon!r})" if j else ")")
    return ValuationDistribution(tuple(grid), tuple(probs / probs.sum()), name=tag)


def point_mass(v: float) -> ValuationDistribution:
    return ValuationDistribution((v,), (1.0,), name=f"point({v!r})")


def random_instance(
    K: int,
    rng: np.random.Generator,
    min_spacing: float = 0.0,
    min_prob: float = 0.0,
) -> ValuationDistribution:
    """Uniform valuations and Dirichlet probabilities, resampled until the
    spacing and probability floors hold."""
    if K < 1:
        raise ValueError("K must be positive")
    if (K - 1) * min_spacing >= 1.0 or K * min_prob >= 1.0:
        raise ValueError("floors are infeasible for this K")
    for _ in range(10_000):
        vals = np.sort(rng.random(K))
        probs = rng.dirichlet(np.ones(K))
        if K > 1 and (np.diff(vals).min() <= 0 or np.diff(vals).min() < min_spacing):
            continue
        if probs.min() < min_prob:
            continue
        return ValuationDistribution(tuple(vals), tuple(probs), name=f"random(K={K})")
    raise RuntimeError("could not draw an instance satisfying the floors")


GENERATORS = {
    "hard-1": lambda **kw: two_point_hard_instance(1),
    "hard-2": lambda eta=0.125, **kw: two_point_hard_instance(2, float(eta)),
    "equal-revenue": lambda K=2, j=0, epsilon=0.01, **kw: equal_revenue_family(
        int(K), int(j), float(epsilon)
    ),
    "point": lambda v=0.5, **kw: point_mass(float(v)),
    "random": lambda K=2, seed=0, min_spacing=0.0, min_prob=0.0, **kw: random_instance(
        int(K), np.random.default_rng(int(seed)), float(min_spacing), float(min_prob)
    ),
}


def make_instance(name: str, **params: Any) -> ValuationDistribution:
    """Build a named instance; ``custom`` takes ``valuations``/``probabilities``
    and ``file`` takes ``path``."""
    if name == "custom":
        return ValuationDistribution(
            tuple(params["valuations"]), tuple(params["probabilities"]), name="custom"
        )
    if name == "file":
        return load_instance(params["path"])
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown instance {name!r}") from None
    return gen(**params)


def save_instance(model: ValuationDistribution, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_instance(path: str | PathLike) -> ValuationDistribution:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return ValuationDistribution(
        tuple(data["valuations"]), tuple(data["probabilities"]), name=data.get("name", "")
    )
