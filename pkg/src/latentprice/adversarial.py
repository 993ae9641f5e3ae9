"""Two-valuation pricing against an arbitrary valuation sequence.

The upper valuation is known. Exp3 chooses between posting it and posting
a moving price ``b`` that starts at the upper valuation and steps down by
``T**-0.5`` each time it is refused. Refusals of ``b`` are fed to Exp3 as
zero loss, so the moving arm is not punished while it is still searching
for the lower valuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from latentprice.bandits import Exp3State, exp3_update
from latentprice.market import RegretTrace, SequenceMarket, hindsight_regret

MOVING, FIXED = 0, 1


@dataclass
class MovingArmState:
    b: float
    v2: float
    decrement: float
    exp3: Exp3State
    decrements: int = 0

    @classmethod
    def fresh(cls, v2: float, T: int) -> MovingArmState:
        return cls(b=v2, v2=v2, decrement=T**-0.5, exp3=Exp3State.fresh(2, T))


@dataclass(frozen=True)
class StepOutcome:
    price: float
    arm: int
    sale: bool
    loss: float
    reduced_loss: float


def adversarial_step(
    state: MovingArmState, value: float, rng: np.random.Generator
) -> StepOutcome:
    """Play one round against a buyer with valuation ``value``."""
    probs = state.exp3.probabilities()
    arm = MOVING if rng.random() < probs[MOVING] else FIXED
    price = state.b if arm == MOVING else state.v2
    sale = value >= price
    loss = 1.0 - price * sale
    reduced = loss if (arm == FIXED or sale) else 0.0
    exp3_update(state.exp3, arm, reduced, probs[arm])
    if arm == MOVING and not sale:
        state.b = max(state.b - state.decrement, 0.0)
        state.decrements += 1
    return StepOutcome(price, arm, bool(sale), loss, reduced)


def make_sequence(kind: str, v1: float, v2: float, T: int) -> NDArray[np.float64]:
    if kind == "all-v1":
        return np.full(T, v1)
    if kind == "all-v2":
        return np.full(T, v2)
    if kind == "alternating":
        return np.where(np.arange(T) % 2 == 0, v1, v2)
    raise ValueError(f"unknown adversary {kind!r}")


def load_sequence(path: str | PathLike, v1: float, v2: float) -> NDArray[np.float64]:
    """Read one valuation index (1 or 2) per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            token = line.strip()
            if not token:
                continue
            if token not in ("1", "2"):
                raise ValueError(f"line {lineno}: expected 1 or 2, got {token!r}")
            out.append(v1 if token == "1" else v2)
    return np.asarray(out, dtype=float)


def save_sequence(path: str | PathLike, values: Sequence[float], v1: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in values:
            fh.write("1\n" if v == v1 else "2\n")


def run_adversarial(
    v1: float,
    v2: float,
    sequence: Sequence[float],
    T: int,
    rng=None,
) -> RegretTrace:
    if not (0.0 <= v1 <= v2 <= 1.0):
        raise ValueError("need 0 <= v1 <= v2 <= 1")
    values = np.asarray(sequence, dtype=float)
    if values.size < T:
        raise ValueError("sequence shorter than horizon")
    values = values[:T]
    if not np.all((values == v1) | (values == v2)):
        raise ValueError("sequence contains values other than v1 and v2")
    rng = np.random.default_rng(rng)
    state = MovingArmState.fresh(v2, T)
    market = SequenceMarket(values, T)
    b_path = np.empty(T)
    loss_gap = 0.0
    for t, value in enumerate(values.tolist()):
        b_path[t] = state.b
        out = adversarial_step(state, value, rng)
        market.post(out.price, 1)
        loss_gap += out.loss - out.reduced_loss
    trace = market.trace(
        algorithm="adversarial",
        T=T,
        v1=v1,
        v2=v2,
        decrements=state.decrements,
        b_path=b_path,
        loss_gap=loss_gap,
        decrement_limit=math.sqrt(T),
    )
    trace.regret = hindsight_regret(trace, values, [v1, v2])
    return trace
