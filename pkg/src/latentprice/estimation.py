"""Sequential multiplicative mean estimation with empirical-Bernstein stopping.

Samples in [0, 1] are fed one at a time. The estimator stops as soon as
the running mean is large relative to its Bernstein confidence width, at
which point ``alpha/(alpha+1)`` times the mean is a multiplicative
estimate. With a cap ``theta > 0`` it gives up after a fixed number of
samples and reports that the mean is at most ``theta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray


class Status(enum.Enum):
    CONTINUE = "continue"
    READY = "estimate-ready"
    BELOW = "below-threshold"


def cap_constant(alpha: float) -> float:
    """Multiplier of ``ln(1/delta)/theta`` in the sample cap."""
    if alpha == 1.0:
        return 40.0
    return (alpha + 2) / 3 * (math.sqrt(9 * alpha**2 + 114 * alpha + 192) + 3 * alpha + 19)


def sample_cap(theta: float, delta: float, alpha: float = 1.0) -> int | None:
    """Largest sample count allowed before a below-threshold verdict."""
    if theta <= 0:
        return None
    return math.ceil(cap_constant(alpha) * math.log(1 / delta) / theta) + 2


def stopping_time_bound(mu: float, alpha: float, delta: float) -> int:
    """Sample count by which the rule stops with high probability."""
    root = math.sqrt(9 * alpha**2 + 114 * alpha + 192)
    return math.ceil((alpha + 2) / (3 * mu) * math.log(1 / delta) * (root + 3 * alpha + 19)) + 2


@dataclass
class EstimatorState:
    """Running moments of the (optionally complemented) samples.

    ``var`` uses the ``t - 1`` divisor and is 0 before two samples.
    """

    alpha: float = 1.0
    delta: float = 0.05
    theta: float = 0.0
    rho: int = 0
    t: int = 0
    mean: float = 0.0
    m2: float = 0.0
    cap: int | None = field(init=False, default=None)

    def __post_init__(self) -> None:
        if self.alpha < 0 or not (0 < self.delta < 1):
            raise ValueError("need alpha >= 0 and delta in (0, 1)")
        if not (0 <= self.theta <= 1) or self.rho not in (0, 1):
            raise ValueError("need theta in [0, 1] and rho in {0, 1}")
        self.cap = sample_cap(self.theta, self.delta, self.alpha)

    @property
    def var(self) -> float:
        return self.m2 / (self.t - 1) if self.t > 1 else 0.0

    def feed(self, x: float) -> EstimatorState:
        if not (0.0 <= x <= 1.0):
            raise ValueError(f"sample {x!r} outside [0, 1]")
        if self.rho:
            x = 1.0 - x
        self.t += 1
        d = x - self.mean
        self.mean += d / self.t
        self.m2 += d * (x - self.mean)
        return self

    def condition(self) -> bool:
        """Stopping inequality at the current sample count."""
        if self.t < 2:
            return False
        lg = math.log(1 / self.delta)
        width = math.sqrt(2 * self.var * lg / self.t) + 7 / 3 * lg / (self.t - 1)
        return self.mean / (self.alpha + 1) >= width

    def stopped(self) -> Status:
        if self.cap is not None and self.t > self.cap:
            return Status.BELOW
        if self.condition():
            return Status.READY
        return Status.CONTINUE

    def estimate(self) -> float:
        if not self.condition():
            raise RuntimeError("estimate requested before the stopping rule fired")
        return self.alpha / (self.alpha + 1) * self.mean

    def raise_cap(self, theta: float) -> None:
        """Continue with a smaller threshold (a later sample cap)."""
        self.theta = theta
        self.cap = sample_cap(theta, self.delta, self.alpha)


def run_estimator(
    samples: Iterable[float], alpha: float, delta: float, theta: float = 0.0
) -> tuple[Status, EstimatorState]:
    """Feed samples until the rule fires or the stream ends."""
    est = EstimatorState(alpha=alpha, delta=delta, theta=theta)
    status = Status.CONTINUE
    for x in samples:
        est.feed(x)
        status = est.stopped()
        if status is not Status.CONTINUE:
            break
    return status, est


def stopping_times(
    samples: ArrayLike, alpha: float, delta: float, theta: float = 0.0
) -> tuple[NDArray[np.int64], NDArray[np.float64], NDArray[np.int8]]:
    """Vectorised ``run_estimator`` over the rows of a sample matrix.

    Returns, per row, the stopping sample count, the mean at that count and
    a code: 1 ready, -1 below threshold, 0 stream ended first.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n = x.shape[1]
    t = np.arange(1, n + 1, dtype=float)
    s1 = np.cumsum(x, axis=1)
    s2 = np.cumsum(x * x, axis=1)
    mean = s1 / t
    with np.errstate(divide="ignore", invalid="ignore"):
        var = np.where(t > 1, np.maximum(s2 - t * mean * mean, 0.0) / (t - 1), 0.0)
        lg = math.log(1 / delta)
        width = np.sqrt(2 * var * lg / t) + 7 / 3 * lg / (t - 1)
        ready = (t > 1) & (mean / (alpha + 1) >= width)
    cap = sample_cap(theta, delta, alpha)
    if cap is not None and cap < n:
        ready[:, cap:] = False
    first = np.where(ready.any(axis=1), ready.argmax(axis=1), n)
    code = np.where(first < n, 1, 0).astype(np.int8)
    if cap is not None:
        below = (first >= cap) & (cap < n)
        first = np.where(below, cap, first)
        code[below] = -1
    idx = np.minimum(first, n - 1)
    stop_mean = mean[np.arange(x.shape[0]), idx]
    return first + 1, stop_mean, code


@dataclass
class JointResult:
    """Outcome of estimating ``D`` and ``1 - D`` on one stream.

    ``high`` estimates the mean of the samples, ``low`` that of their
    complements; None means the side was only certified to be ``<= theta``.
    """

    high: float | None
    low: float | None
    samples: int
    exhausted: bool = False


class JointCappedEstimator:
    """Two capped estimators on a sample stream and on its complement."""

    def __init__(self, theta: float, delta: float) -> None:
        self.direct = EstimatorState(alpha=1.0, delta=delta, theta=theta, rho=0)
        self.complement = EstimatorState(alpha=1.0, delta=delta, theta=theta, rho=1)

    @property
    def t(self) -> int:
        return self.direct.t

    def feed(self, x: float) -> None:
        self.direct.feed(x)
        self.complement.feed(x)

    def running(self) -> bool:
        if self.direct.cap is not None and self.t > self.direct.cap:
            return False
        return not (self.direct.condition() and self.complement.condition())

    def raise_cap(self, theta: float) -> None:
        self.direct.raise_cap(theta)
        self.complement.raise_cap(theta)

    def result(self, exhausted: bool = False) -> JointResult:
        return JointResult(
            high=self.direct.estimate() if self.direct.condition() else None,
            low=self.complement.estimate() if self.complement.condition() else None,
            samples=self.t,
            exhausted=exhausted,
        )


def joint_capped(samples: Iterable[float], theta: float, delta: float) -> JointResult:
    """Run both sides on ``samples`` until each is settled or the cap passes."""
    est = JointCappedEstimator(theta, delta)
    for x in samples:
        est.feed(x)
        if not est.running():
            return est.result()
    return est.result(exhausted=True)
