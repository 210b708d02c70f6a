"""Sampling of the time since the most recent HIV test.

The test schedule is a stationary renewal process; the time since the last
test at the survey instant is drawn from the limiting residual-life law.
Two observation rules are supported: Regular (all tests observed) and
Stop-When-Positive (testing stops at the first post-infection test).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


class ObservationRule(enum.Enum):
    REGULAR = "regular"
    STOP_WHEN_POSITIVE = "swp"


@dataclass(frozen=True)
class ExponentialInterTest:
    """Exponential inter-test times with rate theta (tests/year)."""

    theta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")

    @property
    def mean(self) -> float:
        return 1.0 / self.theta


@dataclass(frozen=True)
class UniformInterTest:
    """Uniform[a, b] inter-test times (years)."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b <= self.a:
            raise ValueError("need 0 <= a < b")

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b)


InterTestLaw = Union[ExponentialInterTest, UniformInterTest]


@dataclass(frozen=True)
class TestingProcess:
    inter_test_law: InterTestLaw
    observation_rule: ObservationRule = ObservationRule.REGULAR


def residual_cdf(x, law: InterTestLaw):
    """CDF of the stationary residual life: (1/mu) * int_0^x (1-F(y)) dy."""
    x_arr = np.asarray(x, dtype=float)
    if isinstance(law, ExponentialInterTest):
        out = 1.0 - np.exp(-law.theta * np.clip(x_arr, 0.0, None))
    else:
        a, b = law.a, law.b
        xc = np.clip(x_arr, 0.0, None)
        out = np.where(
            xc < a,
            2.0 * xc / (a + b),
            np.where(xc <= b, (-xc * xc + 2.0 * b * xc - a * a) / (b * b - a * a), 1.0),
        )
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(out)
    return out


def _residual_from_uniform01(e, law: UniformInterTest):
    """Inverse-transform the residual-life CDF of a Uniform[a, b] renewal law."""
    a, b = law.a, law.b
    e = np.asarray(e, dtype=float)
    knee = 2.0 * a / (a + b)
    low = 0.5 * (a + b) * e
    high = b - np.sqrt(np.clip((b * b - a * a) * (1.0 - e), 0.0, None))
    return np.where(e < knee, low, high)


def sample_residual(
    process: TestingProcess, rng: np.random.Generator, size: Optional[int] = None
):
    """Draw the time since the most recent test from the stationary law.

    With `size=None` returns a float; otherwise an array of that length.
    The observation rule is irrelevant here: this is the Regular-rule time,
    which is also the starting point of the Stop-When-Positive correction.
    """
    law = process.inter_test_law
    if isinstance(law, ExponentialInterTest):
        out = rng.exponential(1.0 / law.theta, size=size)
    else:
        out = _residual_from_uniform01(rng.uniform(size=size), law)
    if size is None:
        return float(out)
    return out


def _draw_gaps(law: InterTestLaw, rng: np.random.Generator, size: int):
    if isinstance(law, ExponentialInterTest):
        return rng.exponential(1.0 / law.theta, size=size)
    return rng.uniform(law.a, law.b, size=size)


def observe_most_recent(
    residual_id: float,
    u: Optional[float],
    process: TestingProcess,
    rng: np.random.Generator,
) -> float:
    """Time since the most recent *observed* test for one individual.

    residual_id is the Regular-rule time since last test; u is the infection
    duration (None for HIV-negative individuals).  Under the Regular rule,
    or whenever the last scheduled test predates infection, the value is
    returned unchanged.  Under Stop-When-Positive with residual_id < u, the
    schedule is extended backwards in survey time (gap by gap) and the last
    test time not exceeding u is returned: that test is the first one after
    infection in calendar order, so testing stopped there.
    """
    if residual_id < 0:
        raise ValueError("residual_id must be nonnegative")
    if process.observation_rule is ObservationRule.REGULAR or u is None:
        return residual_id
    if u < 0:
        raise ValueError("infection duration must be nonnegative")
    t = residual_id
    if t >= u:
        return t
    while True:
        gap = float(_draw_gaps(process.inter_test_law, rng, 1)[0])
        if t + gap > u:
            return t
        t += gap


def observe_most_recent_many(
    residual_id: np.ndarray,
    u: np.ndarray,
    infected: np.ndarray,
    process: TestingProcess,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized observe_most_recent over a batch.

    `u` is only read where `infected` is True.  Gap draws are consumed in
    rounds over the still-active individuals, so the result is deterministic
    for a given generator state.
    """
    t = np.array(residual_id, dtype=float, copy=True)
    if process.observation_rule is ObservationRule.REGULAR:
        return t
    active = np.flatnonzero(infected & (t < np.where(infected, u, -np.inf)))
    while active.size:
        gaps = _draw_gaps(process.inter_test_law, rng, active.size)
        done = t[active] + gaps > u[active]
        keep = ~done
        t[active[keep]] += gaps[keep]
        active = active[keep]
    return t


def swp_conditional_density(t, u: float, theta: float):
    """Density of the Stop-When-Positive most-recent-test time given U = u.

    Piecewise exponential: theta*exp(-theta*(u-t)) for t <= u (the first
    post-infection test) and theta*exp(-theta*t) for t > u (the last test
    predates infection).  Exponential inter-test law only.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if u < 0:
        raise ValueError("u must be nonnegative")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    out = np.where(
        t_arr <= u,
        theta * np.exp(-theta * (u - t_arr)),
        theta * np.exp(-theta * t_arr),
    )
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def swp_conditional_survival(c: float, u: float, theta: float) -> float:
    """P(T > c | U = u) under Stop-When-Positive with exponential gaps."""
    if c <= 0:
        return 1.0
    if u <= c:
        return math.exp(-theta * c)
    return 1.0 - math.exp(-theta * (u - c)) + math.exp(-theta * u)
