"""Cross-sectional incidence estimator, its log-variance, and effective MDRI.

The effective MDRI re-weights the test-recent curve by the probability that
an infected individual of a given duration survives both selective
attendance and the testing-based exclusion; its ratio to the plain MDRI
gives the asymptotic multiplicative bias of the incidence estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .population import PopulationParams, SurveyCounts
from .quadrature import adaptive_simpson, adaptive_simpson_sqrt0
from .recency_model import RecencyAssay, mdri, phi
from .testing_history import (
    ExponentialInterTest,
    ObservationRule,
    TestingProcess,
    UniformInterTest,
    observe_most_recent_many,
    residual_cdf,
    sample_residual,
)

QUAD_TOL = 1e-10


class UndefinedEstimateError(ValueError):
    """The estimator denominator is zero or negative."""


@dataclass(frozen=True)
class EstimatorInputs:
    counts: SurveyCounts
    mdri_hat: float
    frr_hat: float
    recency_cutoff: float

    def __post_init__(self):
        if self.mdri_hat <= self.frr_hat * self.recency_cutoff:
            raise UndefinedEstimateError(
                "mdri_hat must exceed frr_hat * recency_cutoff"
            )


def kassanjee_estimate(inp: EstimatorInputs) -> float:
    """Incidence estimate from survey counts and external assay estimates.

    (n_rec - n_pos*frr_hat) / (n_neg * (mdri_hat - frr_hat*T*)).  Negative
    values (possible when frr_hat > 0) are returned as-is.
    """
    c = inp.counts
    denom = c.n_neg * (inp.mdri_hat - inp.frr_hat * inp.recency_cutoff)
    if denom <= 0:
        raise UndefinedEstimateError("estimator denominator is not positive")
    return (c.n_rec - c.n_pos * inp.frr_hat) / denom


def log_variance(n_total: int, p_star: float, p_r: float) -> float:
    """Asymptotic variance of the log incidence estimate.

    p_star is the survey prevalence and p_r the probability a surveyed
    positive is classified recent.
    """
    if not 0.0 < p_star < 1.0:
        raise ValueError("p_star must lie strictly in (0, 1)")
    if not 0.0 < p_r <= 1.0:
        raise ValueError("p_r must lie in (0, 1]")
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    return (1.0 / n_total) * (1.0 / (p_r * p_star) + 1.0 / (1.0 - p_star))


@dataclass(frozen=True)
class EffectiveMdriQuery:
    assay: RecencyAssay
    process: TestingProcess
    r: float
    c: float
    params: PopulationParams

    def __post_init__(self):
        if self.assay.frr != 0.0:
            raise ValueError("effective MDRI is defined for zero-FRR assays only")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("r must lie in [0, 1]")
        if self.c < 0:
            raise ValueError("c must be nonnegative")


def _exp_conditionals(rule: ObservationRule, theta: float, u: float, c: float):
    """(P(T<=u, T>c | U=u), P(T>u, T>c | U=u)) for exponential schedules."""
    if rule is ObservationRule.REGULAR:
        # T independent of U, T ~ Exponential(theta)
        below = max(0.0, math.exp(-theta * c) - math.exp(-theta * u)) if u > c else 0.0
        above = math.exp(-theta * max(u, c))
    else:
        # piecewise density: theta*e^{-theta(u-t)} on t<=u, theta*e^{-theta t} beyond
        below = 1.0 - math.exp(-theta * (u - c)) if u > c else 0.0
        above = math.exp(-theta * max(u, c))
    return below, above


def _uniform_regular_conditionals(law: UniformInterTest, u: float, c: float):
    Fu = residual_cdf(u, law)
    Fc = residual_cdf(c, law)
    below = max(0.0, Fu - Fc) if u > c else 0.0
    above = 1.0 - residual_cdf(max(u, c), law)
    return below, above


def _uniform_swp_conditionals(
    law: UniformInterTest, u: float, c: float, draws: int, rng: np.random.Generator
):
    process = TestingProcess(law, ObservationRule.STOP_WHEN_POSITIVE)
    residual = sample_residual(process, rng, size=draws)
    uu = np.full(draws, u)
    t = observe_most_recent_many(
        residual, uu, np.ones(draws, dtype=bool), process, rng
    )
    below = float(np.mean((t <= u) & (t > c)))
    above = float(np.mean((t > u) & (t > c)))
    return below, above


def effective_mdri_numeric(
    q: EffectiveMdriQuery,
    tol: float = 1e-9,
    mc_draws: int = 100_000,
    seed: int = 20240901,
) -> float:
    """Effective MDRI by direct quadrature of its defining integral.

    Exponential schedules use the closed piecewise conditional laws inside
    an adaptive quadrature.  Uniform schedules under Stop-When-Positive have
    no closed conditional law; those conditionals are estimated per node by
    Monte Carlo (mc_draws each), so the result carries a stochastic error of
    order 1/sqrt(mc_draws) and is evaluated on a fixed Simpson grid.
    """
    assay, law, rule = q.assay, q.process.inter_test_law, q.process.observation_rule
    tstar, c, r = assay.recency_cutoff, q.c, q.r

    if isinstance(law, ExponentialInterTest):
        denom = math.exp(-law.theta * c)

        def integrand(u):
            below, above = _exp_conditionals(rule, law.theta, u, c)
            return phi(u, assay) * (r * below + above)

        # split at the kink u = c; sqrt substitution at the origin where
        # the assay curve's derivative is singular
        if 0.0 < c < tstar:
            total = adaptive_simpson_sqrt0(integrand, 0.0, c, tol=tol)
            total += adaptive_simpson(integrand, c, tstar, tol=tol)
        else:
            total = adaptive_simpson_sqrt0(integrand, 0.0, tstar, tol=tol)
        return total / denom

    denom = 1.0 - residual_cdf(c, law)
    if denom <= 0:
        raise ValueError("exclusion window covers the entire residual support")

    if rule is ObservationRule.REGULAR:

        def integrand(u):
            below, above = _uniform_regular_conditionals(law, u, c)
            return phi(u, assay) * (r * below + above)

        if 0.0 < c < tstar:
            total = adaptive_simpson_sqrt0(integrand, 0.0, c, tol=tol)
            total += adaptive_simpson(integrand, c, tstar, tol=tol)
        else:
            total = adaptive_simpson_sqrt0(integrand, 0.0, tstar, tol=tol)
        return total / denom

    # SWP + uniform law: composite Simpson with per-node Monte Carlo
    rng = np.random.default_rng(seed)
    n_nodes = 201  # even number of panels over [0, T*]
    grid = np.linspace(0.0, tstar, n_nodes)
    vals = np.empty(n_nodes)
    for i, u in enumerate(grid):
        below, above = _uniform_swp_conditionals(law, float(u), c, mc_draws, rng)
        vals[i] = phi(float(u), assay) * (r * below + above)
    h = grid[1] - grid[0]
    weights = np.ones(n_nodes)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(np.sum(weights * vals) * h / 3.0 / denom)


def _k_integral(assay: RecencyAssay, theta: float, c: float, tol: float = QUAD_TOL):
    """K(c) = int_c^{T*} phi(u) * (1 - e^{theta*(c-u)}) du, zero for c >= T*."""
    tstar = assay.recency_cutoff
    if c >= tstar:
        return 0.0
    f = lambda u: phi(u, assay) * (1.0 - math.exp(theta * (c - u)))
    if c == 0.0:
        return adaptive_simpson_sqrt0(f, 0.0, tstar, tol=tol)
    return adaptive_simpson(f, c, tstar, tol=tol)


def effective_mdri_closed(
    assay: RecencyAssay,
    theta: float,
    r: float,
    c: float,
    rule: ObservationRule,
) -> float:
    """Closed-form effective MDRI for exponential (Poisson) test schedules.

    Regular rule:       MDRI - (1 - r) * K(c)
    Stop-When-Positive: MDRI - (1 - r*e^{theta*c}) * K(c)
    with K(c) the weighted tail integral of the test-recent curve.
    """
    if assay.frr != 0.0:
        raise ValueError("effective MDRI is defined for zero-FRR assays only")
    omega = mdri(assay)
    k = _k_integral(assay, theta, c)
    if rule is ObservationRule.REGULAR:
        return omega - (1.0 - r) * k
    return omega - (1.0 - r * math.exp(theta * c)) * k


def analytic_bias(
    assay: RecencyAssay,
    theta: float,
    r: float,
    c: float,
    rule: ObservationRule,
    params: PopulationParams,
) -> float:
    """Asymptotic bias of the incidence estimate when the plain MDRI is used.

    Equals incidence * (effective MDRI / MDRI - 1); exactly zero once the
    exclusion window reaches the recency cutoff.
    """
    omega = mdri(assay)
    omega_eff = effective_mdri_closed(assay, theta, r, c, rule)
    return params.incidence * (omega_eff / omega - 1.0)


def survey_composition(
    assay: RecencyAssay,
    process: TestingProcess,
    r: float,
    c: float,
    params: PopulationParams,
    tol: float = 1e-9,
) -> Tuple[float, float]:
    """Analytic (p_star, p_r) of the assembled survey population.

    p_star is the survey prevalence and p_r the probability that a surveyed
    positive tests recent (zero-FRR assay).  Exponential schedules only;
    q0 = 1 is assumed so the attendance ratio r applies to aware positives.
    """
    law = process.inter_test_law
    if not isinstance(law, ExponentialInterTest):
        raise ValueError("closed survey composition requires exponential schedules")
    theta = law.theta
    rule = process.observation_rule
    lam, p = params.incidence, params.prevalence
    tstar_pop = params.horizon

    def weight(u):
        below, above = _exp_conditionals(rule, theta, u, c)
        return r * below + above

    pieces = sorted({0.0, min(c, tstar_pop), tstar_pop})
    w_total = sum(
        adaptive_simpson(weight, lo, hi, tol=tol)
        for lo, hi in zip(pieces[:-1], pieces[1:])
    )
    cut = assay.recency_cutoff
    pieces_r = sorted({0.0, min(c, cut), cut})
    recent_integrand = lambda u: phi(u, assay) * weight(u)
    w_recent = 0.0
    for lo, hi in zip(pieces_r[:-1], pieces_r[1:]):
        if lo == 0.0:
            w_recent += adaptive_simpson_sqrt0(recent_integrand, lo, hi, tol=tol)
        else:
            w_recent += adaptive_simpson(recent_integrand, lo, hi, tol=tol)
    pos_mass = lam * (1.0 - p) * w_total
    neg_mass = (1.0 - p) * math.exp(-theta * c)
    p_star = pos_mass / (pos_mass + neg_mass)
    p_r = w_recent / w_total
    return p_star, p_r
