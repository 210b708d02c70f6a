"""Scenario engine: replication grids, summaries, and diagnostic reports.

Each scenario is a full survey-simulation configuration; a grid runs every
scenario for a number of replications and writes one per-replication CSV,
one summary CSV, and a JSON run manifest.  Replication substreams are
derived from (seed, scenario index, replication index), so output is
identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .estimator import (
    EstimatorInputs,
    analytic_bias,
    effective_mdri_closed,
    kassanjee_estimate,
    log_variance,
    survey_composition,
)
from .population import (
    DEFAULT_PARAMS,
    InfeasibleScenarioError,
    PopulationParams,
    ScreeningPolicy,
    assemble_survey_rows,
)
from .recency_model import DEFAULT_ASSAY, LONG_ASSAY, RecencyAssay, mdri, phi
from .screening_analytics import forecast
from .testing_history import (
    ExponentialInterTest,
    ObservationRule,
    TestingProcess,
    UniformInterTest,
)

TRUE_INCIDENCE = DEFAULT_PARAMS.incidence

THETA_GRID = (0.4, 1.0, 1.5, 2.0)
R_GRID = (0.0, 0.3, 0.6, 1.0)
C_GRID = (0.0, 0.25, 1.0, 1.5, 2.0)
FRR_GRID = (0.0, 0.005, 0.01, 0.02)

REPLICATION_COLUMNS = [
    "scenario",
    "replication",
    "n_total",
    "n_pos",
    "n_neg",
    "n_rec",
    "n_screened",
    "estimate",
    "status",
]

SUMMARY_COLUMNS = [
    "scenario",
    "rule",
    "law",
    "theta",
    "a",
    "b",
    "r",
    "c",
    "frr",
    "replications",
    "n_target",
    "median",
    "mean",
    "q025",
    "q975",
    "var_log",
    "n_negative",
    "n_undefined",
    "mean_screened",
    "analytic_bias",
    "analytic_variance",
    "status",
]


@dataclass(frozen=True)
class Scenario:
    label: str
    assay: RecencyAssay
    process: TestingProcess
    policy: ScreeningPolicy
    params: PopulationParams
    n_target: int
    replications: int
    seed: int
    index: int = 0
    mdri_noise_sd: float = 0.0  # optional gaussian perturbation of the MDRI input


@dataclass
class ScenarioResult:
    scenario: Scenario
    estimates: List[float] = field(default_factory=list)
    statuses: List[str] = field(default_factory=list)
    count_rows: List[tuple] = field(default_factory=list)
    error: Optional[str] = None

    def summary(self) -> dict:
        est = np.array(self.estimates, dtype=float)
        ok = np.isfinite(est)
        valid = est[ok]
        positive = valid[valid > 0]
        s = {
            "median": float(np.median(valid)) if valid.size else math.nan,
            "mean": float(np.mean(valid)) if valid.size else math.nan,
            "q025": float(np.percentile(valid, 2.5)) if valid.size else math.nan,
            "q975": float(np.percentile(valid, 97.5)) if valid.size else math.nan,
            "var_log": float(np.var(np.log(positive), ddof=1))
            if positive.size > 1
            else math.nan,
            "n_negative": int(np.sum(valid < 0)),
            "n_undefined": int(np.sum(~ok)),
            "mean_screened": float(np.mean([r[4] for r in self.count_rows]))
            if self.count_rows
            else math.nan,
        }
        return s


def _law_fields(process: TestingProcess):
    law = process.inter_test_law
    if isinstance(law, ExponentialInterTest):
        return "exponential", law.theta, "", ""
    return "uniform", "", law.a, law.b


def _analytic_columns(scenario: Scenario):
    """Closed-form bias and log-variance where available (exponential, frr=0)."""
    law = scenario.process.inter_test_law
    if not isinstance(law, ExponentialInterTest) or scenario.assay.frr != 0.0:
        return "", ""
    r = scenario.policy.attendance_ratio
    c = scenario.policy.exclusion_window
    bias = analytic_bias(
        scenario.assay, law.theta, r, c, scenario.process.observation_rule,
        scenario.params,
    )
    p_star, p_r = survey_composition(
        scenario.assay, scenario.process, r, c, scenario.params
    )
    var = log_variance(scenario.n_target, p_star, p_r)
    return f"{bias:.10g}", f"{var:.10g}"


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def replication_rng(seed: int, label: str, replication: int):
    """Replication substream keyed by (seed, scenario label, replication).

    Keying on the label (not the grid position) makes a scenario's stream
    independent of which grid it appears in, so e.g. an frr=0 sensitivity
    scenario reproduces its main-grid counterpart exactly.
    """
    return np.random.default_rng(
        np.random.SeedSequence([seed, _label_key(label), replication])
    )


def run_replication(scenario: Scenario, replication: int):
    """One survey replication: counts, estimate, and a status flag."""
    rng = replication_rng(scenario.seed, scenario.label, replication)
    rows = assemble_survey_rows(
        scenario.params,
        scenario.process,
        scenario.policy,
        scenario.assay,
        scenario.n_target,
        rng,
    )
    counts = rows.counts()
    mdri_hat = mdri(scenario.assay)
    if scenario.mdri_noise_sd > 0:
        mdri_hat += rng.normal(0.0, scenario.mdri_noise_sd)
    frr_hat = scenario.assay.frr
    try:
        inp = EstimatorInputs(
            counts=counts,
            mdri_hat=mdri_hat,
            frr_hat=frr_hat,
            recency_cutoff=scenario.assay.recency_cutoff,
        )
        estimate = kassanjee_estimate(inp)
        status = "negative" if estimate < 0 else "ok"
    except ValueError:
        estimate, status = math.nan, "undefined"
    return counts, estimate, status


def run_scenario(scenario: Scenario) -> ScenarioResult:
    result = ScenarioResult(scenario=scenario)
    try:
        for rep in range(scenario.replications):
            counts, estimate, status = run_replication(scenario, rep)
            result.estimates.append(estimate)
            result.statuses.append(status)
            result.count_rows.append(
                (counts.n_total, counts.n_pos, counts.n_neg, counts.n_rec,
                 counts.n_screened)
            )
    except InfeasibleScenarioError as exc:
        result.error = str(exc)
    return result


def run_grid(scenarios: Sequence[Scenario], workers: int = 1) -> List[ScenarioResult]:
    """Run every scenario; results come back in scenario order."""
    if workers <= 1:
        return [run_scenario(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_scenario, scenarios, chunksize=1))


# ---------------------------------------------------------------------------
# grid construction


def _scenario_label(rule, law, r, c, frr, assay_name):
    if isinstance(law, ExponentialInterTest):
        lawtxt = f"theta{law.theta:g}"
    else:
        lawtxt = f"uni{law.a:g}-{law.b:g}"
    txt = f"{rule.value}_{lawtxt}_r{r:g}_c{c:g}"
    if frr:
        txt += f"_frr{frr:g}"
    if assay_name != "default":
        txt += f"_{assay_name}"
    return txt


def build_grid(
    seed: int,
    replications: int,
    n_target: int = 5000,
    rules: Sequence[ObservationRule] = (
        ObservationRule.REGULAR,
        ObservationRule.STOP_WHEN_POSITIVE,
    ),
    thetas: Sequence[float] = THETA_GRID,
    rs: Sequence[float] = R_GRID,
    cs: Sequence[float] = C_GRID,
    frrs: Sequence[float] = (0.0,),
    uniform_bs: Sequence[float] = (),
    assay_name: str = "default",
    params: PopulationParams = DEFAULT_PARAMS,
) -> List[Scenario]:
    base = DEFAULT_ASSAY if assay_name == "default" else LONG_ASSAY
    laws: List = [ExponentialInterTest(t) for t in thetas]
    if uniform_bs:
        laws = [UniformInterTest(0.0, b) for b in uniform_bs]
    scenarios = []
    idx = 0
    for rule in rules:
        for law in laws:
            for frr in frrs:
                assay = RecencyAssay(
                    base.gamma_shape, base.gamma_rate, base.recency_cutoff, frr
                )
                for r in rs:
                    for c in cs:
                        scenarios.append(
                            Scenario(
                                label=_scenario_label(rule, law, r, c, frr, assay_name),
                                assay=assay,
                                process=TestingProcess(law, rule),
                                policy=ScreeningPolicy(
                                    q0=1.0, q1=r, exclusion_window=c
                                ),
                                params=params,
                                n_target=n_target,
                                replications=replications,
                                seed=seed,
                                index=idx,
                            )
                        )
                        idx += 1
    return scenarios


def build_sensitivity(suite: str, seed: int, replications: int, n_target: int = 5000):
    if suite == "frr":
        return build_grid(
            seed, replications, n_target,
            thetas=(0.4, 1.0), cs=(0.0, 2.0), frrs=FRR_GRID,
        )
    if suite == "uniform_intertest":
        return build_grid(seed, replications, n_target, uniform_bs=(3.0, 4.0))
    if suite == "long_mdri":
        return build_grid(seed, replications, n_target, assay_name="long")
    raise ValueError(f"unknown sensitivity suite: {suite}")


# ---------------------------------------------------------------------------
# output writers


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    return str(x)


def write_results(
    results: Sequence[ScenarioResult], out_dir: Path, config_echo: dict, seed: int,
    wall_time: float,
) -> bool:
    """Write per-replication CSV, summary CSV, and the JSON manifest.

    Returns True when every scenario completed without error.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = True

    with open(out_dir / "replications.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPLICATION_COLUMNS)
        for res in results:
            for rep, (counts, est, status) in enumerate(
                zip(res.count_rows, res.estimates, res.statuses)
            ):
                w.writerow(
                    [res.scenario.label, rep, *counts, _fmt(est), status]
                )

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for res in results:
            sc = res.scenario
            law, theta, a, b = _law_fields(sc.process)
            if res.error is not None:
                ok = False
                row = [sc.label, sc.process.observation_rule.value, law, theta, a, b,
                       sc.policy.attendance_ratio, sc.policy.exclusion_window,
                       sc.assay.frr, sc.replications, sc.n_target,
                       "", "", "", "", "", "", "", "", "", "", f"error:{res.error}"]
            else:
                s = res.summary()
                ab, av = _analytic_columns(sc)
                row = [
                    sc.label, sc.process.observation_rule.value, law, theta, a, b,
                    _fmt(sc.policy.attendance_ratio),
                    _fmt(sc.policy.exclusion_window),
                    _fmt(sc.assay.frr), sc.replications, sc.n_target,
                    _fmt(s["median"]), _fmt(s["mean"]), _fmt(s["q025"]),
                    _fmt(s["q975"]), _fmt(s["var_log"]), s["n_negative"],
                    s["n_undefined"], _fmt(s["mean_screened"]), ab, av, "ok",
                ]
            w.writerow(row)

    manifest = {
        "config": config_echo,
        "seed": seed,
        "version": __version__,
        "scenarios": len(results),
        "errors": [r.scenario.label for r in results if r.error is not None],
        "wall_time_s": round(wall_time, 3),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ok


# ---------------------------------------------------------------------------
# diagnostic histogram


def emit_histogram(
    rule: ObservationRule,
    law,
    c: float,
    n_infected: int = 50_000,
    bin_width: float = 0.25,
    seed: int = 0,
    params: PopulationParams = DEFAULT_PARAMS,
):
    """Composition of the infected population by duration bin.

    Returns a list of rows (bin_lo, bin_hi, aware_included, aware_excluded,
    unaware_included, unaware_excluded), where inclusion means the most
    recent test falls outside the exclusion window c.  Attendance plays no
    role here (q0 = q1 = 1).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 777]))
    process = TestingProcess(law, rule)
    from .testing_history import observe_most_recent_many, sample_residual

    u = rng.uniform(0.0, params.max_duration, size=n_infected)
    residual = sample_residual(process, rng, size=n_infected)
    t = observe_most_recent_many(
        residual, u, np.ones(n_infected, dtype=bool), process, rng
    )
    aware = u >= t
    included = t > c
    n_bins = math.ceil(params.max_duration / bin_width)
    edges = np.arange(0, n_bins + 1) * bin_width
    rows = []
    idx = np.minimum((u / bin_width).astype(int), n_bins - 1)
    for k in range(n_bins):
        m = idx == k
        rows.append(
            (
                float(edges[k]),
                float(edges[k + 1]),
                int(np.sum(m & aware & included)),
                int(np.sum(m & aware & ~included)),
                int(np.sum(m & ~aware & included)),
                int(np.sum(m & ~aware & ~included)),
            )
        )
    return rows


def write_histogram(rows, out_path: Path):
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["bin_lo", "bin_hi", "aware_included", "aware_excluded",
             "unaware_included", "unaware_excluded"]
        )
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# analytic table report

TABLE1_C = ((0.0, "no exclusion"), (0.25, "3 months"), (2.0, "2 years"))
TABLE1_THETA = (1.0, 2.0)
TABLE1_R = (0.0, 0.6, 1.0)
TABLE_GRID_STEP = 0.001


def _table_grid_bias(assay, theta, r, c, params):
    """Bias with integrals on a left-endpoint grid of 0.001 years.

    This is the reporting convention for the analytic table; analytic_bias
    gives the continuum quadrature value.
    """
    tstar = assay.recency_cutoff
    u = np.arange(0.0, tstar, TABLE_GRID_STEP)
    p = phi(u, assay)
    omega = p.sum() * TABLE_GRID_STEP
    m = u >= c
    k = (p[m] * (1.0 - np.exp(theta * (c - u[m])))).sum() * TABLE_GRID_STEP
    if c >= tstar:
        k = 0.0
    omega_eff = omega - (1.0 - r * math.exp(theta * c)) * k
    return params.incidence * (omega_eff / omega - 1.0)


def emit_table1(
    n_target: int = 5000,
    params: PopulationParams = DEFAULT_PARAMS,
    assay: RecencyAssay = DEFAULT_ASSAY,
):
    """Analytic bias and screening-burden report under Stop-When-Positive.

    One row per (exclusion period, testing frequency, attendance ratio).
    Bias is reported both at the table grid convention and from exact
    quadrature; screening burden comes from the closed inclusion
    probability.
    """
    rows = []
    for c, clabel in TABLE1_C:
        for theta in TABLE1_THETA:
            for r in TABLE1_R:
                bias_grid = _table_grid_bias(assay, theta, r, c, params)
                bias_exact = analytic_bias(
                    assay, theta, r, c, ObservationRule.STOP_WHEN_POSITIVE, params
                )
                fc = forecast(
                    ObservationRule.STOP_WHEN_POSITIVE, params, theta, r, c, n_target
                )
                unbiased = c >= assay.recency_cutoff or (r == 1.0 and c == 0.0)
                rows.append(
                    {
                        "exclusion_period": clabel,
                        "c": c,
                        "theta": theta,
                        "r": r,
                        "bias_x1e3": bias_grid * 1e3,
                        "bias_exact_x1e3": bias_exact * 1e3,
                        "unbiased": unbiased,
                        "inclusion_probability": fc.inclusion_probability,
                        "required_screened": fc.required_screened,
                    }
                )
    return rows


def write_table1(rows, out_path: Path):
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = list(rows[0].keys())
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])


def default_out_dir() -> Path:
    return Path(os.environ.get("RECENCYSIM_OUT_DIR", "results"))
