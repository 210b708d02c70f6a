"""Desk-scale simulation toolkit for cross-sectional HIV incidence estimation
under testing-based exclusion criteria and selective screening attendance."""

__version__ = "0.1.0"

from .recency_model import DEFAULT_ASSAY, LONG_ASSAY, RecencyAssay, mdri, phi
from .testing_history import (
    ExponentialInterTest,
    ObservationRule,
    TestingProcess,
    UniformInterTest,
    sample_residual,
    swp_conditional_density,
)
from .population import (
    DEFAULT_PARAMS,
    PopulationParams,
    ScreeningPolicy,
    SurveyCounts,
    assemble_survey,
)
from .estimator import (
    EstimatorInputs,
    EffectiveMdriQuery,
    analytic_bias,
    effective_mdri_closed,
    effective_mdri_numeric,
    kassanjee_estimate,
    log_variance,
    survey_composition,
)
from .screening_analytics import (
    ScreeningForecast,
    forecast,
    inclusion_probability,
    required_screening,
)

__all__ = [
    "DEFAULT_ASSAY",
    "LONG_ASSAY",
    "RecencyAssay",
    "mdri",
    "phi",
    "ExponentialInterTest",
    "UniformInterTest",
    "ObservationRule",
    "TestingProcess",
    "sample_residual",
    "swp_conditional_density",
    "DEFAULT_PARAMS",
    "PopulationParams",
    "ScreeningPolicy",
    "SurveyCounts",
    "assemble_survey",
    "EstimatorInputs",
    "EffectiveMdriQuery",
    "analytic_bias",
    "effective_mdri_closed",
    "effective_mdri_numeric",
    "kassanjee_estimate",
    "log_variance",
    "survey_composition",
    "ScreeningForecast",
    "forecast",
    "inclusion_probability",
    "required_screening",
]
