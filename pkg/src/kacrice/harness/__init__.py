"""Scenario catalog and Monte Carlo studies."""

from .scenarios import (
    CATALOG,
    GROUP_DESK,
    LASSO_DESK,
    MC_DESK,
    NUCLEAR_DESK,
    PCA_DESK,
    Scenario,
    get_scenario,
    scenario_catalog,
)
from .studies import (
    StudyResult,
    binomial_se,
    coverage_experiment,
    cov_test_baseline,
    ecdf_table,
    fit_problem,
    ks_uniform,
    pooled,
    replicate_streams,
    sample_pvalues,
)
