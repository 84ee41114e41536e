"""Marginal structural models with partially observed time-varying confounders.

Thin python surface over the C++ core: panel generation, the five
missing-data strategies around IPTW-weighted MSMs, and the Monte-Carlo
replication harness.
"""

from ._core import (
    EffectEstimates,
    Measures,
    MsmError,
    PanelDataset,
    PerformanceReport,
    ScenarioConfig,
    WeightDiagnostics,
    WeightVector,
    analyze,
    apply_missingness,
    balance_diagnostics,
    bootstrap_ci,
    calibrate_scenario,
    fit_msm,
    generate_full,
    load_csv,
    loads_csv,
    locf_impute,
    make_scenario,
    performance_measures,
    rubin_pool,
    run_scenario,
    save_csv,
    treatment_weights,
    true_effects,
    __version__,
)

__all__ = [
    "EffectEstimates",
    "Measures",
    "MsmError",
    "PanelDataset",
    "PerformanceReport",
    "ScenarioConfig",
    "WeightDiagnostics",
    "WeightVector",
    "analyze",
    "apply_missingness",
    "balance_diagnostics",
    "bootstrap_ci",
    "calibrate_scenario",
    "fit_msm",
    "generate_full",
    "load_csv",
    "loads_csv",
    "locf_impute",
    "make_scenario",
    "performance_measures",
    "rubin_pool",
    "run_scenario",
    "save_csv",
    "treatment_weights",
    "true_effects",
    "__version__",
]
