"""Experiment harness: pipeline stages, experiments, reports."""
from .experiments import (
    CSV_NAMES,
    bimodal_dataset,
    exp_anc,
    exp_distribution_match,
    exp_gansd_modes,
    exp_generalization,
    exp_r2p_fidelity,
    exp_r2p_over_time,
    exp_rl_vs_sl,
    feature_proportions,
    r2p_fidelity_table,
)
from .pipeline import (
    LearnedEnvironment,
    eval_seed,
    fit_environment,
    log_data,
    oracle_metrics,
    train_in,
    virtual_r2p,
    world_params,
)
from .report import CheckResult, ExperimentReport, aggregate_reports, load_report, summarize, write_report
from .suite import EXPERIMENT_NAMES, SuiteInputs, run_suite

__all__ = [
    "CSV_NAMES",
    "CheckResult",
    "EXPERIMENT_NAMES",
    "ExperimentReport",
    "LearnedEnvironment",
    "SuiteInputs",
    "aggregate_reports",
    "bimodal_dataset",
    "eval_seed",
    "exp_anc",
    "exp_distribution_match",
    "exp_gansd_modes",
    "exp_generalization",
    "exp_r2p_fidelity",
    "exp_r2p_over_time",
    "exp_rl_vs_sl",
    "feature_proportions",
    "fit_environment",
    "load_report",
    "log_data",
    "oracle_metrics",
    "r2p_fidelity_table",
    "run_suite",
    "summarize",
    "train_in",
    "virtual_r2p",
    "world_params",
]
