"""Synthetic ground-truth marketplace standing in for the live platform."""
from .drift import DriftSchedule, drift
from .market import (
    OracleCustomerPolicy,
    OracleSampler,
    PriceModel,
    action_norm_report,
    evaluate_in_oracle,
    generate_log,
    logging_policy,
    oracle_customer_policy,
    oracle_sample_customer,
)
from .params import OracleParams, default_params, load_params, population_with, save_params

__all__ = [
    "DriftSchedule",
    "OracleCustomerPolicy",
    "OracleParams",
    "OracleSampler",
    "PriceModel",
    "action_norm_report",
    "default_params",
    "drift",
    "evaluate_in_oracle",
    "generate_log",
    "load_params",
    "logging_policy",
    "oracle_customer_policy",
    "oracle_sample_customer",
    "population_with",
    "save_params",
]
