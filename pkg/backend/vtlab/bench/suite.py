"""Runs the experiment suite against the artifacts of one run and writes its reports."""
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import pandas as pd

from ..config import RunConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import RejectedInputError
from ..gansd.model import GansdModel, GansdSampler
from ..market.dataset import Dataset
from ..market.domain import CustomerPolicy
from ..mail.train import build_virtual_env
from ..oracle.params import OracleParams
from . import experiments as exp
from .pipeline import LearnedEnvironment
from .report import ExperimentReport, write_report

logger = get_logger(__name__, LogCategory.BENCH)

EXPERIMENT_NAMES = (
    "distribution_match",
    "r2p_fidelity",
    "r2p_over_time",
    "anc",
    "generalization",
    "rl_vs_sl",
    "gansd_modes",
)
SUMMARY_CSV = "summary.csv"


@dataclass
class SuiteInputs:
    cfg: RunConfig
    params: OracleParams
    dataset: Dataset
    gansd: GansdModel
    mail_customer: CustomerPolicy
    bc_customer: Optional[CustomerPolicy] = None

    def learned(self, method: str, customer: CustomerPolicy) -> LearnedEnvironment:
        sampler = GansdSampler(self.gansd)
        env = build_virtual_env(sampler, customer, self.dataset.meta.max_index, name=method)
        return LearnedEnvironment(env, method, sampler, customer, self.gansd)

    def mail_env(self) -> LearnedEnvironment:
        return self.learned("mail", self.mail_customer)

    def generalization_envs(self) -> Dict[str, LearnedEnvironment]:
        if self.bc_customer is None:
            return exp.build_generalization_envs(self.dataset, self.cfg)
        return {"mail": self.mail_env(), "bc": self.learned("bc", self.bc_customer)}


def _runners(inputs: SuiteInputs) -> Dict[str, Callable[[], exp.ExperimentResult]]:
    cfg = inputs.cfg
    return {
        "distribution_match": lambda: exp.exp_distribution_match(inputs.gansd, inputs.params, cfg),
        "r2p_fidelity": lambda: exp.exp_r2p_fidelity(inputs.mail_env().env, inputs.params, cfg),
        "r2p_over_time": lambda: exp.exp_r2p_over_time(cfg),
        "anc": lambda: exp.exp_anc(inputs.mail_env(), inputs.params, cfg),
        "generalization": lambda: exp.exp_generalization(inputs.dataset, cfg, envs=inputs.generalization_envs()),
        "rl_vs_sl": lambda: exp.exp_rl_vs_sl(cfg),
        "gansd_modes": lambda: exp.exp_gansd_modes(cfg),
    }


def run_suite(inputs: SuiteInputs, reports_dir: Union[str, Path],
              names: Optional[Sequence[str]] = None) -> List[ExperimentReport]:
    """Run the named experiments (all by default) in a fixed order and write their reports."""
    names = list(EXPERIMENT_NAMES if not names else names)
    unknown = sorted(set(names) - set(EXPERIMENT_NAMES))
    if unknown:
        raise RejectedInputError(f"unknown experiments: {', '.join(unknown)}", suggestions=list(EXPERIMENT_NAMES))
    runners = _runners(inputs)
    reports = []
    for name in EXPERIMENT_NAMES:
        if name not in names:
            continue
        logger.bench_info(f"running {name}", operation="run_suite", seed=inputs.cfg.seed)
        report, table = runners[name]()
        write_report(report, reports_dir, csv_name=exp.CSV_NAMES[name], table=table)
        reports.append(report)
    write_summary(reports, reports_dir)
    return reports


def summary_frame(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    rows = [
        {"experiment": r.experiment, "check": c.name, "passed": c.passed, "detail": c.detail}
        for r in reports for c in r.checks
    ]
    return pd.DataFrame(rows, columns=["experiment", "check", "passed", "detail"])


def write_summary(reports: Sequence[ExperimentReport], reports_dir: Union[str, Path]) -> Path:
    path = Path(reports_dir) / SUMMARY_CSV
    path.parent.mkdir(parents=True, exist_ok=True)
    summary_frame(reports).to_csv(path, index=False)
    return path
