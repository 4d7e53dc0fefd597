"""Engine and customer views of the marketplace, rollouts, logged data and metrics."""
from .dataset import Dataset, DatasetMeta, Session, StepRecord, load_dataset, save_dataset
from .domain import (
    TERMINATED,
    CustomerAction,
    CustomerPolicy,
    CustomerProfile,
    CustomerSampler,
    CustomerState,
    EngineAction,
    EnginePolicy,
    PageIndex,
    ProfileBatch,
    customer_probabilities,
    encode_customer_state,
)
from .environment import EngineStep, SessionOutcome, VirtualEnvironment, r2p_of
from .metrics import SessionMetrics, compute_metrics, r2p_by_feature, write_metrics_csv
from .policies import (
    ConstantEnginePolicy,
    EmpiricalSampler,
    FixedCustomerPolicy,
    PointMassSampler,
    UniformLoggingPolicy,
)
from .rollout import rollout_sessions
from .transitions import EngineTransition, customer_transition, engine_transition, is_terminal

__all__ = [
    "TERMINATED",
    "ConstantEnginePolicy",
    "CustomerAction",
    "CustomerPolicy",
    "CustomerProfile",
    "CustomerSampler",
    "CustomerState",
    "Dataset",
    "DatasetMeta",
    "EmpiricalSampler",
    "EngineAction",
    "EngineStep",
    "EnginePolicy",
    "EngineTransition",
    "FixedCustomerPolicy",
    "PageIndex",
    "PointMassSampler",
    "ProfileBatch",
    "Session",
    "SessionMetrics",
    "SessionOutcome",
    "StepRecord",
    "UniformLoggingPolicy",
    "VirtualEnvironment",
    "compute_metrics",
    "customer_probabilities",
    "customer_transition",
    "encode_customer_state",
    "engine_transition",
    "is_terminal",
    "load_dataset",
    "r2p_of",
    "r2p_by_feature",
    "rollout_sessions",
    "save_dataset",
    "write_metrics_csv",
]
