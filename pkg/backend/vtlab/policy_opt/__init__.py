"""Trust-region policy optimization with the action-norm constraint."""
from .anc import anc_shape, anc_shape_batch
from .cg import conjugate_gradient
from .heads import (
    CategoricalHead,
    DeterministicEnginePolicy,
    GaussianData,
    GaussianHead,
    GaussianPolicy,
)
from .train import (
    EngineTrainingResult,
    collect_engine_batch,
    load_engine_policy,
    save_engine_policy,
    train_engine_policy,
)
from .trpo import TrpoBatch, TrpoDiagnostics, compute_gae, standardize, trpo_step
from .value import ValueFunction

__all__ = [
    "CategoricalHead",
    "DeterministicEnginePolicy",
    "EngineTrainingResult",
    "GaussianData",
    "GaussianHead",
    "GaussianPolicy",
    "TrpoBatch",
    "TrpoDiagnostics",
    "ValueFunction",
    "anc_shape",
    "anc_shape_batch",
    "collect_engine_batch",
    "compute_gae",
    "conjugate_gradient",
    "load_engine_policy",
    "save_engine_policy",
    "standardize",
    "train_engine_policy",
    "trpo_step",
]
