"""Feed-forward neural substrate: MLPs, losses, optimizers, gradient checks and checkpoints."""
from .checkpoint import (
    load_checkpoint,
    mlp_from_tensors,
    mlp_to_tensors,
    save_checkpoint,
)
from .mlp import ForwardCache, Mlp, MlpGrads, backward, build_mlp, forward
from .optim import (
    OptimizerState,
    apply_gradients,
    clip_by_global_norm,
    make_optimizer,
    optimize_step,
)
from .tensor import Tensor, as_tensor

__all__ = [
    "ForwardCache",
    "Mlp",
    "MlpGrads",
    "OptimizerState",
    "Tensor",
    "apply_gradients",
    "as_tensor",
    "backward",
    "build_mlp",
    "clip_by_global_norm",
    "forward",
    "load_checkpoint",
    "make_optimizer",
    "mlp_from_tensors",
    "mlp_to_tensors",
    "optimize_step",
    "save_checkpoint",
]
