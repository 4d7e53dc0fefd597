"""
Supervised engine policies.

SL1 regresses the logged engine action on the profile over purchase records only. SL2 also
pushes away from the actions of non-purchase records (weight lambda1) and keeps outputs
small (weight lambda2):

    (1/|S1|) sum_S1 |pi(s) - a|^2 - (lambda1/|S0|) sum_S0 |pi(s) - a|^2 + (lambda2/|S|) sum_S |pi(s)|^2

Minibatches of S1 come from the main training stream; S0 and S minibatches come from a
separate stream, and terms with zero weight are skipped, so SL2 with zero weights trains
exactly like SL1.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from ..config import SlConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import DivergenceGuard, InsufficientDataError
from ..market.dataset import Dataset
from ..market.domain import ProfileBatch
from ..nn.checkpoint import load_checkpoint, mlp_from_tensors, mlp_to_tensors, save_checkpoint
from ..nn.losses import mse
from ..nn.mlp import Mlp, build_mlp
from ..nn.optim import clip_by_global_norm, make_optimizer, optimize_step
from ..nn.tensor import Tensor
from ..utils.seeding import STREAM_TRAINING, make_rng

logger = get_logger(__name__, LogCategory.TRAINING)

CURVE_COLUMNS = ["epoch", "loss"]
SL_STREAM_INDEX = 5
SL_AUX_STREAM_INDEX = 6
VARIANTS = ("sl1", "sl2")


class SlPolicy:
    """Deterministic engine policy fitted by regression."""

    def __init__(self, network: Mlp, variant: str = "sl1", lambda1: float = 0.0, lambda2: float = 0.0):
        self.network = network
        self.variant = variant
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.policy_id = variant

    def act(self, profiles: ProfileBatch, rng: Optional[np.random.Generator] = None) -> Tensor:
        return np.atleast_2d(self.network.forward(profiles.encode()))


@dataclass
class SlTrainingResult:
    policy: SlPolicy
    curve: pd.DataFrame


def _train_sl(dataset: Dataset, cfg: SlConfig, seed: int, variant: str, lambda1: float, lambda2: float,
              epochs: Optional[int]) -> SlTrainingResult:
    purchases = dataset.purchase_mask()
    if not purchases.any():
        raise InsufficientDataError(
            "supervised engine policies need at least one purchase record",
            details={"records": int(dataset.n_records)},
        )
    epochs = cfg.epochs if epochs is None else epochs
    inputs = dataset.profiles().encode()
    actions = dataset.actions()
    x1, a1 = inputs[purchases], actions[purchases]
    x0, a0 = inputs[~purchases], actions[~purchases]
    use_s0 = lambda1 > 0.0 and x0.shape[0] > 0
    use_norm = lambda2 > 0.0

    rng = make_rng(seed, STREAM_TRAINING, SL_STREAM_INDEX)
    aux = make_rng(seed, STREAM_TRAINING, SL_AUX_STREAM_INDEX)
    net = build_mlp(inputs.shape[1], actions.shape[1], rng, hidden=cfg.hidden)
    opt = make_optimizer(net.parameters(), "adam", cfg.lr)
    guard = DivergenceGuard(variant)
    rows = []
    n1 = x1.shape[0]

    for epoch in range(epochs):
        order = rng.permutation(n1)
        epoch_loss, batches = 0.0, 0
        for start in range(0, n1, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            out, cache = net.forward_cache(x1[idx])
            loss, grad = mse(out, a1[idx])
            grads = net.backward_from_cache(cache, grad)[0]
            if use_s0:
                pick = aux.integers(0, x0.shape[0], size=cfg.batch_size)
                out0, cache0 = net.forward_cache(x0[pick])
                loss0, grad0 = mse(out0, a0[pick], weight=-lambda1)
                grads = grads + net.backward_from_cache(cache0, grad0)[0]
                loss += loss0
            if use_norm:
                pick = aux.integers(0, inputs.shape[0], size=cfg.batch_size)
                out_s, cache_s = net.forward_cache(inputs[pick])
                loss_s, grad_s = mse(out_s, np.zeros_like(out_s), weight=lambda2)
                grads = grads + net.backward_from_cache(cache_s, grad_s)[0]
                loss += loss_s
            clipped, _ = clip_by_global_norm(grads.as_list(), cfg.clip_norm)
            net = net.with_parameters(optimize_step(opt, net.parameters(), clipped))
            epoch_loss += loss
            batches += 1
        epoch_loss /= max(batches, 1)
        guard.check(epoch, loss=epoch_loss)
        rows.append({"epoch": epoch, "loss": epoch_loss})
        logger.training_debug(f"loss={epoch_loss:.5f}", operation=f"train_{variant}", iteration=epoch)

    if rows:
        logger.training_info(
            f"{variant} finished {epochs} epochs on {n1} purchase records: loss={rows[-1]['loss']:.5f}",
            operation=f"train_{variant}",
        )
    policy = SlPolicy(net, variant, lambda1, lambda2)
    return SlTrainingResult(policy, pd.DataFrame(rows, columns=CURVE_COLUMNS))


def train_sl1(dataset: Dataset, cfg: SlConfig, seed: int, epochs: Optional[int] = None) -> SlTrainingResult:
    """Least-squares regression of the logged action on the profile over purchase records."""
    return _train_sl(dataset, cfg, seed, "sl1", 0.0, 0.0, epochs)


def train_sl2(dataset: Dataset, cfg: SlConfig, seed: int, lambda1: Optional[float] = None,
              lambda2: Optional[float] = None, epochs: Optional[int] = None) -> SlTrainingResult:
    lambda1 = cfg.lambda1 if lambda1 is None else lambda1
    lambda2 = cfg.lambda2 if lambda2 is None else lambda2
    return _train_sl(dataset, cfg, seed, "sl2", lambda1, lambda2, epochs)


def sl_to_tensors(policy: SlPolicy) -> Dict[str, np.ndarray]:
    tensors = mlp_to_tensors(policy.network, "sl")
    tensors["sl.setup"] = np.array([VARIANTS.index(policy.variant), policy.lambda1, policy.lambda2])
    return tensors


def save_sl(policy: SlPolicy, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, sl_to_tensors(policy))


def load_sl(path: Union[str, Path]) -> SlPolicy:
    tensors = load_checkpoint(path, producer="train-sl")
    setup = tensors["sl.setup"]
    return SlPolicy(mlp_from_tensors(tensors, "sl"), VARIANTS[int(setup[0])], float(setup[1]), float(setup[2]))
