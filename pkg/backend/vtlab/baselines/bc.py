"""Behavior cloning of the customer policy: supervised cross-entropy over logged (state, action) pairs."""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd
from sklearn.metrics import accuracy_score

from ..config import BcConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import DivergenceGuard, InsufficientDataError
from ..market.dataset import Dataset
from ..market.domain import N_CUSTOMER_ACTIONS, ProfileBatch, customer_state_dim, encode_customer_state
from ..nn.checkpoint import load_checkpoint, mlp_from_tensors, mlp_to_tensors, save_checkpoint
from ..nn.losses import cross_entropy_logits
from ..nn.mlp import Mlp, build_mlp
from ..nn.optim import apply_gradients, linear_decay, make_optimizer
from ..nn.tensor import Tensor
from ..utils.seeding import STREAM_TRAINING, make_rng

logger = get_logger(__name__, LogCategory.TRAINING)

CURVE_COLUMNS = ["epoch", "loss", "accuracy"]
BC_STREAM_INDEX = 4


class BcCustomerPolicy:
    """Customer policy learned by maximum likelihood; a drop-in CustomerPolicy."""

    def __init__(self, network: Mlp, max_index: int, engine_dim: int):
        self.network = network
        self.max_index = max_index
        self.engine_dim = engine_dim

    def inputs(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        return encode_customer_state(profiles, actions, pages, self.max_index)

    def probabilities(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        return np.atleast_2d(self.network.forward(self.inputs(profiles, actions, pages)))

    def predict(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> np.ndarray:
        return np.argmax(self.probabilities(profiles, actions, pages), axis=1)


@dataclass
class BcTrainingResult:
    policy: BcCustomerPolicy
    curve: pd.DataFrame


def bc_accuracy(policy: BcCustomerPolicy, dataset: Dataset) -> float:
    predicted = policy.predict(dataset.profiles(), dataset.actions(), dataset.pages())
    return float(accuracy_score(dataset.customer_actions(), predicted))


def train_bc(dataset: Dataset, cfg: BcConfig, seed: int, epochs: Optional[int] = None) -> BcTrainingResult:
    """Minibatch Adam on the mean cross-entropy with a linearly decaying learning rate."""
    if dataset.n_records == 0:
        raise InsufficientDataError("behavior cloning needs at least one logged page view")
    epochs = cfg.epochs if epochs is None else epochs
    meta = dataset.meta
    rng = make_rng(seed, STREAM_TRAINING, BC_STREAM_INDEX)
    inputs = encode_customer_state(dataset.profiles(), dataset.actions(), dataset.pages(), meta.max_index)
    labels = dataset.customer_actions()
    net = build_mlp(
        customer_state_dim(meta.request_dim, meta.engine_dim), N_CUSTOMER_ACTIONS, rng, hidden=cfg.hidden,
        output_activation="softmax_blocks", blocks=(N_CUSTOMER_ACTIONS,),
    )
    opt = make_optimizer(net.parameters(), "adam", cfg.lr)
    n = inputs.shape[0]
    steps_per_epoch = -(-n // cfg.batch_size)
    total_steps = epochs * steps_per_epoch
    guard = DivergenceGuard("bc")
    rows = []
    step = 0

    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, cache = net.forward_cache(inputs[idx])
            loss, grad = cross_entropy_logits(cache.pre_activations[-1], labels[idx])
            grads, _ = net.backward_from_cache(cache, grad, wrt_logits=True)
            net = apply_gradients(net, opt, grads, lr=linear_decay(cfg.lr, step, total_steps))
            epoch_loss += loss * idx.size
            step += 1
        epoch_loss /= n
        guard.check(epoch, loss=epoch_loss)
        accuracy = float(accuracy_score(labels, np.argmax(net.logits(inputs), axis=1)))
        rows.append({"epoch": epoch, "loss": epoch_loss, "accuracy": accuracy})
        logger.training_debug(f"loss={epoch_loss:.4f} accuracy={accuracy:.4f}", operation="train_bc", iteration=epoch)

    policy = BcCustomerPolicy(net, meta.max_index, meta.engine_dim)
    if rows:
        logger.training_info(
            f"behavior cloning finished {epochs} epochs: loss={rows[-1]['loss']:.4f} "
            f"accuracy={rows[-1]['accuracy']:.4f}",
            operation="train_bc",
        )
    return BcTrainingResult(policy, pd.DataFrame(rows, columns=CURVE_COLUMNS))


def bc_to_tensors(policy: BcCustomerPolicy) -> Dict[str, np.ndarray]:
    tensors = mlp_to_tensors(policy.network, "bc")
    tensors["bc.shape"] = np.array([policy.max_index, policy.engine_dim], dtype=np.float64)
    return tensors


def save_bc(policy: BcCustomerPolicy, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, bc_to_tensors(policy))


def load_bc(path: Union[str, Path]) -> BcCustomerPolicy:
    tensors = load_checkpoint(path, producer="fit-bc")
    shape = tensors["bc.shape"]
    return BcCustomerPolicy(mlp_from_tensors(tensors, "bc"), int(shape[0]), int(shape[1]))
