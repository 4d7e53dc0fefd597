"""
Discriminator over (customer state, customer action) pairs and the imitation reward it induces.

The discriminator is trained toward 1 on generated pairs and toward 0 on expert pairs, so
the reward -log D is large for pairs that look like expert behavior.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from sklearn.metrics import accuracy_score

from ..error_handling import NumericFaultError, RejectedInputError
from ..market.dataset import Dataset
from ..market.domain import (
    N_CUSTOMER_ACTIONS,
    CustomerAction,
    CustomerState,
    ProfileBatch,
    customer_state_dim,
    encode_customer_state,
    onehot_actions,
)
from ..nn.losses import bernoulli_loss_grads, clamp_probability
from ..nn.mlp import Mlp, build_mlp
from ..nn.optim import OptimizerState, apply_gradients
from ..nn.tensor import Tensor

Pairs = Tuple[np.ndarray, np.ndarray]


@dataclass
class MailDiscriminator:
    network: Mlp
    max_index: int

    @classmethod
    def create(cls, request_dim: int, engine_dim: int, max_index: int, rng: np.random.Generator,
               hidden: Sequence[int] = (64, 64)) -> "MailDiscriminator":
        in_dim = customer_state_dim(request_dim, engine_dim) + N_CUSTOMER_ACTIONS
        return cls(build_mlp(in_dim, 1, rng, hidden=hidden, output_activation="sigmoid"), max_index)

    def pair_inputs(self, state_inputs: np.ndarray, choices: np.ndarray) -> Tensor:
        return np.concatenate([state_inputs, onehot_actions(choices)], axis=1)

    def prob(self, state_inputs: np.ndarray, choices: np.ndarray) -> Tensor:
        """Clamped probability that each pair was generated."""
        out = np.atleast_2d(self.network.forward(self.pair_inputs(state_inputs, choices)))[:, 0]
        return clamp_probability(out)

    def rewards(self, state_inputs: np.ndarray, choices: np.ndarray) -> Tensor:
        return -np.log(self.prob(state_inputs, choices))


def imitation_reward(disc: MailDiscriminator, state: CustomerState, action: CustomerAction) -> float:
    """-log(clamp(D(s^c, a^c))) for one pair."""
    inputs = encode_customer_state(
        ProfileBatch.from_profiles([state.profile]),
        state.engine_action.as_array()[None, :],
        np.array([state.page.n]),
        disc.max_index,
    )
    return float(disc.rewards(inputs, np.array([int(action)]))[0])


def expert_pairs(dataset: Dataset, max_index: int) -> Pairs:
    """(customer-state encodings, customer actions) of every logged page view."""
    if dataset.n_records == 0:
        raise RejectedInputError("expert dataset is empty")
    inputs = encode_customer_state(dataset.profiles(), dataset.actions(), dataset.pages(), max_index)
    return inputs, dataset.customer_actions()


def mail_discriminator_update(
    disc: MailDiscriminator,
    generated: Pairs,
    expert: Pairs,
    optimizer: OptimizerState,
) -> Tuple[MailDiscriminator, float]:
    """
    One gradient step on E_gen[log D] + E_expert[log(1 - D)] (ascent), returning the updated
    discriminator and the negated objective before the step.
    """
    if generated[0].shape[0] == 0 or expert[0].shape[0] == 0:
        raise RejectedInputError("discriminator update needs nonempty generated and expert pairs")
    net = disc.network
    gen_out, gen_cache = net.forward_cache(disc.pair_inputs(*generated))
    exp_out, exp_cache = net.forward_cache(disc.pair_inputs(*expert))
    loss, grad_gen, grad_exp = bernoulli_loss_grads(gen_out, exp_out)
    if not np.isfinite(loss):
        raise NumericFaultError(
            "non-finite discriminator loss",
            details={"generated_mean": float(np.mean(gen_out)), "expert_mean": float(np.mean(exp_out))},
        )
    grads = net.backward_from_cache(gen_cache, grad_gen)[0] + net.backward_from_cache(exp_cache, grad_exp)[0]
    return MailDiscriminator(apply_gradients(net, optimizer, grads), disc.max_index), loss


def discriminator_accuracy(disc: MailDiscriminator, generated: Pairs, expert: Pairs) -> float:
    """Share of pairs classified correctly with D > 0.5 meaning generated."""
    labels = np.concatenate([np.ones(generated[0].shape[0]), np.zeros(expert[0].shape[0])])
    scores = np.concatenate([disc.prob(*generated), disc.prob(*expert)])
    return float(accuracy_score(labels, (scores > 0.5).astype(np.float64)))
