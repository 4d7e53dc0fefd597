"""
Joint customer/engine policy learned by adversarial imitation.

The engine head proposes the action a customer sees; the customer head answers the composed
state <s, a, n>. The two heads share no parameters but are optimized as one concatenated
vector: [engine mean net, engine log-std, customer net].
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..market.domain import (
    N_CUSTOMER_ACTIONS,
    TYPE_DIM,
    ProfileBatch,
    customer_state_dim,
    encode_customer_state,
)
from ..nn.mlp import build_mlp
from ..nn.tensor import Tensor
from ..policy_opt.heads import CategoricalHead, GaussianHead, GaussianPolicy


class MailCustomerPolicy:
    """The learned customer behavior, usable wherever a CustomerPolicy is expected."""

    def __init__(self, head: CategoricalHead, max_index: int, engine_dim: int):
        self.head = head
        self.max_index = max_index
        self.engine_dim = engine_dim

    def probabilities(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        return self.head.probabilities(encode_customer_state(profiles, actions, pages, self.max_index))


@dataclass
class JointData:
    """One row per customer step; engine terms count only where a fresh customer arrived."""
    customer_inputs: np.ndarray
    choices: np.ndarray
    engine_inputs: np.ndarray
    engine_actions: np.ndarray
    fresh: np.ndarray


@dataclass
class JointPolicy:
    engine: GaussianHead
    customer: CategoricalHead
    max_index: int

    @classmethod
    def create(cls, request_dim: int, engine_dim: int, max_index: int, rng: np.random.Generator,
               hidden=(64, 64), init_log_std: float = math.log(0.3)) -> "JointPolicy":
        engine_net = build_mlp(TYPE_DIM + request_dim, engine_dim, rng, hidden=hidden, output_scale=0.1)
        customer_net = build_mlp(
            customer_state_dim(request_dim, engine_dim), N_CUSTOMER_ACTIONS, rng, hidden=hidden,
            output_activation="softmax_blocks", blocks=(N_CUSTOMER_ACTIONS,),
        )
        return cls(GaussianHead(engine_net, np.full(engine_dim, float(init_log_std))),
                   CategoricalHead(customer_net), max_index)

    @property
    def engine_dim(self) -> int:
        return self.engine.action_dim

    def customer_inputs(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        return encode_customer_state(profiles, actions, pages, self.max_index)

    def probabilities(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        return self.customer.probabilities(self.customer_inputs(profiles, actions, pages))

    def engine_actions(self, profiles: ProfileBatch, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Sampled engine actions, or the mean actions when ``rng`` is None."""
        inputs = profiles.encode()
        return self.engine.mean(inputs) if rng is None else self.engine.sample(inputs, rng)

    def customer_policy(self) -> MailCustomerPolicy:
        return MailCustomerPolicy(self.customer, self.max_index, self.engine_dim)

    def engine_policy(self) -> GaussianPolicy:
        return GaussianPolicy(self.engine, policy_id="mail-engine")

    # trust-region interface

    def _split(self, flat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        k = self.engine.num_params
        return flat[:k], flat[k:]

    def get_flat(self) -> Tensor:
        return np.concatenate([self.engine.get_flat(), self.customer.get_flat()])

    def with_flat(self, flat: np.ndarray) -> "JointPolicy":
        engine_part, customer_part = self._split(np.asarray(flat, dtype=np.float64))
        return JointPolicy(self.engine.with_flat(engine_part), self.customer.with_flat(customer_part), self.max_index)

    def log_prob(self, data: JointData) -> Tensor:
        log_p = self.customer.log_prob(data.customer_inputs, data.choices)
        fresh = data.fresh.astype(bool)
        if fresh.any():
            log_p = log_p.copy()
            log_p[fresh] += self.engine.log_prob(data.engine_inputs[fresh], data.engine_actions[fresh])
        return log_p

    def log_prob_grad(self, data: JointData, weights: np.ndarray) -> Tensor:
        engine_weights = weights * data.fresh
        return np.concatenate([
            self.engine.log_prob_grad(data.engine_inputs, data.engine_actions, engine_weights),
            self.customer.log_prob_grad(data.customer_inputs, data.choices, weights),
        ])

    def kl(self, old: "JointPolicy", data: JointData) -> float:
        per_step = self.customer.kl_from(old.customer, data.customer_inputs)
        per_step = per_step + data.fresh * self.engine.kl_from(old.engine, data.engine_inputs)
        return float(np.mean(per_step))

    def fisher_vector_product(self, data: JointData, v: np.ndarray) -> Tensor:
        n = data.customer_inputs.shape[0]
        weights = np.full(n, 1.0 / n)
        engine_part, customer_part = self._split(v)
        return np.concatenate([
            self.engine.fisher_vector_product(data.engine_inputs, engine_part, weights * data.fresh),
            self.customer.fisher_vector_product(data.customer_inputs, customer_part, weights),
        ])
