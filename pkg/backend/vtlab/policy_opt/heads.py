"""
Stochastic policy heads with the quantities trust-region updates need.

Each head exposes log-probabilities, weighted log-probability gradients, per-sample KL
divergences and Fisher-vector products. Fisher products use the network's forward-mode
derivative followed by one backward pass: J^T M J v, with M the Fisher matrix of the output
distribution in its natural coordinates (mean and log-std for the Gaussian, logits for the
categorical).
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from ..market.domain import ProfileBatch
from ..nn.mlp import Mlp, build_mlp
from ..nn.tensor import Tensor

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class GaussianHead:
    """Diagonal Gaussian over R^d: mean from a network, state-independent log-std."""
    mean_net: Mlp
    log_std: np.ndarray

    @property
    def action_dim(self) -> int:
        return self.mean_net.out_dim

    @property
    def num_params(self) -> int:
        return self.mean_net.num_params + self.log_std.size

    def get_flat(self) -> Tensor:
        return np.concatenate([self.mean_net.get_flat(), self.log_std])

    def with_flat(self, flat: np.ndarray) -> "GaussianHead":
        k = self.mean_net.num_params
        return GaussianHead(self.mean_net.with_flat(flat[:k]), np.array(flat[k:k + self.log_std.size]))

    def mean(self, inputs: np.ndarray) -> Tensor:
        return np.atleast_2d(self.mean_net.forward(inputs))

    def sample(self, inputs: np.ndarray, rng: np.random.Generator) -> Tensor:
        mean = self.mean(inputs)
        return mean + np.exp(self.log_std) * rng.standard_normal(mean.shape)

    def log_prob(self, inputs: np.ndarray, actions: np.ndarray) -> Tensor:
        z = (actions - self.mean(inputs)) * np.exp(-self.log_std)
        return -0.5 * np.sum(z * z, axis=1) - np.sum(self.log_std) - 0.5 * self.action_dim * LOG_2PI

    def log_prob_grad(self, inputs: np.ndarray, actions: np.ndarray, weights: np.ndarray) -> Tensor:
        """Gradient of sum_i w_i log p(a_i | x_i) over [mean-net params, log-std]."""
        mean, cache = self.mean_net.forward_cache(inputs)
        mean = np.atleast_2d(mean)
        inv_var = np.exp(-2.0 * self.log_std)
        diff = actions - mean
        w = weights[:, None]
        grads, _ = self.mean_net.backward_from_cache(cache, w * diff * inv_var, wrt_logits=True)
        g_log_std = np.sum(w * (diff * diff * inv_var - 1.0), axis=0)
        return np.concatenate([grads.flat(), g_log_std])

    def kl_from(self, old: "GaussianHead", inputs: np.ndarray) -> Tensor:
        """Per-sample KL(old || self)."""
        mu_old, mu_new = old.mean(inputs), self.mean(inputs)
        var_old = np.exp(2.0 * old.log_std)
        var_new = np.exp(2.0 * self.log_std)
        terms = (self.log_std - old.log_std) + (var_old + (mu_old - mu_new) ** 2) / (2.0 * var_new) - 0.5
        return np.sum(terms, axis=1)

    def fisher_vector_product(self, inputs: np.ndarray, v: np.ndarray, weights: np.ndarray) -> Tensor:
        """sum_i w_i F_i v with F_i the per-sample Fisher matrix."""
        k = self.mean_net.num_params
        _, cache = self.mean_net.forward_cache(inputs)
        tangent = self.mean_net.grads_from_flat(v[:k])
        d_mean = np.atleast_2d(self.mean_net.jvp(cache, tangent))
        inv_var = np.exp(-2.0 * self.log_std)
        grads, _ = self.mean_net.backward_from_cache(cache, weights[:, None] * d_mean * inv_var, wrt_logits=True)
        return np.concatenate([grads.flat(), 2.0 * np.sum(weights) * v[k:]])


@dataclass
class CategoricalHead:
    """Softmax distribution over a few discrete choices."""
    net: Mlp

    @property
    def num_params(self) -> int:
        return self.net.num_params

    def get_flat(self) -> Tensor:
        return self.net.get_flat()

    def with_flat(self, flat: np.ndarray) -> "CategoricalHead":
        return CategoricalHead(self.net.with_flat(flat))

    def logits(self, inputs: np.ndarray) -> Tensor:
        return np.atleast_2d(self.net.logits(inputs))

    def probabilities(self, inputs: np.ndarray) -> Tensor:
        return special.softmax(self.logits(inputs), axis=1)

    def log_prob(self, inputs: np.ndarray, choices: np.ndarray) -> Tensor:
        log_p = special.log_softmax(self.logits(inputs), axis=1)
        return log_p[np.arange(log_p.shape[0]), choices]

    def log_prob_grad(self, inputs: np.ndarray, choices: np.ndarray, weights: np.ndarray) -> Tensor:
        _, cache = self.net.forward_cache(inputs)
        probs = special.softmax(np.atleast_2d(cache.pre_activations[-1]), axis=1)
        upstream = -probs
        upstream[np.arange(probs.shape[0]), choices] += 1.0
        grads, _ = self.net.backward_from_cache(cache, weights[:, None] * upstream, wrt_logits=True)
        return grads.flat()

    def kl_from(self, old: "CategoricalHead", inputs: np.ndarray) -> Tensor:
        log_old = special.log_softmax(old.logits(inputs), axis=1)
        log_new = special.log_softmax(self.logits(inputs), axis=1)
        return np.sum(np.exp(log_old) * (log_old - log_new), axis=1)

    def fisher_vector_product(self, inputs: np.ndarray, v: np.ndarray, weights: np.ndarray) -> Tensor:
        _, cache = self.net.forward_cache(inputs)
        probs = special.softmax(np.atleast_2d(cache.pre_activations[-1]), axis=1)
        dz = np.atleast_2d(self.net.jvp(cache, self.net.grads_from_flat(v)))
        fz = probs * dz - probs * np.sum(probs * dz, axis=1, keepdims=True)
        grads, _ = self.net.backward_from_cache(cache, weights[:, None] * fz, wrt_logits=True)
        return grads.flat()


# engine policies built on the Gaussian head

@dataclass
class GaussianData:
    inputs: np.ndarray
    actions: np.ndarray


class GaussianPolicy:
    """Stochastic engine policy: Gaussian over actions given the encoded profile."""

    def __init__(self, head: GaussianHead, policy_id: str = "gaussian"):
        self.head = head
        self.policy_id = policy_id

    @classmethod
    def create(cls, in_dim: int, action_dim: int, rng: np.random.Generator, hidden=(64, 64),
               init_log_std: float = math.log(0.3), output_scale: Optional[float] = 0.1) -> "GaussianPolicy":
        net = build_mlp(in_dim, action_dim, rng, hidden=hidden, output_scale=output_scale)
        return cls(GaussianHead(net, np.full(action_dim, float(init_log_std))))

    # EnginePolicy
    def act(self, profiles: ProfileBatch, rng: np.random.Generator) -> Tensor:
        return self.head.sample(profiles.encode(), rng)

    def deterministic(self) -> "DeterministicEnginePolicy":
        return DeterministicEnginePolicy(self.head.mean_net)

    # trust-region interface
    def get_flat(self) -> Tensor:
        return self.head.get_flat()

    def with_flat(self, flat: np.ndarray) -> "GaussianPolicy":
        return GaussianPolicy(self.head.with_flat(flat), self.policy_id)

    def log_prob(self, data: GaussianData) -> Tensor:
        return self.head.log_prob(data.inputs, data.actions)

    def log_prob_grad(self, data: GaussianData, weights: np.ndarray) -> Tensor:
        return self.head.log_prob_grad(data.inputs, data.actions, weights)

    def kl(self, old: "GaussianPolicy", data: GaussianData) -> float:
        return float(np.mean(self.head.kl_from(old.head, data.inputs)))

    def fisher_vector_product(self, data: GaussianData, v: np.ndarray) -> Tensor:
        n = data.inputs.shape[0]
        return self.head.fisher_vector_product(data.inputs, v, np.full(n, 1.0 / n))


class DeterministicEnginePolicy:
    """Mean action of a trained Gaussian policy (or any regression network)."""

    def __init__(self, net: Mlp, policy_id: str = "deterministic"):
        self.net = net
        self.policy_id = policy_id

    def act(self, profiles: ProfileBatch, rng: np.random.Generator) -> Tensor:
        return np.atleast_2d(self.net.forward(profiles.encode()))
