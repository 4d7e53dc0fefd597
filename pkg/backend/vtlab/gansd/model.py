"""
Customer generator with type-distribution regularizers.

The generator maps Gaussian noise to a soft profile: one softmax block per categorical
feature (8, 3, 2) followed by a unit-norm request vector, laid out exactly like an encoded
logged profile so the discriminator reads both the same way. Hard profiles are drawn only
when customers are emitted.
"""
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import special

from ..error_handling import RejectedInputError
from ..market.domain import TYPE_BLOCKS, TYPE_DIM, ProfileBatch, sample_choices
from ..nn.losses import bernoulli_objective
from ..nn.mlp import ForwardCache, Mlp
from ..nn.tensor import Tensor
from ..utils.seeding import STREAM_CUSTOMERS, make_rng, run_sharded
from ..utils.stats import PROB_FLOOR

BLOCK_NAMES = ("query_category", "purchase_power", "high_level")
_MIN_NORM = 1e-12


def _block_slices():
    start = 0
    for size in TYPE_BLOCKS:
        yield slice(start, start + size)
        start += size


@dataclass(frozen=True)
class TypeDistribution:
    """Per-feature marginal distributions of customer type."""
    blocks: Tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        for name, block, size in zip(BLOCK_NAMES, self.blocks, TYPE_BLOCKS):
            if block.shape != (size,):
                raise RejectedInputError(f"{name} block has shape {block.shape}, expected ({size},)")
            if abs(float(block.sum()) - 1.0) > 1e-6:
                raise RejectedInputError(f"{name} block does not sum to 1")

    @classmethod
    def from_soft(cls, soft: np.ndarray) -> "TypeDistribution":
        """Minibatch mean of soft (or one-hot) type blocks."""
        soft = np.asarray(soft, dtype=np.float64)
        if soft.shape[0] == 0:
            raise RejectedInputError("type distribution of an empty batch")
        means = soft[:, :TYPE_DIM].mean(axis=0)
        return cls(tuple(means[s] for s in _block_slices()))

    @classmethod
    def from_profiles(cls, profiles: ProfileBatch) -> "TypeDistribution":
        return cls.from_soft(profiles.encode())

    def as_vector(self) -> Tensor:
        return np.concatenate(self.blocks)

    def entropy(self) -> float:
        return float(sum(special.entr(b).sum() for b in self.blocks))

    def kl(self, other: "TypeDistribution", floor: float = PROB_FLOOR) -> float:
        """KL(self || other) summed over the blocks."""
        total = 0.0
        for p, q in zip(self.blocks, other.blocks):
            total += float(np.sum(p * (np.log(np.maximum(p, floor)) - np.log(np.maximum(q, floor)))))
        return total

    def tv(self, other: "TypeDistribution") -> Dict[str, float]:
        return {
            name: float(0.5 * np.abs(p - q).sum())
            for name, p, q in zip(BLOCK_NAMES, self.blocks, other.blocks)
        }


@dataclass
class GansdModel:
    generator: Mlp
    discriminator: Mlp
    data_types: TypeDistribution
    alpha: float = 1.0
    beta: float = 1.0
    batch_size: int = 256
    gen_steps: int = 3

    @property
    def noise_dim(self) -> int:
        return self.generator.in_dim

    @property
    def request_dim(self) -> int:
        return self.generator.out_dim - TYPE_DIM

    def generate(self, z: np.ndarray) -> Tuple[Tensor, ForwardCache]:
        """Soft profiles for noise ``z`` plus the generator cache for backpropagation."""
        raw, cache = self.generator.forward_cache(z)
        raw = np.atleast_2d(raw)
        head = raw[:, TYPE_DIM:]
        norms = np.maximum(np.linalg.norm(head, axis=1, keepdims=True), _MIN_NORM)
        soft = raw.copy()
        soft[:, TYPE_DIM:] = head / norms
        return soft, cache

    def soft_outputs(self, z: np.ndarray) -> Tensor:
        return self.generate(z)[0]

    def generator_backward(self, cache: ForwardCache, soft: np.ndarray, grad_soft: np.ndarray):
        """Generator parameter gradients given the loss gradient on the soft outputs."""
        raw = np.atleast_2d(cache.output)
        head = raw[:, TYPE_DIM:]
        norms = np.maximum(np.linalg.norm(head, axis=1, keepdims=True), _MIN_NORM)
        unit = soft[:, TYPE_DIM:]
        g_unit = grad_soft[:, TYPE_DIM:]
        upstream = grad_soft.copy()
        upstream[:, TYPE_DIM:] = (g_unit - unit * np.sum(unit * g_unit, axis=1, keepdims=True)) / norms
        grads, _ = self.generator.backward_from_cache(cache, upstream)
        return grads


def generator_loss_and_grad(
    soft: np.ndarray,
    data_types: TypeDistribution,
    discriminator: Mlp,
    alpha: float,
    beta: float,
) -> Tuple[float, Tensor, Dict[str, float]]:
    """
    Loss -[mean D(G(z)) + alpha H(V_hat) - beta KL(V_hat || V)] with V_hat the minibatch type
    distribution, its gradient on the soft outputs, and the entropy/KL diagnostics.
    """
    soft = np.asarray(soft, dtype=np.float64)
    n = soft.shape[0]
    if n == 0:
        raise RejectedInputError("generator loss needs a nonempty batch")
    d_out, d_cache = discriminator.forward_cache(soft)
    mean_d = float(np.mean(d_out))
    _, grad_d = discriminator.backward_from_cache(d_cache, np.full_like(d_out, 1.0 / n))

    v_hat = TypeDistribution.from_soft(soft)
    entropy = v_hat.entropy()
    kl = v_hat.kl(data_types)
    loss = -(mean_d + alpha * entropy - beta * kl)

    grad = -grad_d
    for s, p, q in zip(_block_slices(), v_hat.blocks, data_types.blocks):
        log_p = np.log(np.maximum(p, PROB_FLOOR))
        d_entropy = -(log_p + 1.0)
        d_kl = log_p + 1.0 - np.log(np.maximum(q, PROB_FLOOR))
        grad[:, s] -= (alpha * d_entropy - beta * d_kl) / n
    return loss, grad, {"mean_d": mean_d, "type_entropy": entropy, "type_kl": kl}


def gansd_generator_loss(
    soft: np.ndarray,
    data_types: TypeDistribution,
    discriminator: Mlp,
    alpha: float,
    beta: float,
) -> float:
    return generator_loss_and_grad(soft, data_types, discriminator, alpha, beta)[0]


def gansd_discriminator_loss(real: np.ndarray, generated: np.ndarray, discriminator: Mlp) -> float:
    """-(E[log D(real)] + E[log(1 - D(generated))])."""
    return -bernoulli_objective(discriminator.forward(real), discriminator.forward(generated))


def hard_sample(soft: np.ndarray, rng: np.random.Generator) -> ProfileBatch:
    """Categorical draw per type block; the request head is already unit norm."""
    columns = [sample_choices(soft[:, s], rng) for s in _block_slices()]
    return ProfileBatch(columns[0] + 1, columns[1] + 1, columns[2].astype(bool), soft[:, TYPE_DIM:])


class GansdSampler:
    """Customer sampler backed by a trained generator."""

    def __init__(self, model: GansdModel):
        self.model = model

    def sample(self, n: int, rng: np.random.Generator) -> ProfileBatch:
        if n == 0:
            return ProfileBatch.empty(self.model.request_dim)
        z = rng.standard_normal((n, self.model.noise_dim))
        return hard_sample(self.model.soft_outputs(z), rng)


def sample_customers(model: GansdModel, count: int, seed: int, threads: int = 1) -> ProfileBatch:
    """``count`` hard customer profiles; deterministic in ``seed`` for any thread count."""
    if count < 0:
        raise RejectedInputError(f"customer count must be nonnegative, got {count}")
    if count == 0:
        return ProfileBatch.empty(model.request_dim)
    sampler = GansdSampler(model)
    shards = run_sharded(sampler.sample, count, seed, STREAM_CUSTOMERS, threads=threads)
    return ProfileBatch.concat(shards)


def soft_marginals(model: GansdModel, count: int, seed: int) -> TypeDistribution:
    """Type distribution of the generator's soft outputs averaged over ``count`` noise draws."""
    rng = make_rng(seed, STREAM_CUSTOMERS, 999)
    total = np.zeros(TYPE_DIM)
    remaining = count
    while remaining > 0:
        n = min(remaining, 65536)
        total += model.soft_outputs(rng.standard_normal((n, model.noise_dim)))[:, :TYPE_DIM].sum(axis=0)
        remaining -= n
    means = total / count
    return TypeDistribution(tuple(means[s] / means[s].sum() for s in _block_slices()))
