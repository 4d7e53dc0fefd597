"""Adversarial training of the customer generator."""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd

from ..config import GansdConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import DivergenceGuard, InsufficientDataError
from ..market.dataset import Dataset
from ..market.domain import TYPE_BLOCKS, TYPE_DIM, ProfileBatch
from ..nn.checkpoint import load_checkpoint, mlp_from_tensors, mlp_to_tensors, save_checkpoint
from ..nn.losses import bernoulli_loss_grads
from ..nn.mlp import Mlp
from ..nn.optim import apply_gradients, make_optimizer
from ..utils.seeding import STREAM_TRAINING, make_rng
from .model import GansdModel, TypeDistribution, generator_loss_and_grad

logger = get_logger(__name__, LogCategory.TRAINING)

CURVE_COLUMNS = ["iter", "d_loss", "g_loss", "type_entropy", "type_kl"]
GANSD_STREAM_INDEX = 1


@dataclass
class GansdTrainingResult:
    model: GansdModel
    curve: pd.DataFrame


def init_gansd(profiles: ProfileBatch, cfg: GansdConfig, rng: np.random.Generator) -> GansdModel:
    dim = TYPE_DIM + profiles.request_dim
    generator = Mlp.create(
        (cfg.noise_dim, *cfg.hidden, dim), rng,
        hidden_activation="tanh", output_activation="softmax_blocks", blocks=TYPE_BLOCKS,
    )
    discriminator = Mlp.create((dim, *cfg.hidden, 1), rng, hidden_activation="tanh", output_activation="sigmoid")
    return GansdModel(
        generator, discriminator, TypeDistribution.from_profiles(profiles),
        alpha=cfg.alpha, beta=cfg.beta, batch_size=cfg.batch_size, gen_steps=cfg.gen_steps,
    )


def train_gansd(dataset: Dataset, cfg: GansdConfig, seed: int) -> GansdTrainingResult:
    """
    Alternate ``gen_steps`` generator updates with one discriminator update per iteration.
    Real customers are the logged session profiles.
    """
    profiles = dataset.session_profiles()
    if len(profiles) == 0:
        raise InsufficientDataError("GAN-SD needs at least one logged session")
    rng = make_rng(seed, STREAM_TRAINING, GANSD_STREAM_INDEX)
    model = init_gansd(profiles, cfg, rng)
    real_all = profiles.encode()
    batch = cfg.batch_size
    opt_g = make_optimizer(model.generator.parameters(), "adam", cfg.lr)
    opt_d = make_optimizer(model.discriminator.parameters(), "adam", cfg.lr)
    guard = DivergenceGuard("gansd")
    rows = []

    for iteration in range(cfg.iterations):
        diag: Dict[str, float] = {}
        g_loss = float("nan")
        for _ in range(cfg.gen_steps):
            z = rng.standard_normal((batch, model.noise_dim))
            soft, cache = model.generate(z)
            g_loss, grad_soft, diag = generator_loss_and_grad(
                soft, model.data_types, model.discriminator, model.alpha, model.beta
            )
            grads = model.generator_backward(cache, soft, grad_soft)
            model.generator = apply_gradients(model.generator, opt_g, grads)

        real = real_all[rng.integers(0, real_all.shape[0], size=batch)]
        fake = model.soft_outputs(rng.standard_normal((batch, model.noise_dim)))
        disc = model.discriminator
        real_out, real_cache = disc.forward_cache(real)
        fake_out, fake_cache = disc.forward_cache(fake)
        d_loss, grad_real, grad_fake = bernoulli_loss_grads(real_out, fake_out)
        grads = disc.backward_from_cache(real_cache, grad_real)[0] + disc.backward_from_cache(fake_cache, grad_fake)[0]
        model.discriminator = apply_gradients(disc, opt_d, grads)

        guard.check(iteration, d_loss=d_loss, g_loss=g_loss)
        rows.append({
            "iter": iteration,
            "d_loss": d_loss,
            "g_loss": g_loss,
            "type_entropy": diag.get("type_entropy", float("nan")),
            "type_kl": diag.get("type_kl", float("nan")),
        })
        logger.training_debug(
            f"d_loss={d_loss:.4f} g_loss={g_loss:.4f}", operation="train_gansd", iteration=iteration
        )

    curve = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    if rows:
        last = rows[-1]
        logger.training_info(
            f"GAN-SD finished {cfg.iterations} iterations: d_loss={last['d_loss']:.4f} "
            f"g_loss={last['g_loss']:.4f} type_kl={last['type_kl']:.4f}",
            operation="train_gansd",
        )
    return GansdTrainingResult(model, curve)


# persistence

def gansd_to_tensors(model: GansdModel) -> Dict[str, np.ndarray]:
    tensors = {}
    tensors.update(mlp_to_tensors(model.generator, "generator"))
    tensors.update(mlp_to_tensors(model.discriminator, "discriminator"))
    tensors["gansd.hyper"] = np.array([model.alpha, model.beta, model.batch_size, model.gen_steps], dtype=np.float64)
    tensors["gansd.data_types"] = model.data_types.as_vector()
    return tensors


def gansd_from_tensors(tensors: Dict[str, np.ndarray]) -> GansdModel:
    hyper = tensors["gansd.hyper"]
    types = tensors["gansd.data_types"]
    blocks, start = [], 0
    for size in TYPE_BLOCKS:
        blocks.append(np.array(types[start:start + size]))
        start += size
    return GansdModel(
        mlp_from_tensors(tensors, "generator"),
        mlp_from_tensors(tensors, "discriminator"),
        TypeDistribution(tuple(blocks)),
        alpha=float(hyper[0]),
        beta=float(hyper[1]),
        batch_size=int(hyper[2]),
        gen_steps=int(hyper[3]),
    )


def save_gansd(model: GansdModel, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, gansd_to_tensors(model))


def load_gansd(path: Union[str, Path]) -> GansdModel:
    return gansd_from_tensors(load_checkpoint(path, producer="fit-gansd"))
