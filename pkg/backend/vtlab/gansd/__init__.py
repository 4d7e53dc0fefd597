"""Customer generator learned with entropy- and KL-regularized adversarial training."""
from .model import (
    GansdModel,
    GansdSampler,
    TypeDistribution,
    gansd_discriminator_loss,
    gansd_generator_loss,
    generator_loss_and_grad,
    sample_customers,
    soft_marginals,
)
from .train import (
    GansdTrainingResult,
    gansd_from_tensors,
    gansd_to_tensors,
    init_gansd,
    load_gansd,
    save_gansd,
    train_gansd,
)

__all__ = [
    "GansdModel",
    "GansdSampler",
    "GansdTrainingResult",
    "TypeDistribution",
    "gansd_discriminator_loss",
    "gansd_from_tensors",
    "gansd_generator_loss",
    "gansd_to_tensors",
    "generator_loss_and_grad",
    "init_gansd",
    "load_gansd",
    "sample_customers",
    "save_gansd",
    "soft_marginals",
    "train_gansd",
]
