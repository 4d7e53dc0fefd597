"""Customer behavior learned by multi-agent adversarial imitation, and the environment built from it."""
from .discriminator import (
    MailDiscriminator,
    discriminator_accuracy,
    expert_pairs,
    imitation_reward,
    mail_discriminator_update,
)
from .policy import JointData, JointPolicy, MailCustomerPolicy
from .rollout import MailTrajectories, mail_rollout
from .train import (
    MailTrainingResult,
    build_virtual_env,
    init_mail,
    load_mail,
    policy_tv_distance,
    save_mail,
    train_mail,
)

__all__ = [
    "JointData",
    "JointPolicy",
    "MailCustomerPolicy",
    "MailDiscriminator",
    "MailTrainingResult",
    "MailTrajectories",
    "build_virtual_env",
    "discriminator_accuracy",
    "expert_pairs",
    "imitation_reward",
    "init_mail",
    "load_mail",
    "mail_discriminator_update",
    "mail_rollout",
    "policy_tv_distance",
    "save_mail",
    "train_mail",
]
