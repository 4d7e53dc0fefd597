"""Comparison methods: behavior-cloned customers and supervised engine policies."""
from .bc import BcCustomerPolicy, BcTrainingResult, bc_accuracy, load_bc, save_bc, train_bc
from .sl import SlPolicy, SlTrainingResult, load_sl, save_sl, train_sl1, train_sl2

__all__ = [
    "BcCustomerPolicy",
    "BcTrainingResult",
    "SlPolicy",
    "SlTrainingResult",
    "bc_accuracy",
    "load_bc",
    "load_sl",
    "save_bc",
    "save_sl",
    "train_bc",
    "train_sl1",
    "train_sl2",
]
