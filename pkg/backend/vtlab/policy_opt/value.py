"""State-value baseline for advantage estimation."""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..nn.losses import mse
from ..nn.mlp import Mlp, build_mlp
from ..nn.optim import OptimizerState, apply_gradients, make_optimizer
from ..nn.tensor import Tensor


@dataclass
class ValueFunction:
    net: Mlp
    optimizer: OptimizerState

    @classmethod
    def create(cls, in_dim: int, rng: np.random.Generator, hidden: Sequence[int] = (64, 64),
               lr: float = 1e-3) -> "ValueFunction":
        net = build_mlp(in_dim, 1, rng, hidden=hidden)
        return cls(net, make_optimizer(net.parameters(), "adam", lr))

    def predict(self, inputs: np.ndarray) -> Tensor:
        return np.atleast_2d(self.net.forward(inputs))[:, 0]

    def loss(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        return mse(self.predict(inputs)[:, None], np.asarray(targets, dtype=np.float64)[:, None])[0]

    def fit(self, inputs: np.ndarray, targets: np.ndarray, epochs: int, batch_size: int,
            rng: np.random.Generator) -> Tuple[float, float]:
        """Minibatch Adam regression onto ``targets``; returns the full-batch loss before and after."""
        targets = np.asarray(targets, dtype=np.float64)[:, None]
        before = self.loss(inputs, targets[:, 0])
        n = inputs.shape[0]
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                out, cache = self.net.forward_cache(inputs[idx])
                _, grad = mse(out, targets[idx])
                grads, _ = self.net.backward_from_cache(cache, grad)
                self.net = apply_gradients(self.net, self.optimizer, grads)
        return before, self.loss(inputs, targets[:, 0])
