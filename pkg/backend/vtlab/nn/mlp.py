"""
Feed-forward networks with hand-written backpropagation.

Every learned component of the pipeline (customer generator, discriminators, policies,
value functions, supervised baselines) is an ``Mlp``: dense layers, a tanh or relu hidden
activation and one of three output activations. Besides ``forward`` and ``backward`` the
network offers a forward-mode directional derivative (``jvp``) which the trust-region
optimizer uses to form Fisher-vector products without building a graph.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from ..error_handling import NumericFaultError, RejectedInputError
from .tensor import Tensor, as_tensor, flatten, unflatten

HIDDEN_ACTIVATIONS = ("tanh", "relu")
OUTPUT_ACTIVATIONS = ("identity", "sigmoid", "softmax_blocks")


@dataclass
class MlpGrads:
    """Gradients shaped like the parameters of an ``Mlp``."""
    weights: List[Tensor]
    biases: List[Tensor]

    def as_list(self) -> List[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flat(self) -> Tensor:
        return flatten(self.as_list())

    def __add__(self, other: "MlpGrads") -> "MlpGrads":
        return MlpGrads(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, consumed by ``backward`` and ``jvp``."""
    inputs: List[Tensor]
    pre_activations: List[Tensor]
    output: Tensor
    squeezed: bool = False


@dataclass
class Mlp:
    layer_sizes: Tuple[int, ...]
    weights: List[Tensor]
    biases: List[Tensor]
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    blocks: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        self.blocks = tuple(int(b) for b in self.blocks)
        if len(self.layer_sizes) < 2 or any(s <= 0 for s in self.layer_sizes):
            raise RejectedInputError(f"invalid layer sizes {self.layer_sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise RejectedInputError(f"unknown hidden activation '{self.hidden_activation}'")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise RejectedInputError(f"unknown output activation '{self.output_activation}'")
        if self.output_activation == "softmax_blocks":
            if not self.blocks or any(b < 1 for b in self.blocks) or sum(self.blocks) > self.out_dim:
                raise RejectedInputError(
                    f"softmax blocks {self.blocks} do not fit output size {self.out_dim}"
                )
        if len(self.weights) != self.n_layers or len(self.biases) != self.n_layers:
            raise RejectedInputError("parameter count does not match layer sizes")
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[layer], self.layer_sizes[layer + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise RejectedInputError(
                    f"layer {layer} parameters have shapes {w.shape}/{b.shape}, expected {expected}"
                )

    @classmethod
    def create(
        cls,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        hidden_activation: str = "tanh",
        output_activation: str = "identity",
        blocks: Sequence[int] = (),
    ) -> "Mlp":
        """Glorot-uniform weights, zero biases."""
        sizes = tuple(int(s) for s in layer_sizes)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases, hidden_activation, output_activation, tuple(blocks))

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> List[Tensor]:
        """Parameters interleaved as [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "Mlp":
        params = list(params)
        return Mlp(
            self.layer_sizes,
            [np.array(p, dtype=np.float64) for p in params[0::2]],
            [np.array(p, dtype=np.float64) for p in params[1::2]],
            self.hidden_activation,
            self.output_activation,
            self.blocks,
        )

    def get_flat(self) -> Tensor:
        return flatten(self.parameters())

    def with_flat(self, flat: np.ndarray) -> "Mlp":
        return self.with_parameters(unflatten(np.asarray(flat, dtype=np.float64), self.parameters()))

    def grads_from_flat(self, flat: np.ndarray) -> MlpGrads:
        parts = unflatten(np.asarray(flat, dtype=np.float64), self.parameters())
        return MlpGrads(parts[0::2], parts[1::2])

    # forward

    def _check_input(self, x) -> Tuple[Tensor, bool]:
        x = as_tensor(x)
        squeezed = x.ndim == 1
        if squeezed:
            x = x[None, :]
        if x.ndim != 2 or x.shape[-1] != self.in_dim:
            raise RejectedInputError(
                f"input last dimension {x.shape[-1] if x.ndim else 0} does not match "
                f"network input size {self.in_dim}",
                details={"shape": list(x.shape), "expected_last_dim": self.in_dim},
            )
        return x, squeezed

    def _hidden(self, z: Tensor) -> Tensor:
        if self.hidden_activation == "tanh":
            return np.tanh(z)
        return np.maximum(z, 0.0)

    def _output(self, z: Tensor) -> Tensor:
        if self.output_activation == "identity":
            return z
        if self.output_activation == "sigmoid":
            return special.expit(z)
        y = z.copy()
        start = 0
        for size in self.blocks:
            y[:, start:start + size] = special.softmax(z[:, start:start + size], axis=1)
            start += size
        return y

    def forward_cache(self, x) -> Tuple[Tensor, ForwardCache]:
        x, squeezed = self._check_input(x)
        inputs, pre = [], []
        a = x
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w + b
            pre.append(z)
            a = self._hidden(z) if layer < self.n_layers - 1 else self._output(z)
        cache = ForwardCache(inputs, pre, a, squeezed)
        return (a[0] if squeezed else a), cache

    def forward(self, x) -> Tensor:
        return self.forward_cache(x)[0]

    def logits(self, x) -> Tensor:
        """Output pre-activations."""
        _, cache = self.forward_cache(x)
        z = cache.pre_activations[-1]
        return z[0] if cache.squeezed else z

    # backward

    def _output_backward(self, y: Tensor, g: Tensor) -> Tensor:
        if self.output_activation == "identity":
            return g
        if self.output_activation == "sigmoid":
            return g * y * (1.0 - y)
        dz = g.copy()
        start = 0
        for size in self.blocks:
            ys = y[:, start:start + size]
            gs = g[:, start:start + size]
            dz[:, start:start + size] = ys * (gs - np.sum(ys * gs, axis=1, keepdims=True))
            start += size
        return dz

    def _hidden_derivative(self, z: Tensor, a: Tensor) -> Tensor:
        if self.hidden_activation == "tanh":
            return 1.0 - a * a
        return (z > 0.0).astype(np.float64)

    def backward_from_cache(
        self, cache: ForwardCache, upstream, wrt_logits: bool = False
    ) -> Tuple[MlpGrads, Tensor]:
        """
        Gradients of sum(upstream * output) with respect to parameters and input.
        With ``wrt_logits`` the upstream gradient refers to the output pre-activations.
        """
        g = as_tensor(upstream, name="upstream gradient")
        if cache.squeezed and g.ndim == 1:
            g = g[None, :]
        if g.shape != cache.output.shape:
            raise RejectedInputError(
                f"upstream gradient shape {g.shape} does not match output shape {cache.output.shape}"
            )
        dz = g if wrt_logits else self._output_backward(cache.output, g)
        grads_w: List[Tensor] = [None] * self.n_layers
        grads_b: List[Tensor] = [None] * self.n_layers
        for layer in range(self.n_layers - 1, -1, -1):
            if not np.isfinite(dz).all():
                raise NumericFaultError(f"non-finite gradient at layer {layer}", layer=layer)
            a_in = cache.inputs[layer]
            grads_w[layer] = a_in.T @ dz
            grads_b[layer] = dz.sum(axis=0)
            da = dz @ self.weights[layer].T
            if layer > 0:
                dz = da * self._hidden_derivative(cache.pre_activations[layer - 1], a_in)
        if not np.isfinite(da).all():
            raise NumericFaultError("non-finite input gradient", layer=0)
        return MlpGrads(grads_w, grads_b), (da[0] if cache.squeezed else da)

    def backward(self, x, upstream) -> Tuple[MlpGrads, Tensor]:
        _, cache = self.forward_cache(x)
        return self.backward_from_cache(cache, upstream)

    def jvp(self, cache: ForwardCache, tangent: MlpGrads) -> Tensor:
        """Directional derivative of the output pre-activations along a parameter tangent."""
        dz = cache.inputs[0] @ tangent.weights[0] + tangent.biases[0]
        for layer in range(1, self.n_layers):
            a_in = cache.inputs[layer]
            da = dz * self._hidden_derivative(cache.pre_activations[layer - 1], a_in)
            dz = da @ self.weights[layer] + a_in @ tangent.weights[layer] + tangent.biases[layer]
        return dz[0] if cache.squeezed else dz


def forward(net: Mlp, x) -> Tensor:
    """Network output for ``x`` (rows are samples; a 1-D input is a single sample)."""
    return net.forward(x)


def backward(net: Mlp, x, upstream_grad) -> Tuple[MlpGrads, Tensor]:
    """Parameter gradients and input gradient of sum(upstream_grad * forward(net, x))."""
    return net.backward(x, upstream_grad)


def build_mlp(
    in_dim: int,
    out_dim: int,
    rng: np.random.Generator,
    hidden: Sequence[int] = (64, 64),
    hidden_activation: str = "tanh",
    output_activation: str = "identity",
    blocks: Sequence[int] = (),
    output_scale: Optional[float] = None,
) -> Mlp:
    """Convenience constructor; ``output_scale`` shrinks the last layer (small initial policies)."""
    net = Mlp.create((in_dim, *hidden, out_dim), rng, hidden_activation, output_activation, blocks)
    if output_scale is not None:
        net.weights[-1] = net.weights[-1] * output_scale
    return net
