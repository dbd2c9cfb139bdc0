"""Small trainable building blocks on top of the autodiff Tensors.

Parameters are Tensors owned by their layer; ``params()`` exposes them under
dotted names so the trainer, checkpoints and optimizer state can address the
whole model as one flat dictionary.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def glorot(rng, d_in: int, d_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


class Linear:
    def __init__(self, name, d_in, d_out, rng):
        self.name = name
        self.w = Tensor(glorot(rng, d_in, d_out), requires_grad=True)
        self.b = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x):
        return ad.matmul(x, self.w) + self.b

    def params(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}


class Mlp:
    """Linear stack with ReLU between layers and a linear output."""

    def __init__(self, name, d_in, hidden, d_out, rng):
        dims = [d_in, *hidden, d_out]
        self.layers = [
            Linear(f"{name}.l{k}", dims[k], dims[k + 1], rng) for k in range(len(dims) - 1)
        ]

    def __call__(self, x):
        out = self.layers[0](x)
        for layer in self.layers[1:]:
            out = layer(ad.relu(out))
        return out

    def params(self):
        out = {}
        for layer in self.layers:
            out.update(layer.params())
        return out


def merge_params(*components):
    out = {}
    for comp in components:
        for name, tensor in comp.params().items():
            if name in out:
                raise ValueError(f"duplicate parameter name {name}")
            out[name] = tensor
    return out
