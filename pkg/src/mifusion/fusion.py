"""Fusion network, regression head, task loss and the weighted main loss."""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import EmptyBatch
from .nn import Linear, Mlp, merge_params


class FusionNetwork:
    """concat(h_t, h_v, h_a) -> two linear+ReLU layers -> linear to the fusion dim."""

    def __init__(self, name, d_t, d_v, d_a, rng, d_hidden=128, d_z=128):
        self.name = name
        self.d_z = int(d_z)
        d_in = d_t + d_v + d_a
        self.l1 = Linear(f"{name}.l1", d_in, d_hidden, rng)
        self.l2 = Linear(f"{name}.l2", d_hidden, d_hidden, rng)
        self.l3 = Linear(f"{name}.l3", d_hidden, d_z, rng)

    def params(self):
        return merge_params(self.l1, self.l2, self.l3)

    def fuse(self, h_t, h_v, h_a) -> Tensor:
        parts = [p if isinstance(p, Tensor) else Tensor(p) for p in (h_t, h_v, h_a)]
        x = ad.concat(parts, axis=1)  # concatenation order fixed: t, v, a
        return self.l3(ad.relu(self.l2(ad.relu(self.l1(x)))))


class RegressionHead:
    """MLP from the fusion vector to a scalar; hidden=() makes it pure linear."""

    def __init__(self, name, d_z, rng, hidden=(64,)):
        self.name = name
        self.net = Mlp(name, d_z, list(hidden), 1, rng)

    def params(self):
        return self.net.params()

    def predict(self, z) -> Tensor:
        z = z if isinstance(z, Tensor) else Tensor(z)
        return ad.reshape(self.net(z), (-1,))


def task_loss(preds, truths) -> Tensor:
    """Mean absolute error."""
    preds = preds if isinstance(preds, Tensor) else Tensor(preds)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.data.shape != truths.shape:
        raise ValueError(f"prediction shape {preds.data.shape} != truth shape {truths.shape}")
    if truths.size == 0:
        raise EmptyBatch("task loss needs at least one sample")
    return ad.tmean(ad.absolute(preds - truths))


def main_loss(task, l_cpc_value, l_ba_value, alpha: float, beta: float) -> Tensor:
    """task + alpha * contrastive + beta * inter-modality bound loss."""
    if alpha < 0 or beta < 0:
        raise ValueError("loss weights must be non-negative")
    task = task if isinstance(task, Tensor) else Tensor(task)
    return task + alpha * _wrap(l_cpc_value) + beta * _wrap(l_ba_value)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)
