"""Inter-modality mutual-information lower bound.

A diagonal-Gaussian variational predictor q(y|x) approximates the true
conditional; the bound is E[log q(y|x)] + H(Y), which is valid for any q
and tight when q matches the conditional. Text is the conditioning side in
the default pairs (text->visual, text->acoustic).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Mlp, merge_params

PREDICTED_VARIANCE_FLOOR = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))

MODALITIES = ("t", "v", "a")


def validate_pair(pair: str):
    if len(pair) != 2 or pair[0] not in MODALITIES or pair[1] not in MODALITIES or pair[0] == pair[1]:
        raise ValueError(f"bad modality pair {pair!r}; expected two distinct tags from t/v/a")


class VariationalPredictor:
    """q(y|x) = N(y | mu(x), diag sigma^2(x)); two 2-layer MLPs.

    Variances go through a softplus plus a 1e-6 floor to stay positive.
    """

    def __init__(self, name, d_x, d_y, rng, hidden=64):
        self.name = name
        self.d_x = int(d_x)
        self.d_y = int(d_y)
        self.mu_net = Mlp(f"{name}.mu", d_x, [hidden], d_y, rng)
        self.var_net = Mlp(f"{name}.var", d_x, [hidden], d_y, rng)

    def params(self):
        return merge_params(self.mu_net, self.var_net)

    def mean_var(self, x):
        x = x if isinstance(x, Tensor) else Tensor(x)
        mu = self.mu_net(x)
        var = ad.softplus(self.var_net(x)) + PREDICTED_VARIANCE_FLOOR
        return mu, var


def log_likelihood_rows(pred: VariationalPredictor, x, y) -> Tensor:
    """Per-sample log q(y|x) for row-aligned (N, d) batches; (N,) Tensor."""
    y = y if isinstance(y, Tensor) else Tensor(y)
    mu, var = pred.mean_var(x)
    resid = y - mu
    per_dim = resid * resid / var + ad.log(var) + LOG_2PI
    return -0.5 * ad.tsum(per_dim, axis=1)


def q_log_likelihood(pred: VariationalPredictor, x, y) -> float:
    """log q(y|x) for a single pair of vectors, in nats."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(log_likelihood_rows(pred, x, y).data[0])


def lld_loss(preds, embeddings) -> Tensor:
    """Negative mean log-likelihood summed over the active predictor pairs.

    ``preds`` maps pair tags like "tv" to predictors; ``embeddings`` maps
    modality tags to (N, d) batches. The first tag of a pair conditions,
    the second is predicted.
    """
    if not preds:
        return Tensor(0.0)
    total = None
    for pair in sorted(preds):
        validate_pair(pair)
        pred = preds[pair]
        term = -ad.tmean(log_likelihood_rows(pred, embeddings[pair[0]], embeddings[pair[1]]))
        total = term if total is None else total + term
    return total


@dataclass
class MiEstimate:
    """One pair's bound: value = e_log_q + entropy holds exactly."""

    pair: str
    e_log_q: Tensor
    entropy: Tensor
    value: Tensor


def i_ba(pred: VariationalPredictor, x, y, entropy_term, pair="") -> MiEstimate:
    """Lower-bound estimate E[log q(y|x)] + H(Y) over a row-aligned batch.

    ``entropy_term`` is supplied by the caller: the training loop passes the
    constant-free GMM value, oracle tests pass the exact Gaussian entropy.
    """
    e_log_q = ad.tmean(log_likelihood_rows(pred, x, y))
    entropy = entropy_term if isinstance(entropy_term, Tensor) else Tensor(entropy_term)
    return MiEstimate(pair=pair, e_log_q=e_log_q, entropy=entropy, value=e_log_q + entropy)


def l_ba(*i_ba_values) -> Tensor:
    """Negated sum of the per-pair bound values."""
    total = Tensor(0.0)
    for v in i_ba_values:
        total = total + (v if isinstance(v, Tensor) else Tensor(v))
    return -total
