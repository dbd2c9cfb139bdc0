"""Fusion-level contrastive bound.

Reverse predictors map the fusion vector back to each modality embedding;
the score is the exponential of the cosine between the normalized prediction
and the normalized target (normalization stops the score being inflated by
stretching either vector). In-batch negatives give an InfoNCE-style loss.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ZeroVector
from .nn import Mlp

NORM_FLOOR = 1e-12


class ReversePredictor:
    """2-layer MLP from the fusion vector to one modality's embedding space."""

    def __init__(self, name, d_z, d_m, rng, hidden=64):
        self.name = name
        self.d_m = int(d_m)
        self.net = Mlp(name, d_z, [hidden], d_m, rng)

    def params(self):
        return self.net.params()

    def predict(self, z):
        return self.net(z if isinstance(z, Tensor) else Tensor(z))


def _check_norms(rows: np.ndarray, what: str):
    norms = np.sqrt((rows * rows).sum(axis=-1))
    if np.any(norms < NORM_FLOOR):
        raise ZeroVector(f"{what} has a row with norm < {NORM_FLOOR}")


def cosine(h_m, z, pred: ReversePredictor) -> float:
    """Cosine between the modality embedding and the prediction from z."""
    h_m = np.asarray(h_m, dtype=np.float64).reshape(1, -1)
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    g = pred.predict(z).data
    _check_norms(h_m, "modality embedding")
    _check_norms(g, "reverse prediction")
    hn = h_m[0] / np.linalg.norm(h_m[0])
    gn = g[0] / np.linalg.norm(g[0])
    return float(hn @ gn)


def score(h_m, z, pred: ReversePredictor) -> float:
    """exp(cosine); lies in [e^-1, e]."""
    return float(np.exp(cosine(h_m, z, pred)))


def cosine_matrix(pred: ReversePredictor, z_batch, h_batch) -> Tensor:
    """(N, N) cosines between predictions from Z_i (rows) and targets h_j.

    The diagonal holds the positive pairs; every other same-modality
    embedding in the batch is a negative.
    """
    z_batch = z_batch if isinstance(z_batch, Tensor) else Tensor(z_batch)
    h_batch = h_batch if isinstance(h_batch, Tensor) else Tensor(h_batch)
    g = pred.predict(z_batch)
    _check_norms(g.data, "reverse prediction")
    _check_norms(h_batch.data, "modality embedding")
    gn = ad.normalize_rows(g)
    hn = ad.normalize_rows(h_batch)
    return ad.matmul(gn, ad.transpose(hn))


def score_matrix(pred: ReversePredictor, z_batch, h_batch) -> np.ndarray:
    """Exponentiated score matrix s_ij = exp(cos_ij), for reporting."""
    return np.exp(cosine_matrix(pred, z_batch, h_batch).data)


def nce_loss(scores: np.ndarray) -> float:
    """-mean_i log(s_ii / sum_j s_ij) on an (N, N) exponentiated score matrix."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1] or scores.shape[0] < 1:
        raise ValueError(f"expected a nonempty square score matrix, got {scores.shape}")
    diag = np.diag(scores)
    return float(-np.mean(np.log(diag / scores.sum(axis=1))))


def nce_loss_from_cosines(cos: Tensor) -> Tensor:
    """Differentiable NCE on a cosine matrix: mean_i [logsumexp_j cos_ij - cos_ii].

    Equal to nce_loss(exp(cos)); cosines are bounded so no shift is needed.
    A 1x1 matrix (no negatives) gives exactly zero.
    """
    return ad.tmean(ad.logsumexp_rows(cos) - ad.diag_part(cos))


def l_cpc(l_n_t=None, l_n_v=None, l_n_a=None) -> Tensor:
    """Sum of the per-modality contrastive losses; None drops a term."""
    total = Tensor(0.0)
    for term in (l_n_t, l_n_v, l_n_a):
        if term is not None:
            total = total + (term if isinstance(term, Tensor) else Tensor(term))
    return total
