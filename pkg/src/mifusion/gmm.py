"""Differential-entropy estimation of embedding distributions.

A two-component diagonal-Gaussian mixture keyed to sentiment polarity
(non-negative vs negative labels), with maximum-likelihood parameter
estimates over a FIFO history memory plus the current batch. The training
loop uses the constant-free quarter-log-determinant form; analysis and the
oracle tests use the full Gaussian entropy and the mixture entropy sandwich.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InsufficientSamples

VARIANCE_FLOOR = 1e-8
LOG_2PI_E = float(np.log(2.0 * np.pi * np.e))
LN2 = float(np.log(2.0))


@dataclass
class GmmClassStats:
    """Diagonal-Gaussian parameters for one polarity class.

    ``degenerate`` flags dimensions whose variance hit the floor.
    """

    mean: np.ndarray
    var: np.ndarray
    count: int
    weight: float = 0.5
    degenerate: bool = False


def estimate_class_params(samples) -> GmmClassStats:
    """Sample mean and element-wise second moment minus squared mean.

    Raises InsufficientSamples below 2 samples: a single point has no
    variance, which is the failure mode history memory exists to prevent.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError(f"expected (n, d) samples, got shape {samples.shape}")
    n = samples.shape[0]
    if n < 2:
        raise InsufficientSamples(f"need at least 2 samples per class, got {n}")
    mean = samples.mean(axis=0)
    var = (samples * samples).mean(axis=0) - mean * mean
    degenerate = bool(np.any(var < VARIANCE_FLOOR))
    return GmmClassStats(
        mean=mean, var=np.maximum(var, VARIANCE_FLOOR), count=n, degenerate=degenerate
    )


def gaussian_entropy(stats: GmmClassStats) -> float:
    """(k/2) log(2 pi e) + (1/2) sum_j log var_j, in nats."""
    k = stats.var.shape[0]
    return 0.5 * k * LOG_2PI_E + 0.5 * float(np.sum(np.log(stats.var)))


def gmm_entropy_bounds(stats_pos: GmmClassStats, stats_neg: GmmClassStats):
    """Entropy sandwich for the equal-weight two-component mixture.

    Lower bound: mean of the component entropies. Upper bound adds the
    mixing entropy log 2. The true mixture entropy always lies between.
    """
    k_l = 0.5 * (gaussian_entropy(stats_pos) + gaussian_entropy(stats_neg))
    return k_l, k_l + LN2


def entropy_train(stats_pos: GmmClassStats, stats_neg: GmmClassStats) -> float:
    """Constant-free training-time entropy: (1/4)(log det S1 + log det S2).

    Drops the additive (2 pi e)^k terms, which carry no gradient; equals the
    sandwich lower bound minus (k/2) log(2 pi e).
    """
    return 0.25 * float(np.sum(np.log(stats_pos.var)) + np.sum(np.log(stats_neg.var)))


class HistoryMemory:
    """FIFO queue of (embedding, polarity) pairs for one modality.

    Single-writer: the training loop appends batches and reads snapshots;
    eviction is strictly oldest-first once capacity is exceeded.
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = int(capacity)
        self._entries = deque()

    def __len__(self):
        return len(self._entries)

    @property
    def full(self) -> bool:
        return len(self._entries) >= self.capacity

    def update(self, embeddings, positive):
        """Append a batch of rows, then evict the oldest beyond capacity."""
        embeddings = np.asarray(embeddings, dtype=np.float64)
        positive = np.asarray(positive, dtype=bool)
        if embeddings.ndim != 2 or embeddings.shape[0] != positive.shape[0]:
            raise ValueError("embeddings and polarity flags must align")
        if embeddings.shape[0] == 0:
            raise ValueError("batch must be nonempty")
        for vec, pos in zip(embeddings, positive):
            self._entries.append((vec.copy(), bool(pos)))
        while len(self._entries) > self.capacity:
            self._entries.popleft()

    def entries(self):
        """Stored (vector, positive) pairs in insertion order."""
        return list(self._entries)

    def class_rows(self, d: int):
        """(pos_rows, neg_rows) arrays; empty classes come back as (0, d)."""
        pos = [v for v, p in self._entries if p]
        neg = [v for v, p in self._entries if not p]
        empty = np.zeros((0, d))
        return (
            np.asarray(pos) if pos else empty,
            np.asarray(neg) if neg else empty,
        )

    def all_rows(self, d: int):
        if not self._entries:
            return np.zeros((0, d))
        return np.asarray([v for v, _ in self._entries])


def _class_log_var_sum(batch: Tensor, idx: np.ndarray, history_rows: np.ndarray, label: str) -> Tensor:
    """Differentiable sum of log variances for one class.

    The class pools detached history rows with the selected current-batch
    rows; gradients flow only through the batch contribution.
    """
    n = len(idx) + history_rows.shape[0]
    if n < 2:
        raise InsufficientSamples(f"class '{label}' has {n} samples across history and batch")
    parts = []
    if history_rows.shape[0]:
        parts.append(Tensor(history_rows))
    if len(idx):
        parts.append(ad.take_rows(batch, idx))
    rows = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
    mean = ad.tmean(rows, axis=0)
    second = ad.tmean(rows * rows, axis=0)
    var = ad.clamp_min(second - mean * mean, VARIANCE_FLOOR)
    return ad.tsum(ad.log(var))


def entropy_train_batch(batch: Tensor, positive, hist_pos, hist_neg) -> Tensor:
    """Training-path counterpart of entropy_train on live batch embeddings."""
    positive = np.asarray(positive, dtype=bool)
    pos_idx = np.flatnonzero(positive)
    neg_idx = np.flatnonzero(~positive)
    pos_term = _class_log_var_sum(batch, pos_idx, hist_pos, "pos")
    neg_term = _class_log_var_sum(batch, neg_idx, hist_neg, "neg")
    return 0.25 * (pos_term + neg_term)


def entropy_train_pooled(batch: Tensor, hist_all) -> Tensor:
    """Single-Gaussian variant used when the polarity split is ablated."""
    idx = np.arange(batch.data.shape[0])
    return 0.5 * _class_log_var_sum(batch, idx, hist_all, "pooled")
