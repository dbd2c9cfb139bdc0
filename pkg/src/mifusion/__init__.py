"""Mutual-information-regularized multimodal fusion for sentiment regression.

Training maximizes two bound families alongside the task loss: a variational
lower bound between unimodal embeddings (with GMM-based entropy estimation
over a FIFO history memory) and an in-batch contrastive bound between the
fusion vector and each modality. A seeded numpy autodiff core with a
compiled LSTM kernel keeps runs bitwise reproducible.
"""

from .kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
