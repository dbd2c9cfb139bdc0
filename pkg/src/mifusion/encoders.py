"""Sequence encoders: one unidirectional LSTM per modality, plus a token
embedding table for text when the input is token ids rather than precomputed
vectors. The final hidden state is the fixed-length modality embedding.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .errors import UnknownToken


@dataclass
class RawSample:
    """One clip: three feature sequences and a scalar label in [-3, 3].

    ``text`` is either an (l,) integer array of token ids or an (l, d) float
    array of precomputed vectors; ``visual`` and ``acoustic`` are (l, d)
    float arrays.
    """

    id: str
    label: float
    text: np.ndarray
    visual: np.ndarray
    acoustic: np.ndarray


def lstm_forward(w: np.ndarray, b: np.ndarray, seq: np.ndarray) -> np.ndarray:
    """Final hidden state of the cell run over ``seq`` from zero state.

    ``w`` is (4h, d+h) with gate rows stacked i, f, o, g and the step input
    [x_t, h_{t-1}]; ``b`` is (4h,). Forward only; training goes through
    LstmEncoder.encode.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    seq = np.ascontiguousarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise ValueError(f"expected an (l>=1, d) sequence, got shape {seq.shape}")
    h = w.shape[0] // 4
    if w.shape[0] != 4 * h or w.shape[1] != seq.shape[1] + h:
        raise ValueError(f"weight shape {w.shape} inconsistent with input dim {seq.shape[1]}")
    if b.shape != (4 * h,):
        raise ValueError(f"bias shape {b.shape} does not match weights")
    h_last, _ = kernels.lstm_seq_forward(w, b, seq)
    return h_last


class LstmEncoder:
    """Single-layer unidirectional LSTM over raw feature rows."""

    def __init__(self, name, d_in, d_hidden, rng):
        self.name = name
        self.d_in = int(d_in)
        self.d_hidden = int(d_hidden)
        dz = self.d_in + self.d_hidden
        scale = 1.0 / np.sqrt(dz)
        w = rng.uniform(-scale, scale, size=(4 * self.d_hidden, dz))
        b = np.zeros(4 * self.d_hidden)
        b[self.d_hidden : 2 * self.d_hidden] = 1.0  # forget-gate warm start
        self.w = Tensor(w, requires_grad=True)
        self.b = Tensor(b, requires_grad=True)

    def params(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}

    def encode(self, seqs) -> Tensor:
        """Encode a list of sequences into an (N, d_hidden) Tensor.

        Entries may be plain arrays (constants) or Tensors (embedded token
        rows), whose gradients propagate through the kernel backward pass.
        """
        w, b = self.w, self.b
        arrays = []
        for s in seqs:
            arr = s.data if isinstance(s, Tensor) else np.asarray(s, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != self.d_in:
                raise ValueError(
                    f"{self.name}: expected (l, {self.d_in}) sequences, got shape {arr.shape}"
                )
            if arr.shape[0] < 1:
                raise ValueError(f"{self.name}: empty sequence")
            arrays.append(arr)

        # group same-length sequences so each step is one GEMM over the group
        by_len = {}
        for i, a in enumerate(arrays):
            by_len.setdefault(a.shape[0], []).append(i)
        out_data = np.empty((len(seqs), self.d_hidden))
        groups = []
        for l in sorted(by_len):
            idx = np.array(by_len[l])
            x3 = np.stack([arrays[i] for i in idx])
            h_out, caches = kernels.lstm_group_forward(w.data, b.data, x3)
            out_data[idx] = h_out
            groups.append((idx, x3, caches))

        tensor_inputs = tuple(s for s in seqs if isinstance(s, Tensor))

        def bwd():
            dw = np.zeros_like(w.data)
            db = np.zeros_like(b.data)
            for idx, x3, caches in groups:
                dwg, dbg, dx3 = kernels.lstm_group_backward(w.data, x3, caches, out.grad[idx])
                dw += dwg
                db += dbg
                for row, i in enumerate(idx):
                    if isinstance(seqs[i], Tensor):
                        ad.accum_grad(seqs[i], dx3[row])
            ad.accum_grad(w, dw)
            ad.accum_grad(b, db)

        out = ad.apply_op(out_data, (w, b, *tensor_inputs), bwd)
        return out


class TextEncoder:
    """Text branch: token-id lookup + LSTM, or a passthrough over given vectors."""

    def __init__(self, name, d_hidden, rng, vocab_size=None, d_embed=32, d_in=None):
        self.name = name
        self.vocab_size = vocab_size
        if vocab_size is not None:
            self.table = Tensor(rng.normal(0.0, 0.1, size=(vocab_size, d_embed)), requires_grad=True)
            lstm_in = d_embed
        else:
            if d_in is None:
                raise ValueError("passthrough mode needs the input vector width d_in")
            self.table = None
            lstm_in = d_in
        self.lstm = LstmEncoder(f"{name}.lstm", lstm_in, d_hidden, rng)

    def params(self):
        out = dict(self.lstm.params())
        if self.table is not None:
            out[f"{self.name}.table"] = self.table
        return out

    def encode(self, seqs) -> Tensor:
        if self.table is None:
            return self.lstm.encode(seqs)
        embedded = []
        for s in seqs:
            ids = np.asarray(s)
            if ids.ndim != 1:
                raise ValueError(f"{self.name}: token mode expects 1-D id sequences")
            if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
                raise UnknownToken(
                    f"token id out of range [0, {self.vocab_size}) in {self.name}"
                )
            embedded.append(ad.take_rows(self.table, ids.astype(np.intp)))
        return self.lstm.encode(embedded)
