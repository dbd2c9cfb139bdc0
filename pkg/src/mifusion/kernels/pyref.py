"""Numpy reference implementation of the LSTM kernels.

The compiled extension in _lstm.pyx mirrors these functions; keep the
formulas in lockstep. Weight layout: w is (4h, d+h) with gate rows stacked
in i, f, o, g order and the step input z = [x_t, h_{t-1}]; b is (4h,).

The group interface processes a block of same-length sequences, stepping
all of them at once so the per-step weight product is a single GEMM.
"""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_group_forward(w, b, x3):
    """Forward over an (n, l, d) block of same-length sequences.

    Returns (h_out (n, h), caches) where the caches hold per-step gate
    activations (n, l, 4h), cell states, tanh(cell) and hidden states.
    """
    n, l, d = x3.shape
    h4 = w.shape[0]
    h = h4 // 4
    gates = np.empty((n, l, h4))
    cs = np.empty((n, l, h))
    tanhcs = np.empty((n, l, h))
    hs = np.empty((n, l, h))
    hprev = np.zeros((n, h))
    cprev = np.zeros((n, h))
    wt = w.T
    for t in range(l):
        z = np.concatenate([x3[:, t, :], hprev], axis=1)
        pre = z @ wt + b
        i = _sigmoid(pre[:, :h])
        f = _sigmoid(pre[:, h : 2 * h])
        o = _sigmoid(pre[:, 2 * h : 3 * h])
        g = np.tanh(pre[:, 3 * h :])
        gates[:, t, :h] = i
        gates[:, t, h : 2 * h] = f
        gates[:, t, 2 * h : 3 * h] = o
        gates[:, t, 3 * h :] = g
        c = f * cprev + i * g
        tc = np.tanh(c)
        cs[:, t, :] = c
        tanhcs[:, t, :] = tc
        hprev = o * tc
        hs[:, t, :] = hprev
        cprev = c
    return hs[:, l - 1, :].copy(), (gates, cs, tanhcs, hs)


def lstm_group_backward(w, x3, caches, dh_out):
    """Backprop gradients on the final hidden states through a block.

    Returns (dw, db, dx3).
    """
    gates, cs, tanhcs, hs = caches
    n, l, d = x3.shape
    h4 = w.shape[0]
    h = h4 // 4
    dw = np.zeros_like(w)
    db = np.zeros(h4)
    dx3 = np.zeros_like(x3)
    dh = np.array(dh_out, dtype=np.float64)
    dc = np.zeros((n, h))
    zero_block = np.zeros((n, h))
    dpre = np.empty((n, h4))
    for t in range(l - 1, -1, -1):
        i = gates[:, t, :h]
        f = gates[:, t, h : 2 * h]
        o = gates[:, t, 2 * h : 3 * h]
        g = gates[:, t, 3 * h :]
        tc = tanhcs[:, t, :]
        cprev = cs[:, t - 1, :] if t > 0 else zero_block
        hprev = hs[:, t - 1, :] if t > 0 else zero_block
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dpre[:, :h] = dc * g * i * (1.0 - i)
        dpre[:, h : 2 * h] = dc * cprev * f * (1.0 - f)
        dpre[:, 2 * h : 3 * h] = do * o * (1.0 - o)
        dpre[:, 3 * h :] = dc * i * (1.0 - g * g)
        z = np.concatenate([x3[:, t, :], hprev], axis=1)
        dw += dpre.T @ z
        db += dpre.sum(axis=0)
        dz = dpre @ w
        dx3[:, t, :] = dz[:, :d]
        dh = dz[:, d:]
        dc = dc * f
    return dw, db, dx3


def lstm_seq_forward(w, b, x):
    """Single-sequence forward; returns (h_last, per-step caches)."""
    h_out, caches = lstm_group_forward(w, b, x[None, :, :])
    return h_out[0], tuple(c[0] for c in caches)


def lstm_seq_backward(w, x, cache, dh_last):
    """Single-sequence backward; returns (dw, db, dx)."""
    caches = tuple(np.ascontiguousarray(c[None]) for c in cache)
    dh = np.asarray(dh_last, dtype=np.float64)[None, :]
    dw, db, dx3 = lstm_group_backward(w, np.ascontiguousarray(x[None]), caches, dh)
    return dw, db, dx3[0]
