import numpy as np
import pytest

import mifusion.autodiff as ad
from mifusion.encoders import LstmEncoder, TextEncoder, lstm_forward
from mifusion.errors import UnknownToken
from mifusion.numeric import grad_check, make_rng


def zero_params(h, d):
    return np.zeros((4 * h, d + h)), np.zeros(4 * h)


class TestLstmForward:
    def test_zero_weights_give_zero_hidden(self):
        w, b = zero_params(3, 2)
        seq = make_rng(0).normal(size=(7, 2))
        assert np.array_equal(lstm_forward(w, b, seq), np.zeros(3))

    def test_single_step_hand_computed(self):
        # d_in = d_hidden = 1, zero weights, biases (i, f, o) = 0 and g-bias = B:
        # i = f = o = 1/2, g = tanh(B), c = tanh(B)/2, h = tanh(c)/2
        big = 2.0
        w = np.zeros((4, 2))
        b = np.array([0.0, 0.0, 0.0, big])
        got = lstm_forward(w, b, np.array([[0.7]]))
        expected = 0.5 * np.tanh(0.5 * np.tanh(big))
        assert got[0] == pytest.approx(expected, abs=1e-15)

    def test_output_dim_independent_of_length(self):
        rng = make_rng(1)
        h, d = 6, 4
        w = rng.normal(size=(4 * h, d + h)) * 0.2
        b = rng.normal(size=4 * h) * 0.1
        for l in (1, 5, 50):
            assert lstm_forward(w, b, rng.normal(size=(l, d))).shape == (h,)

    def test_shape_validation(self):
        w, b = zero_params(3, 2)
        with pytest.raises(ValueError):
            lstm_forward(w, b, np.zeros((0, 2)))
        with pytest.raises(ValueError):
            lstm_forward(w, b, np.zeros((4, 3)))
        with pytest.raises(ValueError):
            lstm_forward(w, b[:-1], np.zeros((4, 2)))


class TestLstmEncoder:
    def test_batch_matches_lstm_forward(self):
        rng = make_rng(2)
        enc = LstmEncoder("enc", 3, 5, rng)
        seqs = [rng.normal(size=(l, 3)) for l in (4, 2, 4, 7)]
        out = enc.encode(seqs)
        for i, seq in enumerate(seqs):
            assert np.allclose(out.data[i], lstm_forward(enc.w.data, enc.b.data, seq), atol=1e-13)

    def test_determinism_bitwise(self):
        rng = make_rng(3)
        enc = LstmEncoder("enc", 4, 6, rng)
        seqs = [rng.normal(size=(5, 4)) for _ in range(3)]
        a = enc.encode(seqs).data
        b = enc.encode(seqs).data
        assert np.array_equal(a, b)

    def test_permuting_timesteps_changes_output(self):
        for seed in (0, 1, 2):
            rng = make_rng(seed)
            enc = LstmEncoder("enc", 3, 4, rng)
            seq = rng.normal(size=(6, 3))
            swapped = seq.copy()
            swapped[[1, 4]] = swapped[[4, 1]]
            a = enc.encode([seq]).data
            b = enc.encode([swapped]).data
            assert not np.allclose(a, b, atol=1e-12)

    def test_rejects_bad_inputs(self):
        enc = LstmEncoder("enc", 3, 4, make_rng(4))
        with pytest.raises(ValueError):
            enc.encode([np.zeros((0, 3))])
        with pytest.raises(ValueError):
            enc.encode([np.zeros((5, 2))])

    def test_gradients_through_scalar_head(self):
        rng = make_rng(5)
        enc = LstmEncoder("enc", 3, 4, rng)
        seqs = [rng.normal(size=(l, 3)) for l in (3, 5, 3)]
        weights = rng.normal(size=(3, 4))
        params = [enc.w.data, enc.b.data]

        def loss_fn():
            enc.w.grad = None
            enc.b.grad = None
            out = ad.tsum(enc.encode(seqs) * weights)
            out.backward()
            return out.item(), [enc.w.grad, enc.b.grad]

        assert grad_check(loss_fn, params, eps=1e-5) < 1e-4


class TestTextEncoder:
    def test_token_mode_zero_table_gives_zero(self):
        rng = make_rng(6)
        enc = TextEncoder("enc_t", 4, rng, vocab_size=11, d_embed=3)
        enc.table.data[...] = 0.0
        enc.lstm.w.data[...] = 0.0
        enc.lstm.b.data[...] = 0.0
        out = enc.encode([np.array([1, 2, 3]), np.array([4, 5])])
        assert np.array_equal(out.data, np.zeros((2, 4)))

    def test_unknown_token(self):
        enc = TextEncoder("enc_t", 4, make_rng(7), vocab_size=10, d_embed=3)
        with pytest.raises(UnknownToken):
            enc.encode([np.array([0, 10])])
        with pytest.raises(UnknownToken):
            enc.encode([np.array([-1])])

    def test_passthrough_accepts_wide_vectors(self):
        rng = make_rng(8)
        enc = TextEncoder("enc_t", 16, rng, d_in=768)
        out = enc.encode([rng.normal(size=(5, 768)), rng.normal(size=(2, 768))])
        assert out.data.shape == (2, 16)

    def test_same_tokens_same_embedding(self):
        rng = make_rng(9)
        enc = TextEncoder("enc_t", 4, rng, vocab_size=20, d_embed=5)
        ids = [np.array([3, 1, 4, 1, 5])]
        assert np.array_equal(enc.encode(ids).data, enc.encode(ids).data)

    def test_token_gradients_reach_table(self):
        rng = make_rng(10)
        enc = TextEncoder("enc_t", 3, rng, vocab_size=7, d_embed=2)
        ids = [np.array([0, 1, 1, 3]), np.array([3, 3])]
        weights = rng.normal(size=(2, 3))
        params = [enc.table.data, enc.lstm.w.data, enc.lstm.b.data]

        def loss_fn():
            for t in (enc.table, enc.lstm.w, enc.lstm.b):
                t.grad = None
            out = ad.tsum(enc.encode(ids) * weights)
            out.backward()
            return out.item(), [enc.table.grad, enc.lstm.w.grad, enc.lstm.b.grad]

        assert grad_check(loss_fn, params, eps=1e-5) < 1e-4
        # rows never looked up stay untouched
        loss_fn()
        assert np.array_equal(enc.table.grad[5], np.zeros(2))
