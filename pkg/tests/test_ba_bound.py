import math

import numpy as np
import pytest

import mifusion.autodiff as ad
from mifusion.autodiff import Tensor
from mifusion.ba_bound import (
    MiEstimate,
    VariationalPredictor,
    i_ba,
    l_ba,
    lld_loss,
    log_likelihood_rows,
    q_log_likelihood,
)
from mifusion.numeric import grad_check, make_rng
from mifusion.synthetic import GaussianPairSpec, gen_gaussian_pair, true_gaussian_mi
from mifusion.trainer import AdamState, adam_step

from conftest import rig_constant_predictor, rig_linear_mean_1d

LOG_2PI = 1.8378770664093453
STD_NORMAL_H = 1.4189385332046727


class TestQLogLikelihood:
    def test_zero_residual_unit_variance(self):
        pred = VariationalPredictor("q", 2, 2, make_rng(0), hidden=4)
        rig_constant_predictor(pred, np.array([0.3, -0.2]), 1.0)
        got = q_log_likelihood(pred, np.zeros(2), np.array([0.3, -0.2]))
        assert got == pytest.approx(-LOG_2PI, abs=1e-9)

    def test_unit_residual(self):
        pred = VariationalPredictor("q", 1, 1, make_rng(1), hidden=4)
        rig_constant_predictor(pred, np.array([0.0]), 1.0)
        assert q_log_likelihood(pred, np.zeros(1), np.array([1.0])) == pytest.approx(
            -STD_NORMAL_H, abs=1e-9
        )

    def test_variance_four(self):
        pred = VariationalPredictor("q", 1, 1, make_rng(2), hidden=4)
        rig_constant_predictor(pred, np.array([0.0]), 4.0)
        expected = -0.5 * (math.log(4.0) + LOG_2PI)
        assert q_log_likelihood(pred, np.zeros(1), np.array([0.0])) == pytest.approx(
            expected, abs=1e-9
        )

    def test_predicted_variance_floor(self):
        pred = VariationalPredictor("q", 1, 1, make_rng(3), hidden=4)
        pred.var_net.layers[-1].b.data[...] = -60.0  # softplus underflows to 0
        _, var = pred.mean_var(np.zeros((1, 1)))
        assert var.data[0, 0] >= 1e-6


class TestLldLoss:
    def test_rigged_two_pairs(self):
        rng = make_rng(4)
        preds = {
            "tv": VariationalPredictor("q_tv", 2, 1, rng, hidden=4),
            "ta": VariationalPredictor("q_ta", 2, 1, rng, hidden=4),
        }
        rig_constant_predictor(preds["tv"], np.array([0.7]), 1.0)
        rig_constant_predictor(preds["ta"], np.array([-0.4]), 1.0)
        emb = {
            "t": np.zeros((5, 2)),
            "v": np.full((5, 1), 0.7),
            "a": np.full((5, 1), -0.4),
        }
        # per pair and sample: log q = -(1/2) log 2pi
        assert lld_loss(preds, emb).item() == pytest.approx(LOG_2PI, abs=1e-9)

    def test_single_sample_equals_sum(self):
        rng = make_rng(5)
        preds = {"tv": VariationalPredictor("q_tv", 3, 2, rng, hidden=4)}
        x = rng.normal(size=(1, 3))
        y = rng.normal(size=(1, 2))
        got = lld_loss(preds, {"t": x, "v": y}).item()
        assert got == pytest.approx(-q_log_likelihood(preds["tv"], x[0], y[0]), abs=1e-12)

    def test_duplication_invariance(self):
        rng = make_rng(6)
        preds = {"tv": VariationalPredictor("q_tv", 3, 2, rng, hidden=4)}
        x = rng.normal(size=(4, 3))
        y = rng.normal(size=(4, 2))
        single = lld_loss(preds, {"t": x, "v": y}).item()
        doubled = lld_loss(preds, {"t": np.vstack([x, x]), "v": np.vstack([y, y])}).item()
        assert doubled == pytest.approx(single, abs=1e-12)

    def test_empty_pair_set(self):
        assert lld_loss({}, {}).item() == 0.0

    def test_bad_pair_tag(self):
        rng = make_rng(7)
        preds = {"tt": VariationalPredictor("q_tt", 2, 2, rng, hidden=4)}
        with pytest.raises(ValueError):
            lld_loss(preds, {"t": np.zeros((2, 2))})


class TestIBa:
    def test_arithmetic(self):
        pred = VariationalPredictor("q", 1, 1, make_rng(8), hidden=4)
        rig_constant_predictor(pred, np.array([0.0]), 1.0)
        y = np.zeros((10, 1))  # zero residual: E log q = -(1/2) log 2pi = -0.91894
        est = i_ba(pred, np.zeros((10, 1)), y, STD_NORMAL_H, pair="tv")
        assert isinstance(est, MiEstimate)
        assert est.e_log_q.item() == pytest.approx(-0.91894, abs=1e-5)
        assert est.value.item() == pytest.approx(0.5, abs=1e-9)
        assert est.value.item() == est.e_log_q.item() + est.entropy.item()

    def test_independence_gives_zero(self):
        rng = make_rng(9)
        pred = VariationalPredictor("q", 1, 1, rng, hidden=4)
        rig_constant_predictor(pred, np.array([0.0]), 1.0)  # q = true marginal N(0, 1)
        x = rng.standard_normal((20_000, 1))
        y = rng.standard_normal((20_000, 1))
        est = i_ba(pred, x, y, STD_NORMAL_H, pair="tv")
        se = 3.0 / math.sqrt(20_000)
        assert abs(est.value.item()) < 3 * se + 0.01

    def test_true_conditional_recovers_mi(self):
        spec = GaussianPairSpec(dim=1, rho=0.9)
        pred = VariationalPredictor("q", 1, 1, make_rng(10), hidden=2)
        rig_linear_mean_1d(pred, slope=0.9, var_value=1.0 - 0.9**2)
        x, y = gen_gaussian_pair(spec, make_rng(11), 100_000)
        est = i_ba(pred, x, y, STD_NORMAL_H, pair="tv")
        assert est.value.item() == pytest.approx(true_gaussian_mi(spec), abs=0.02)

    def test_bound_holds_for_any_predictor(self):
        spec = GaussianPairSpec(dim=2, rho=0.8)
        mi = true_gaussian_mi(spec)
        h_y = 2 * STD_NORMAL_H
        for seed in range(20):
            pred = VariationalPredictor("q", 2, 2, make_rng(100 + seed), hidden=8)
            x, y = gen_gaussian_pair(spec, make_rng(200 + seed), 30_000)
            ll = log_likelihood_rows(pred, x, y).data
            se = ll.std(ddof=1) / math.sqrt(len(ll))
            assert ll.mean() + h_y <= mi + 3 * se


class TestLBa:
    def test_values(self):
        assert l_ba(0.5, 0.3).item() == pytest.approx(-0.8, abs=1e-15)
        assert l_ba(0.0, 0.0).item() == 0.0
        assert l_ba(-0.2, 0.7).item() == pytest.approx(-0.5, abs=1e-15)
        assert l_ba().item() == 0.0

    def test_accepts_tensors(self):
        assert l_ba(Tensor(1.0), 2.0).item() == pytest.approx(-3.0, abs=1e-15)


class TestOptimization:
    def test_lld_decreases_on_fixed_batch(self):
        spec = GaussianPairSpec(dim=3, rho=0.7)
        good_seeds = 0
        for seed in range(5):
            rng = make_rng(300 + seed)
            x, y = gen_gaussian_pair(spec, rng, 64)
            pred = VariationalPredictor("q", 3, 3, rng, hidden=16)
            params = pred.params()
            arrays = {n: t.data for n, t in params.items()}
            state = AdamState()
            losses = []
            for _ in range(51):
                loss = -ad.tmean(log_likelihood_rows(pred, x, y))
                losses.append(loss.item())
                for t in params.values():
                    t.grad = None
                loss.backward()
                adam_step(arrays, {n: t.data * 0 + t.grad for n, t in params.items()}, state, 5e-3)
            drops = sum(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
            if losses[-1] < losses[0] and drops >= 0.9 * (len(losses) - 1):
                good_seeds += 1
        assert good_seeds >= 4

    def test_grad_check_lld(self):
        rng = make_rng(12)
        pred = VariationalPredictor("q", 3, 2, rng, hidden=4)
        x = rng.normal(size=(6, 3))
        y = rng.normal(size=(6, 2))
        params = pred.params()
        names = sorted(params)

        def loss_fn():
            for t in params.values():
                t.grad = None
            loss = -ad.tmean(log_likelihood_rows(pred, x, y))
            loss.backward()
            return loss.item(), [params[n].grad for n in names]

        assert grad_check(loss_fn, [params[n].data for n in names], eps=1e-5) < 1e-4
