import numpy as np
import pytest

from mifusion.autodiff import Tensor
from mifusion.errors import InsufficientSamples
from mifusion.gmm import (
    LOG_2PI_E,
    VARIANCE_FLOOR,
    GmmClassStats,
    HistoryMemory,
    entropy_train,
    entropy_train_batch,
    entropy_train_pooled,
    estimate_class_params,
    gaussian_entropy,
    gmm_entropy_bounds,
)
from mifusion.numeric import grad_check, make_rng
from mifusion.synthetic import (
    mc_entropy,
    two_component_log_density,
    two_component_sampler,
)

STD_NORMAL_H = 1.4189385332046727  # (1/2) log(2 pi e)


class TestEstimateClassParams:
    def test_hand_example(self):
        stats = estimate_class_params(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert np.allclose(stats.mean, [2.0, 3.0])
        assert np.allclose(stats.var, [1.0, 1.0])
        assert stats.count == 2 and stats.weight == 0.5 and not stats.degenerate

    def test_single_sample_rejected(self):
        with pytest.raises(InsufficientSamples):
            estimate_class_params(np.array([[1.0, 2.0]]))

    def test_constant_dimension_floored_and_flagged(self):
        samples = np.array([[1.0, 5.0], [1.0, 7.0], [1.0, 6.0]])
        stats = estimate_class_params(samples)
        assert stats.var[0] == VARIANCE_FLOOR
        assert stats.degenerate

    def test_estimator_consistency(self):
        rng = make_rng(0)
        samples = rng.standard_normal((5000, 8))
        stats = estimate_class_params(samples)
        assert np.all(np.abs(stats.var - 1.0) < 0.1)  # < 10% per-dimension error
        assert np.all(np.abs(stats.mean) < 0.06)


class TestGaussianEntropy:
    def test_standard_normal_1d(self):
        stats = GmmClassStats(mean=np.zeros(1), var=np.ones(1), count=10)
        assert gaussian_entropy(stats) == pytest.approx(STD_NORMAL_H, abs=1e-12)

    def test_additivity_2d(self):
        stats = GmmClassStats(mean=np.zeros(2), var=np.ones(2), count=10)
        assert gaussian_entropy(stats) == pytest.approx(2 * STD_NORMAL_H, abs=1e-12)

    def test_unit_determinant(self):
        stats = GmmClassStats(mean=np.zeros(2), var=np.array([0.5, 2.0]), count=10)
        assert gaussian_entropy(stats) == pytest.approx(2 * STD_NORMAL_H, abs=1e-12)


class TestEntropyBounds:
    def test_arithmetic(self):
        s = GmmClassStats(mean=np.zeros(1), var=np.ones(1), count=5)
        low, high = gmm_entropy_bounds(s, s)
        assert low == pytest.approx(1.41894, abs=1e-5)
        assert high == pytest.approx(2.11209, abs=1e-5)
        assert high - low == pytest.approx(np.log(2.0), abs=1e-15)

    def test_identical_components_collapse(self):
        s = GmmClassStats(mean=np.full(3, 1.5), var=np.full(3, 0.7), count=5)
        low, _ = gmm_entropy_bounds(s, s)
        assert low == pytest.approx(gaussian_entropy(s), abs=1e-12)

    def test_separated_mixture_sandwich(self):
        s1 = GmmClassStats(mean=np.array([-10.0]), var=np.array([1.0]), count=5)
        s2 = GmmClassStats(mean=np.array([10.0]), var=np.array([1.0]), count=5)
        low, high = gmm_entropy_bounds(s1, s2)
        logp = two_component_log_density(s1.mean, s1.var, s2.mean, s2.var)
        sampler = two_component_sampler(s1.mean, s1.var, s2.mean, s2.var)
        est, se = mc_entropy(logp, sampler, 100_000, make_rng(1))
        assert low - 3 * se <= est <= high + 3 * se
        # fully separated components realize the upper bound
        assert est == pytest.approx(high, abs=4 * se + 1e-3)


class TestEntropyTrain:
    def test_unit_variance_is_zero(self):
        s = GmmClassStats(mean=np.zeros(3), var=np.ones(3), count=4)
        assert entropy_train(s, s) == 0.0

    def test_hand_value(self):
        s1 = GmmClassStats(mean=np.zeros(2), var=np.full(2, 2.0), count=4)
        s2 = GmmClassStats(mean=np.zeros(2), var=np.full(2, 3.0), count=4)
        assert entropy_train(s1, s2) == pytest.approx(np.log(36.0) / 4, abs=1e-12)

    def test_variance_scaling_shift(self):
        rng = make_rng(2)
        k = 5
        s1 = GmmClassStats(mean=np.zeros(k), var=rng.uniform(0.5, 2.0, k), count=9)
        s2 = GmmClassStats(mean=np.zeros(k), var=rng.uniform(0.5, 2.0, k), count=9)
        base = entropy_train(s1, s2)
        for c in (0.3, 4.0):
            scaled = entropy_train(
                GmmClassStats(mean=s1.mean, var=c * s1.var, count=9),
                GmmClassStats(mean=s2.mean, var=c * s2.var, count=9),
            )
            assert scaled - base == pytest.approx(0.5 * k * np.log(c), abs=1e-10)

    def test_translation_invariance(self):
        rng = make_rng(3)
        samples = rng.standard_normal((40, 4))
        shift = np.array([5.0, -2.0, 0.5, 100.0])
        a = entropy_train(estimate_class_params(samples), estimate_class_params(samples + 1.0))
        b = entropy_train(
            estimate_class_params(samples + shift),
            estimate_class_params(samples + 1.0 + shift),
        )
        assert a == pytest.approx(b, abs=1e-9)

    def test_consistency_with_lower_bound(self):
        rng = make_rng(4)
        s1 = estimate_class_params(rng.standard_normal((30, 6)) * 2.0)
        s2 = estimate_class_params(rng.standard_normal((25, 6)) + 3.0)
        k_l, _ = gmm_entropy_bounds(s1, s2)
        assert entropy_train(s1, s2) + 0.5 * 6 * LOG_2PI_E == pytest.approx(k_l, abs=1e-12)


class TestHistoryMemory:
    def test_fifo_eviction(self):
        mem = HistoryMemory(capacity=8)  # two batches of four
        for batch_id in range(3):
            vecs = np.full((4, 2), float(batch_id))
            mem.update(vecs, np.array([True, False, True, False]))
        assert len(mem) == 8
        values = [v[0] for v, _ in mem.entries()]
        assert values == [1.0] * 4 + [2.0] * 4  # batch 0 fully evicted

    def test_first_push(self):
        mem = HistoryMemory(capacity=64)
        mem.update(np.ones((4, 3)), np.array([True, True, False, False]))
        assert len(mem) == 4
        assert not mem.full

    def test_insertion_order_preserved(self):
        mem = HistoryMemory(capacity=10)
        vecs = np.arange(6, dtype=float).reshape(6, 1)
        mem.update(vecs, np.ones(6, dtype=bool))
        assert [float(v[0]) for v, _ in mem.entries()] == list(range(6))

    def test_zero_capacity_stays_empty(self):
        mem = HistoryMemory(capacity=0)
        mem.update(np.ones((4, 2)), np.ones(4, dtype=bool))
        assert len(mem) == 0
        assert mem.full

    def test_class_rows_split(self):
        mem = HistoryMemory(capacity=10)
        vecs = np.arange(8, dtype=float).reshape(4, 2)
        mem.update(vecs, np.array([True, False, False, True]))
        pos, neg = mem.class_rows(2)
        assert pos.shape == (2, 2) and neg.shape == (2, 2)
        assert np.array_equal(pos[0], vecs[0]) and np.array_equal(neg[0], vecs[1])

    def test_stored_rows_are_copies(self):
        mem = HistoryMemory(capacity=4)
        vecs = np.ones((2, 2))
        mem.update(vecs, np.array([True, False]))
        vecs[...] = 99.0
        assert np.array_equal(mem.entries()[0][0], np.ones(2))

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            HistoryMemory(4).update(np.zeros((0, 2)), np.zeros(0, dtype=bool))


class TestEntropyTrainBatch:
    def test_matches_numpy_path(self):
        rng = make_rng(5)
        batch = rng.standard_normal((12, 5))
        positive = np.array([True] * 7 + [False] * 5)
        hist_pos = rng.standard_normal((6, 5))
        hist_neg = rng.standard_normal((4, 5))
        got = entropy_train_batch(Tensor(batch, requires_grad=True), positive, hist_pos, hist_neg)
        s_pos = estimate_class_params(np.vstack([hist_pos, batch[positive]]))
        s_neg = estimate_class_params(np.vstack([hist_neg, batch[~positive]]))
        assert got.item() == pytest.approx(entropy_train(s_pos, s_neg), abs=1e-12)

    def test_insufficient_samples(self):
        batch = Tensor(np.zeros((3, 2)), requires_grad=True)
        positive = np.array([True, True, True])
        empty = np.zeros((0, 2))
        with pytest.raises(InsufficientSamples):
            entropy_train_batch(batch, positive, empty, empty)
        # one negative history row is still not enough
        with pytest.raises(InsufficientSamples):
            entropy_train_batch(batch, positive, empty, np.zeros((1, 2)))

    def test_pooled_variant(self):
        rng = make_rng(6)
        batch = rng.standard_normal((10, 3))
        hist = rng.standard_normal((5, 3))
        got = entropy_train_pooled(Tensor(batch), hist)
        stats = estimate_class_params(np.vstack([hist, batch]))
        assert got.item() == pytest.approx(0.5 * np.sum(np.log(stats.var)), abs=1e-12)

    def test_gradients_flow_only_through_batch(self):
        rng = make_rng(7)
        batch_arr = rng.standard_normal((8, 3))
        positive = np.array([True, False] * 4)
        hist_pos = rng.standard_normal((4, 3))
        hist_neg = rng.standard_normal((4, 3))
        batch = Tensor(batch_arr, requires_grad=True)

        def loss_fn():
            batch.grad = None
            out = entropy_train_batch(batch, positive, hist_pos, hist_neg)
            out.backward()
            return out.item(), [batch.grad]

        assert grad_check(loss_fn, [batch.data], eps=1e-5) < 1e-4


class TestStabilization:
    def test_history_reduces_entropy_jitter(self):
        # matches the acceptance setup: more history -> steadier estimates
        def run(capacity_batches, seed):
            rng = make_rng(seed)
            mem = HistoryMemory(capacity_batches * 16)
            series = []
            for _ in range(200):
                batch = rng.standard_normal((16, 8)) * 1.3 + 0.2
                positive = rng.random(16) < 0.5
                if positive.sum() < 2 or (~positive).sum() < 2:
                    positive[:2] = True
                    positive[2:4] = False
                hist_pos, hist_neg = mem.class_rows(8)
                value = entropy_train_batch(Tensor(batch), positive, hist_pos, hist_neg).item()
                mem.update(batch, positive)
                series.append(value)
            return np.std(series[10:])

        assert run(3, seed=11) < run(1, seed=11)
