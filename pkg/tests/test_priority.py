"""Hard-example-priority softmax: class selection, masked loss, gradients."""

import math

import numpy as np
import pytest

from reidlab import (
    ClassifierHead,
    HepBatch,
    HepConfig,
    SelectionPool,
    TrueClassNotSelectedError,
    full_pool,
    priority_softmax_gradient,
    priority_softmax_loss,
    select_classes,
)
from reidlab.verification import check_priority_softmax, random_unit


def make_head(num_classes, dim, seed=0, scale=1.0):
    head = ClassifierHead(num_classes, dim)
    rng = np.random.default_rng(seed)
    head.weight = scale * rng.normal(size=(num_classes, dim)) / np.sqrt(dim)
    head.bias = scale * rng.normal(size=num_classes) * 0.3
    return head


class TestSelectClasses:
    def test_fill_exhausts_small_class_set(self):
        cfg = HepConfig(num_selected=5, hard_per_subgroup=20, num_classes_total=5)
        pool = select_classes(np.array([3, 2, 0]), [], cfg, np.random.default_rng(0))
        assert sorted(pool.classes.tolist()) == [0, 1, 2, 3, 4]
        assert pool.classes[:3].tolist() == [3, 2, 0]  # mandatory first, in order

    def test_top_hard_labels_all_selected(self):
        """25 distinct-labeled negatives: the 20 farthest labels enter the pool."""
        rng = np.random.default_rng(1)
        distances = rng.uniform(-1, 1, size=25)
        labels = np.arange(10, 35)
        cfg = HepConfig(num_selected=30, hard_per_subgroup=20, num_classes_total=40)
        pool = select_classes(np.array([1]), [(distances, labels)], cfg, rng)
        hardest = labels[np.argsort(-distances, kind="stable")][:20]
        assert set(hardest.tolist()) <= set(pool.classes.tolist())
        missed = labels[np.argsort(-distances, kind="stable")][20:]
        assert not set(missed.tolist()) & set(pool.classes[:21].tolist())

    def test_mandatory_overflow_keeps_everything(self):
        cfg = HepConfig(num_selected=10, hard_per_subgroup=30, num_classes_total=50)
        stats = [(np.linspace(1, -1, 20), np.arange(20, 40))]
        pool = select_classes(np.arange(5), stats, cfg, np.random.default_rng(2))
        assert len(pool) == 25  # 5 true + 20 hard, M exceeded but untrimmed

    def test_pool_size_is_target_when_mandatory_small(self):
        cfg = HepConfig(num_selected=12, hard_per_subgroup=20, num_classes_total=40)
        pool = select_classes(np.array([1, 1, 3]), [], cfg, np.random.default_rng(3))
        assert len(pool) == 12
        assert len(set(pool.classes.tolist())) == 12

    def test_unlabeled_negatives_skipped(self):
        cfg = HepConfig(num_selected=3, hard_per_subgroup=5, num_classes_total=9)
        stats = [(np.array([0.9, 0.5]), np.array([-1, 4]))]
        pool = select_classes(np.array([2]), stats, cfg, np.random.default_rng(4))
        assert pool.classes[:2].tolist() == [2, 4]
        assert -1 not in pool.classes

    def test_deterministic_under_seed(self):
        cfg = HepConfig(num_selected=15, hard_per_subgroup=4, num_classes_total=60)
        stats = [(np.linspace(0.5, -0.5, 8), np.arange(30, 38))]
        a = select_classes(np.array([3, 9]), stats, cfg, np.random.default_rng(99))
        b = select_classes(np.array([3, 9]), stats, cfg, np.random.default_rng(99))
        np.testing.assert_array_equal(a.classes, b.classes)

    def test_distance_ties_break_by_insertion_order(self):
        cfg = HepConfig(num_selected=3, hard_per_subgroup=2, num_classes_total=30)
        stats = [(np.array([0.5, 0.5, 0.5]), np.array([7, 8, 9]))]
        pool = select_classes(np.array([1]), stats, cfg, np.random.default_rng(5))
        assert pool.classes[:3].tolist() == [1, 7, 8]


class TestLoss:
    def test_uniform_logits_give_log_pool_size(self):
        head = ClassifierHead(120, 16)  # zero weights, zero bias
        batch = HepBatch(np.eye(16)[:3], np.array([5, 9, 100]))
        others = np.setdiff1d(np.arange(120), [5, 9, 100])[:97]
        pool = SelectionPool(np.r_[5, 9, 100, others].astype(np.int64))
        assert len(pool) == 100
        assert abs(priority_softmax_loss(head, batch, pool) - math.log(100)) < 1e-12

    def test_saturated_correct_logit(self):
        head = ClassifierHead(3, 4)
        head.bias = np.array([50.0, 0.0, 0.0])
        batch = HepBatch(np.eye(4)[:1], np.array([0]))
        pool = SelectionPool(np.array([0, 1, 2]))
        assert priority_softmax_loss(head, batch, pool) < 1e-20

    def test_ascending_logits_known_value(self):
        # one proposal, pooled logits (1, 2, 3), true class last
        head = ClassifierHead(3, 1)
        head.weight = np.array([[1.0], [2.0], [3.0]])
        batch = HepBatch(np.array([[1.0]]), np.array([2]))
        pool = SelectionPool(np.array([0, 1, 2]))
        expected = math.log(1.0 + math.exp(-1.0) + math.exp(-2.0))
        assert abs(priority_softmax_loss(head, batch, pool) - expected) < 1e-12

    def test_true_class_missing_from_pool(self):
        head = make_head(6, 4)
        batch = HepBatch(np.eye(4)[:1], np.array([5]))
        with pytest.raises(TrueClassNotSelectedError):
            priority_softmax_loss(head, batch, SelectionPool(np.array([0, 1])))

    def test_matches_naive_full_softmax_on_pooled_classes(self):
        """Masked path equals a brute-force softmax over the pool's logits."""
        rng = np.random.default_rng(8)
        for _ in range(25):
            num_classes = int(rng.integers(4, 12))
            pool_size = int(rng.integers(2, min(10, num_classes) + 1))
            dim = int(rng.integers(2, 6))
            head = make_head(num_classes, dim, seed=int(rng.integers(1000)))
            pool = SelectionPool(rng.permutation(num_classes)[:pool_size].astype(np.int64))
            n = int(rng.integers(1, 5))
            feats = np.stack([random_unit(rng, dim) for _ in range(n)])
            classes = rng.choice(pool.classes, size=n)
            batch = HepBatch(feats, classes)

            total = 0.0
            for i in range(n):
                logits = head.weight[pool.classes] @ feats[i] + head.bias[pool.classes]
                probs = np.exp(logits) / np.exp(logits).sum()
                total -= math.log(probs[list(pool.classes).index(classes[i])])
            assert abs(priority_softmax_loss(head, batch, pool) - total / n) < 1e-10


class TestGradient:
    def test_saturated_prediction_vanishes(self):
        head = ClassifierHead(3, 4)
        head.bias = np.array([200.0, 0.0, 0.0])
        batch = HepBatch(np.eye(4)[:1], np.array([0]))
        pool = SelectionPool(np.array([0, 1, 2]))
        wg, bg, fg = priority_softmax_gradient(head, batch, pool)
        assert np.abs(wg).max() < 1e-60 and np.abs(bg[1:]).max() < 1e-60
        assert np.abs(fg).max() < 1e-60

    def test_uniform_two_way_split(self):
        head = ClassifierHead(4, 2)  # zero head: uniform over the pool
        batch = HepBatch(np.array([[1.0, 0.0]]), np.array([2]))
        pool = SelectionPool(np.array([2, 3]))
        _, bg, _ = priority_softmax_gradient(head, batch, pool)
        np.testing.assert_allclose(bg[[2, 3]], [-0.5, 0.5])

    def test_matches_finite_differences(self):
        assert check_priority_softmax(seed=23, instances=20) < 1e-6

    def test_unselected_rows_exactly_zero(self):
        rng = np.random.default_rng(9)
        head = make_head(30, 6, seed=10)
        pool = SelectionPool(np.array([4, 11, 28]))
        feats = np.stack([random_unit(rng, 6) for _ in range(4)])
        batch = HepBatch(feats, np.array([4, 11, 11, 28]))
        wg, bg, _ = priority_softmax_gradient(head, batch, pool)
        outside = np.setdiff1d(np.arange(30), pool.classes)
        np.testing.assert_array_equal(wg[outside], 0.0)
        np.testing.assert_array_equal(bg[outside], 0.0)

    def test_full_pool_covers_class_set(self):
        cfg = HepConfig(num_selected=3, hard_per_subgroup=2, num_classes_total=7)
        np.testing.assert_array_equal(full_pool(cfg).classes, np.arange(7))
