"""Finite-difference verification suites for every analytic gradient.

Each suite builds seeded random instances, compares the analytic gradient
against central differences of the matching loss, and reports the worst
relative error observed. These back both the gradcheck command and the
acceptance tests.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from .gradcheck import gradient_check
from .network import EmbeddingConfig, EmbeddingNetwork, l2_normalize, l2_normalize_backward
from .pairing import Subgroup, SubgroupBatch, pairing_gradient, pairing_loss
from .priority import ClassifierHead, HepBatch, SelectionPool, \
    priority_softmax_gradient, priority_softmax_loss

GRADIENT_TOLERANCE = 1e-6

# Central differences carry ~1e-11 round-off noise, so a coordinate must be
# comfortably above that for a relative comparison at 1e-6 to be meaningful.
# Instances whose analytic gradient has a smaller (structurally nonzero)
# coordinate are redrawn.
_COORDINATE_FLOOR = 1e-4


def _fd_informative(*gradients: np.ndarray) -> bool:
    return all(np.abs(g).min() >= _COORDINATE_FLOOR for g in gradients)


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_subgroup(rng: np.random.Generator, dim: int, k: int) -> Subgroup:
    negatives = np.stack([random_unit(rng, dim) for _ in range(k)]) if k else np.zeros((0, dim))
    return Subgroup(
        anchor=random_unit(rng, dim),
        positive=random_unit(rng, dim),
        negatives=negatives,
        negative_labels=rng.integers(2, 50, size=k),
        anchor_identity=1,
    )


def check_normalization(seed: int = 0, trials: int = 25, dim: int = 16) -> float:
    """l2_normalize_backward vs finite differences of v -> w . normalize(v)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.normal(size=dim) * rng.uniform(0.5, 3.0)
        w = rng.normal(size=dim)
        err = gradient_check(
            lambda x: float(np.dot(w, l2_normalize(x))),
            l2_normalize_backward(v, w),
            v,
        )
        worst = max(worst, err)
    return worst


def check_pairing(
    seed: int = 0,
    subgroups: int = 100,
    dim: int = 32,
    negative_counts: tuple[int, ...] = (1, 4, 16, 64),
) -> float:
    """Anchor gradients vs finite differences of the batch pairing loss."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(subgroups):
        k = negative_counts[i % len(negative_counts)]
        while True:
            sg = random_subgroup(rng, dim, k)
            batch = SubgroupBatch([sg])
            grads, _ = pairing_gradient(batch)
            if _fd_informative(grads[0]):
                break

        def loss_at(anchor: np.ndarray) -> float:
            probe = SubgroupBatch([
                Subgroup(anchor, sg.positive, sg.negatives,
                         sg.negative_labels, sg.anchor_identity)
            ])
            return pairing_loss(probe)

        worst = max(worst, gradient_check(loss_at, grads[0], sg.anchor))
    return worst


def _random_hep_instance(rng: np.random.Generator, max_classes: int, max_pool: int):
    num_classes = int(rng.integers(5, max_classes + 1))
    dim = int(rng.integers(4, 9))
    n = int(rng.integers(1, 7))
    pool_size = int(rng.integers(2, min(max_pool, num_classes) + 1))
    pool = SelectionPool(rng.permutation(num_classes)[:pool_size].astype(np.int64))
    head = ClassifierHead(num_classes, dim)
    head.weight = rng.normal(0.0, 1.0 / np.sqrt(dim), size=head.weight.shape)
    head.bias = rng.normal(0.0, 0.5, size=head.bias.shape)
    features = np.stack([random_unit(rng, dim) for _ in range(n)])
    true_classes = rng.choice(pool.classes, size=n)
    return head, HepBatch(features, true_classes), pool


def check_priority_softmax(
    seed: int = 0, instances: int = 50, max_classes: int = 49, max_pool: int = 20
) -> float:
    """Head and feature gradients vs finite differences of the pooled loss."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        while True:
            head, batch, pool = _random_hep_instance(rng, max_classes, max_pool)
            weight_grad, bias_grad, feature_grad = priority_softmax_gradient(head, batch, pool)
            if _fd_informative(
                weight_grad[pool.classes], bias_grad[pool.classes], feature_grad
            ):
                break

        def loss_with_weight(w: np.ndarray) -> float:
            probe = SimpleNamespace(weight=w, bias=head.bias)
            return priority_softmax_loss(probe, batch, pool)

        def loss_with_bias(b: np.ndarray) -> float:
            probe = SimpleNamespace(weight=head.weight, bias=b)
            return priority_softmax_loss(probe, batch, pool)

        def loss_with_features(f: np.ndarray) -> float:
            return priority_softmax_loss(head, HepBatch(f, batch.true_classes), pool)

        worst = max(worst, gradient_check(loss_with_weight, weight_grad, head.weight))
        worst = max(worst, gradient_check(loss_with_bias, bias_grad, head.bias))
        worst = max(worst, gradient_check(loss_with_features, feature_grad, batch.features))
    return worst


def _ill_conditioned_for_fd(
    net: EmbeddingNetwork, inputs: np.ndarray,
    kink_margin: float = 1e-3, norm_floor: float = 0.05,
) -> bool:
    """True when finite differences would be inaccurate on this instance.

    Central differences break across the rectifier's corner, and the
    normalization layer's curvature grows as 1/||pre_norm||^3, so instances
    with a hidden pre-activation near zero or a small pre-norm row are
    redrawn rather than checked.
    """
    a = inputs
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        if i == net.num_layers - 1:
            return bool(np.any(np.linalg.norm(z, axis=1) < norm_floor))
        if np.any(np.abs(z) < kink_margin):
            return True
        # A unit inactive on every row has exactly-zero weight gradients,
        # which the relative-error metric cannot compare against fd noise.
        if np.any(~(z > 0.0).any(axis=0)):
            return True
        a = np.maximum(z, 0.0)
    return False


def check_network(seed: int = 0, trials: int = 5) -> float:
    """Full backprop vs finite differences through a scalarized objective."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        cfg = EmbeddingConfig(input_dim=5, hidden_dims=(7,), embed_dim=4)
        while True:
            net = EmbeddingNetwork(cfg, rng)
            # He-scale the projection layer: the training-time small init
            # leaves pre-norm rows too close to the normalization
            # singularity for accurate central differences.
            net.weights[-1] *= 10.0
            inputs = rng.normal(size=(3, cfg.input_dim))
            if _ill_conditioned_for_fd(net, inputs):
                continue
            net.forward(inputs)
            probe = rng.normal(size=(3, cfg.embed_dim))
            grads = net.backward(probe)
            flat_grad = np.concatenate([g.ravel() for g in net.gradient_list(grads)])
            if _fd_informative(flat_grad):
                break
        params = net.parameters()
        shapes = [p.shape for p in params]
        flat0 = np.concatenate([p.ravel() for p in params])

        def loss_at(flat: np.ndarray) -> float:
            offset = 0
            for p, shape in zip(params, shapes):
                size = int(np.prod(shape))
                p[...] = flat[offset:offset + size].reshape(shape)
                offset += size
            _, normalized = net.forward(inputs)
            net._cache = None
            return float(np.sum(probe * normalized))

        err = gradient_check(loss_at, flat_grad, flat0)
        loss_at(flat0)  # restore parameters
        worst = max(worst, err)
    return worst


def run_all_suites(seed: int = 0) -> dict[str, float]:
    return {
        "normalization": check_normalization(seed),
        "network": check_network(seed),
        "pairing": check_pairing(seed),
        "priority_softmax": check_priority_softmax(seed),
    }
