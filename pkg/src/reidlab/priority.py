"""Hard-example-priority softmax over a selected class pool.

The classifier spans C+1 classes (0 = background, 1..C = identities).
Instead of the full vocabulary, each iteration's cross-entropy runs over a
pool of class indices chosen in three steps: the batch's true classes, the
hardest negative-pair classes recorded by the pairing loss, then random
fill up to the configured pool size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import UNLABELED
from .errors import ConfigError, TrueClassNotSelectedError


@dataclass(frozen=True)
class HepConfig:
    num_selected: int = 100          # target pool size M
    hard_per_subgroup: int = 20
    num_classes_total: int = 201     # C + 1

    def validate(self) -> None:
        if not (1 <= self.num_selected <= self.num_classes_total):
            raise ConfigError("hep.num_selected: must be in [1, num_classes_total]")
        if self.hard_per_subgroup < 0:
            raise ConfigError("hep.hard_per_subgroup: must be >= 0")
        if self.num_classes_total < 1:
            raise ConfigError("hep.num_classes_total: must be >= 1")


class ClassifierHead:
    """Linear classifier: logits = weight @ feature + bias.

    Rows start at zero so the first feature gradients are label-driven;
    a random head would drag features toward arbitrary directions until
    its rows align.
    """

    def __init__(self, num_classes: int, embed_dim: int):
        self.weight = np.zeros((num_classes, embed_dim))
        self.bias = np.zeros(num_classes)

    @property
    def num_classes(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> list[np.ndarray]:
        return [self.weight, self.bias]


@dataclass
class SelectionPool:
    """Ordered, duplicate-free class indices; mandatory entries lead."""

    classes: np.ndarray  # (|pool|,) int

    def __len__(self) -> int:
        return int(self.classes.size)

    def __contains__(self, cls: int) -> bool:
        return bool(np.isin(cls, self.classes))


@dataclass
class HepBatch:
    """Unit features with their true classes; unlabeled proposals excluded."""

    features: np.ndarray      # (n, embed_dim)
    true_classes: np.ndarray  # (n,) ints in 0..C

    def __len__(self) -> int:
        return int(self.true_classes.size)


def full_pool(cfg: HepConfig) -> SelectionPool:
    """The whole class set, for plain-softmax training modes."""
    return SelectionPool(np.arange(cfg.num_classes_total, dtype=np.int64))


def select_classes(
    batch_true_classes: np.ndarray,
    negative_stats: list[tuple[np.ndarray, np.ndarray]],
    cfg: HepConfig,
    rng: np.random.Generator,
) -> SelectionPool:
    """Three-step pool construction.

    1. True classes of every batch proposal, in first-seen order.
    2. Per subgroup, the classes of the hardest (largest-distance) negative
       pairs, up to hard_per_subgroup each; unlabeled entries carry no class
       and are skipped. Ties break by insertion order.
    3. Random non-repeating classes from the remainder until the pool
       reaches num_selected. A mandatory set already at or above that size
       is kept whole; the pool may exceed the target but never truncates.
    """
    cfg.validate()
    seen: dict[int, None] = {}
    for cls in np.asarray(batch_true_classes).tolist():
        seen.setdefault(int(cls), None)
    for distances, labels in negative_stats:
        labels = np.asarray(labels)
        labeled = np.flatnonzero(labels != UNLABELED)
        if labeled.size == 0:
            continue
        order = labeled[np.argsort(-np.asarray(distances)[labeled], kind="stable")]
        for idx in order[: cfg.hard_per_subgroup]:
            seen.setdefault(int(labels[idx]), None)

    pool = list(seen)
    for cls in pool:
        if not (0 <= cls < cfg.num_classes_total):
            raise ConfigError(f"class index {cls} outside [0, {cfg.num_classes_total})")
    if len(pool) < cfg.num_selected:
        remainder = np.setdiff1d(
            np.arange(cfg.num_classes_total, dtype=np.int64),
            np.asarray(pool, dtype=np.int64),
        )
        fill = rng.permutation(remainder)[: cfg.num_selected - len(pool)]
        pool.extend(int(c) for c in fill)
    return SelectionPool(np.asarray(pool, dtype=np.int64))


def _selected_log_softmax(
    head: ClassifierHead, batch: HepBatch, pool: SelectionPool
) -> tuple[np.ndarray, np.ndarray]:
    """(softmax over pooled logits, column index of each true class)."""
    positions = {int(c): j for j, c in enumerate(pool.classes)}
    try:
        true_cols = np.asarray(
            [positions[int(c)] for c in batch.true_classes], dtype=np.int64
        )
    except KeyError as exc:
        raise TrueClassNotSelectedError(
            f"true class {exc.args[0]} missing from selection pool"
        ) from None
    logits = batch.features @ head.weight[pool.classes].T + head.bias[pool.classes]
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    return exp / exp.sum(axis=1, keepdims=True), true_cols


def priority_softmax_loss(
    head: ClassifierHead, batch: HepBatch, pool: SelectionPool
) -> float:
    """Mean cross-entropy of the true class over the pooled logits."""
    probs, true_cols = _selected_log_softmax(head, batch, pool)
    n = len(batch)
    picked = probs[np.arange(n), true_cols]
    return float(-np.log(picked).sum() / n)


def priority_softmax_gradient(
    head: ClassifierHead, batch: HepBatch, pool: SelectionPool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(weight grad, bias grad, feature grad) of priority_softmax_loss.

    Weight and bias gradients are full-shape arrays, exactly zero outside
    the pooled rows.
    """
    probs, true_cols = _selected_log_softmax(head, batch, pool)
    n = len(batch)
    g = probs.copy()
    g[np.arange(n), true_cols] -= 1.0
    g /= n

    weight_grad = np.zeros_like(head.weight)
    bias_grad = np.zeros_like(head.bias)
    weight_grad[pool.classes] = g.T @ batch.features
    bias_grad[pool.classes] = g.sum(axis=0)
    feature_grad = g @ head.weight[pool.classes]
    return weight_grad, bias_grad, feature_grad
