"""Fixed-capacity FIFO store of labeled unit features.

Labels are plain ints: BACKGROUND (0), UNLABELED (-1), or an identity index
in 1..C. The dictionary copies features at insert time; stored entries are
constants and never receive gradient.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import UnnormalizedFeatureError, ZeroCapacityError

BACKGROUND = 0
UNLABELED = -1

_NORM_TOLERANCE = 1e-6


def is_identity(label: int) -> bool:
    return label >= 1


class FeatureDictionary:
    """Ring buffer of (unit feature, label, insertion counter) entries.

    When full, each insert evicts the entry with the smallest insertion
    counter, so the contents are always the suffix of the insert sequence.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ZeroCapacityError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.next_counter = 0
        self._features: np.ndarray | None = None  # (capacity, dim), lazy
        self._labels = np.zeros(capacity, dtype=np.int64)
        self._counters = np.zeros(capacity, dtype=np.uint64)
        self._size = 0
        self._head = 0  # next write slot

    def __len__(self) -> int:
        return self._size

    def insert(self, feature: np.ndarray, label: int) -> None:
        feature = np.asarray(feature, dtype=np.float64)
        norm = float(np.linalg.norm(feature))
        if abs(norm - 1.0) > _NORM_TOLERANCE:
            raise UnnormalizedFeatureError(f"feature norm {norm!r} deviates from 1")
        if self._features is None:
            self._features = np.zeros((self.capacity, feature.size))
        self._features[self._head] = feature
        self._labels[self._head] = int(label)
        self._counters[self._head] = self.next_counter
        self.next_counter += 1
        self._head = (self._head + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        if self._size < self.capacity:
            return np.arange(self._size)
        return np.arange(self._head, self._head + self.capacity) % self.capacity

    def entries(self) -> list[tuple[np.ndarray, int, int]]:
        """(feature copy, label, insertion counter) in insertion order."""
        order = self._order()
        assert self._features is not None or self._size == 0
        return [
            (self._features[i].copy(), int(self._labels[i]), int(self._counters[i]))
            for i in order
        ]

    def labels(self) -> list[int]:
        return [int(self._labels[i]) for i in self._order()]

    def negatives_for(self, anchor_id: int) -> list[tuple[np.ndarray, int]]:
        """Every entry not labeled with the anchor identity, oldest first.

        Background and unlabeled entries always qualify as negatives.
        """
        feats, labels = self.negative_arrays(anchor_id)
        return [(feats[i], int(labels[i])) for i in range(labels.size)]

    def negative_arrays(self, anchor_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized negatives_for: (k x dim features, k labels)."""
        if anchor_id < 1:
            raise ValueError(f"anchor identity must be >= 1, got {anchor_id}")
        if self._size == 0:
            return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
        order = self._order()
        keep = order[self._labels[order] != anchor_id]
        assert self._features is not None
        return self._features[keep].copy(), self._labels[keep].copy()

    def write_snapshot(self, path) -> None:
        """Debug CSV of (insertion_counter, label, first 4 feature components)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["insertion_counter", "label", "f0", "f1", "f2", "f3"])
            for feature, label, counter in self.entries():
                head = [repr(float(x)) for x in feature[:4]]
                head += [""] * (4 - len(head))
                writer.writerow([counter, label, *head])
