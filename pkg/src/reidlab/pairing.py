"""Online pairing loss over symmetric subgroups.

A subgroup pits one same-identity positive pair against every dictionary
feature of a different label, through a softmax over inner products of unit
features. Each matched cross-image pair yields two subgroups, one per anchor
direction; gradients flow into anchors only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import FeatureDictionary, is_identity
from .errors import EmptyBatchError, UnnormalizedInputError

_NORM_TOLERANCE = 1e-6


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product of two unit vectors, clamped to [-1, 1].

    Higher means more similar; for unit features this equals the cosine.
    """
    for v in (a, b):
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > _NORM_TOLERANCE:
            raise UnnormalizedInputError(f"operand norm {norm!r} deviates from 1")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


@dataclass
class Subgroup:
    anchor: np.ndarray
    positive: np.ndarray
    negatives: np.ndarray          # (k, dim); may alias a shared array
    negative_labels: np.ndarray    # (k,)
    anchor_identity: int
    anchor_row: int = -1           # row into the stacked pair features
    positive_row: int = -1

    @property
    def num_negatives(self) -> int:
        return int(self.negatives.shape[0])


@dataclass
class SubgroupBatch:
    subgroups: list[Subgroup] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.subgroups)


def form_subgroups(
    features_a: np.ndarray,
    labels_a: np.ndarray,
    features_b: np.ndarray,
    labels_b: np.ndarray,
    dictionary: FeatureDictionary,
    max_pairs_per_identity: int = 2,
) -> SubgroupBatch:
    """Build the symmetric subgroup batch for one scene pair.

    For every identity present in both images, each cross-image proposal
    pair (capped per identity) emits two subgroups with swapped anchor and
    positive roles. Rows of `features_b` are addressed after `features_a`
    in anchor_row/positive_row, matching a vertically stacked feature
    matrix. Background and unlabeled proposals never pair.
    """
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    dim = features_a.shape[1] if features_a.size else features_b.shape[1]
    offset = features_a.shape[0]

    shared = [
        int(c)
        for c in dict.fromkeys(labels_a.tolist())
        if is_identity(int(c)) and (labels_b == c).any()
    ]
    batch = SubgroupBatch()
    for identity in shared:
        negatives, negative_labels = dictionary.negative_arrays(identity)
        if negatives.size == 0:
            negatives = np.zeros((0, dim))
            negative_labels = np.zeros(0, dtype=np.int64)
        rows_a = np.flatnonzero(labels_a == identity)
        rows_b = np.flatnonzero(labels_b == identity)
        pairs = [(ia, ib) for ia in rows_a for ib in rows_b][:max_pairs_per_identity]
        for ia, ib in pairs:
            fa, fb = features_a[ia], features_b[ib]
            batch.subgroups.append(
                Subgroup(fa, fb, negatives, negative_labels, identity,
                         anchor_row=int(ia), positive_row=offset + int(ib))
            )
            batch.subgroups.append(
                Subgroup(fb, fa, negatives, negative_labels, identity,
                         anchor_row=offset + int(ib), positive_row=int(ia))
            )
    return batch


def pairing_terms(
    positive_distance: float, negative_distances: np.ndarray
) -> tuple[float, float, np.ndarray]:
    """Per-subgroup loss and softmax weights from raw distances.

    Returns (loss, positive_weight, negative_weights): the weights are the
    softmax of [d_pos, d_neg...] and sum to 1; loss = -log(positive_weight),
    computed with max-subtracted exponentials.
    """
    dn = np.asarray(negative_distances, dtype=np.float64)
    if dn.size == 0:
        return 0.0, 1.0, dn
    shift = max(float(positive_distance), float(dn.max()))
    e_pos = np.exp(positive_distance - shift)
    e_neg = np.exp(dn - shift)
    total = e_pos + e_neg.sum()
    loss = shift + np.log(total) - positive_distance
    return float(loss), float(e_pos / total), e_neg / total


def _subgroup_distances(sg: Subgroup) -> tuple[float, np.ndarray]:
    # Raw bilinear inner products: keeps the loss exactly differentiable in
    # the anchor, so analytic gradients agree with finite differences.
    d_pos = float(np.dot(sg.anchor, sg.positive))
    if sg.num_negatives == 0:
        return d_pos, np.zeros(0)
    return d_pos, sg.negatives @ sg.anchor


def pairing_loss(batch: SubgroupBatch) -> float:
    """Mean negative log of the positive pair's softmax share.

    Zero exactly when every subgroup has no negatives; strictly positive
    as soon as any subgroup has one.
    """
    if len(batch) == 0:
        raise EmptyBatchError("pairing loss needs at least one subgroup")
    total = 0.0
    for sg in batch.subgroups:
        d_pos, d_neg = _subgroup_distances(sg)
        loss, _, _ = pairing_terms(d_pos, d_neg)
        total += loss
    return total / len(batch)


def pairing_gradient(
    batch: SubgroupBatch,
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Anchor gradients and negative-pair statistics, per subgroup.

    Returns (grads, stats): grads[i] is the gradient of pairing_loss with
    respect to subgroup i's anchor (the 1/m batch factor included; positives
    and negatives receive none), and stats[i] = (distances, labels) of the
    subgroup's negative pairs for downstream hard mining.
    """
    if len(batch) == 0:
        raise EmptyBatchError("pairing gradient needs at least one subgroup")
    m = len(batch)
    dim = batch.subgroups[0].anchor.size
    grads = np.zeros((m, dim))
    stats: list[tuple[np.ndarray, np.ndarray]] = []
    for i, sg in enumerate(batch.subgroups):
        d_pos, d_neg = _subgroup_distances(sg)
        _, pos_weight, neg_weights = pairing_terms(d_pos, d_neg)
        grad = (pos_weight - 1.0) * sg.positive
        if sg.num_negatives:
            grad = grad + neg_weights @ sg.negatives
        grads[i] = grad / m
        stats.append((d_neg, sg.negative_labels))
    return grads, stats
