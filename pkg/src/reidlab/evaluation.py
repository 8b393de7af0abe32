"""Retrieval metrics: CMC top-k and mean average precision."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NoRelevantItemError, ShapeMismatchError

CMC_RANKS = (1, 5, 10)

EVAL_CSV_COLUMNS = ["gallery_size", "num_queries", "top1", "top5", "top10", "map"]


@dataclass
class EvalReport:
    cmc: dict[int, float]
    mAP: float
    gallery_size: int
    num_queries: int

    def csv_row(self) -> list:
        return [
            self.gallery_size,
            self.num_queries,
            *(repr(self.cmc[k]) for k in CMC_RANKS),
            repr(self.mAP),
        ]


def write_eval_csv(path, reports: list[EvalReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.csv_row())


def extract_embeddings(net, proposals) -> np.ndarray:
    """Unit feature rows for a proposal list, via inference-only forward."""
    if len(proposals) == 0:
        raise ShapeMismatchError("cannot extract embeddings from zero proposals")
    inputs = np.stack([p.vector for p in proposals])
    return net.embed(inputs)


def _rank_gallery(query_feature: np.ndarray, gallery_features: np.ndarray) -> np.ndarray:
    """Gallery indices by descending inner product; ties keep gallery order."""
    scores = gallery_features @ query_feature
    return np.argsort(-scores, kind="stable")


def average_precisions(
    query_features: np.ndarray,
    query_ids: np.ndarray,
    gallery_features: np.ndarray,
    gallery_ids: np.ndarray,
) -> np.ndarray:
    """Per-query AP by precision-at-relevant-rank averaging."""
    query_ids = np.asarray(query_ids)
    gallery_ids = np.asarray(gallery_ids)
    aps = np.zeros(len(query_ids))
    for i in range(len(query_ids)):
        order = _rank_gallery(query_features[i], gallery_features)
        hits = gallery_ids[order] == query_ids[i]
        num_rel = int(hits.sum())
        if num_rel == 0:
            raise NoRelevantItemError(f"query {i} (id {query_ids[i]}) has no gallery match")
        ranks = np.flatnonzero(hits) + 1
        precisions = np.arange(1, num_rel + 1) / ranks
        aps[i] = precisions.mean()
    return aps


def evaluate(
    query_features: np.ndarray,
    query_ids: np.ndarray,
    gallery_features: np.ndarray,
    gallery_ids: np.ndarray,
) -> EvalReport:
    """Rank the gallery per query and aggregate CMC and mAP."""
    query_ids = np.asarray(query_ids)
    gallery_ids = np.asarray(gallery_ids)
    if len(query_ids) < 1:
        raise ShapeMismatchError("need at least one query")
    if query_features.shape[0] != len(query_ids):
        raise ShapeMismatchError("query features and ids disagree in length")
    if gallery_features.shape[0] != len(gallery_ids):
        raise ShapeMismatchError("gallery features and ids disagree in length")

    num_gallery = len(gallery_ids)
    hit_counts = {k: 0 for k in CMC_RANKS}
    for i in range(len(query_ids)):
        order = _rank_gallery(query_features[i], gallery_features)
        hits = gallery_ids[order] == query_ids[i]
        if not hits.any():
            raise NoRelevantItemError(f"query {i} (id {query_ids[i]}) has no gallery match")
        first_hit = int(np.flatnonzero(hits)[0]) + 1
        for k in CMC_RANKS:
            if first_hit <= min(k, num_gallery):
                hit_counts[k] += 1
    aps = average_precisions(query_features, query_ids, gallery_features, gallery_ids)
    cmc = {k: hit_counts[k] / len(query_ids) for k in CMC_RANKS}
    return EvalReport(
        cmc=cmc,
        mAP=float(aps.mean()),
        gallery_size=num_gallery,
        num_queries=len(query_ids),
    )


def gallery_sweep(
    net, world, sizes: list[int], rng: np.random.Generator
) -> list[EvalReport]:
    """Evaluate one probe set against nested galleries of growing size.

    Distractors for a smaller gallery are a prefix of the larger one's, so
    per-query AP is exactly non-increasing across the sweep.
    """
    from .simulator import build_eval_split

    if sizes != sorted(sizes):
        raise ShapeMismatchError("gallery sizes must be ascending")
    num_probes = min(len(world.test_identities) // 2, min(sizes))
    queries, gallery = build_eval_split(world, max(sizes), rng, num_probes=num_probes)
    query_features = extract_embeddings(net, queries)
    query_ids = np.asarray([p.label for p in queries])
    gallery_features = extract_embeddings(net, gallery)
    gallery_ids = np.asarray([p.label for p in gallery])

    reports = []
    for size in sizes:
        reports.append(
            evaluate(query_features, query_ids,
                     gallery_features[:size], gallery_ids[:size])
        )
    return reports
