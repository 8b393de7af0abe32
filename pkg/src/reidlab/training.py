"""Training loop wiring the losses, dictionary, and optimizer together.

One iteration consumes one simulated scene pair: both images pass through
the single shared network, the pairing loss runs against the current
dictionary, the priority softmax runs over all labeled proposals, the summed
feature gradients backpropagate, and only then do the fresh features enter
the dictionary so a pair can never be its own negative.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .checkpoint import network_matrices, restore_network, save_matrices
from .config import RunConfig
from .dictionary import UNLABELED, FeatureDictionary
from .errors import NumericalFailureError
from .evaluation import EVAL_CSV_COLUMNS, EvalReport, evaluate, extract_embeddings
from .network import EmbeddingNetwork
from .optim import SgdOptimizer
from .pairing import form_subgroups, pairing_gradient, pairing_loss
from .priority import ClassifierHead, HepBatch, full_pool, priority_softmax_loss, \
    priority_softmax_gradient, select_classes
from .simulator import build_eval_split, build_world, sample_scene_pair

METRICS_CSV_COLUMNS = [
    "iteration", "lr", "olp_loss", "hep_loss", "total_loss",
    "dict_size", "pool_size", "subgroup_count",
]

CHECKPOINT_NAME = "checkpoint.bin"


@dataclass
class MetricsRow:
    iteration: int
    lr: float
    olp_loss: float
    hep_loss: float
    total_loss: float
    dict_size: int
    pool_size: int
    subgroup_count: int

    def csv_row(self) -> list:
        return [
            self.iteration,
            repr(self.lr),
            repr(self.olp_loss),
            repr(self.hep_loss),
            repr(self.total_loss),
            self.dict_size,
            self.pool_size,
            self.subgroup_count,
        ]


class TrainState:
    """Everything one training run mutates, seeded from a single value."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        seq = np.random.SeedSequence(cfg.seed)
        init_ss, scene_ss, select_ss, eval_ss = seq.spawn(4)
        self.scene_rng = np.random.default_rng(scene_ss)
        self.select_rng = np.random.default_rng(select_ss)
        self.eval_rng = np.random.default_rng(eval_ss)

        init_rng = np.random.default_rng(init_ss)
        self.world = build_world(cfg.world)
        self.net = EmbeddingNetwork(cfg.embedding, init_rng)
        self.head = ClassifierHead(cfg.hep.num_classes_total, cfg.embedding.embed_dim)
        self.dictionary = FeatureDictionary(cfg.dictionary_capacity)
        self.optimizer = SgdOptimizer(
            cfg.sgd, self.net.parameters() + self.head.parameters()
        )
        self.iteration = 0


def train_iteration(state: TrainState) -> MetricsRow:
    cfg = state.cfg
    pair = sample_scene_pair(state.world, state.scene_rng)
    proposals = pair.proposals_a + pair.proposals_b
    labels = np.asarray([p.label for p in proposals], dtype=np.int64)
    inputs = np.stack([p.vector for p in proposals])
    _, features = state.net.forward(inputs)
    n_a = len(pair.proposals_a)

    batch = form_subgroups(
        features[:n_a], labels[:n_a], features[n_a:], labels[n_a:],
        state.dictionary, cfg.max_pairs_per_identity,
    )
    feature_grads = np.zeros_like(features)
    olp_value = 0.0
    stats: list = []
    if len(batch):
        olp_value = pairing_loss(batch)
        anchor_grads, stats = pairing_gradient(batch)
        for sg, g in zip(batch.subgroups, anchor_grads):
            feature_grads[sg.anchor_row] += g

    hep_value = 0.0
    pool_size = 0
    weight_grad = np.zeros_like(state.head.weight)
    bias_grad = np.zeros_like(state.head.bias)
    if cfg.loss_mode != "olp_only":
        rows = np.flatnonzero(labels != UNLABELED)
        hep_batch = HepBatch(features[rows], labels[rows])
        if cfg.loss_mode == "olp_softmax":
            pool = full_pool(cfg.hep)
        else:
            pool = select_classes(hep_batch.true_classes, stats, cfg.hep, state.select_rng)
        hep_value = priority_softmax_loss(state.head, hep_batch, pool)
        weight_grad, bias_grad, hep_feature_grad = priority_softmax_gradient(
            state.head, hep_batch, pool
        )
        feature_grads[rows] += hep_feature_grad
        pool_size = len(pool)

    total = olp_value + hep_value
    if not np.isfinite(total):
        raise NumericalFailureError(
            f"non-finite loss at iteration {state.iteration}: "
            f"olp={olp_value!r} hep={hep_value!r}"
        )

    param_grads = state.net.backward(feature_grads)
    grads = state.net.gradient_list(param_grads) + [weight_grad, bias_grad]
    lr = state.optimizer.step(grads, state.iteration)

    for p, feature in zip(proposals, features):
        if p.store_in_dictionary:
            state.dictionary.insert(feature, p.label)

    row = MetricsRow(
        iteration=state.iteration,
        lr=lr,
        olp_loss=olp_value,
        hep_loss=hep_value,
        total_loss=total,
        dict_size=len(state.dictionary),
        pool_size=pool_size,
        subgroup_count=len(batch),
    )
    state.iteration += 1
    return row


def evaluate_state(state: TrainState, queries, gallery) -> EvalReport:
    query_features = extract_embeddings(state.net, queries)
    gallery_features = extract_embeddings(state.net, gallery)
    return evaluate(
        query_features,
        np.asarray([p.label for p in queries]),
        gallery_features,
        np.asarray([p.label for p in gallery]),
    )


@dataclass
class TrainResult:
    state: TrainState
    metrics: list[MetricsRow]
    eval_points: list[tuple[int, EvalReport]]
    checkpoint_path: str


def run_training(cfg: RunConfig, resume_from: str | None = None) -> TrainResult:
    """Train for cfg.total_iterations and write metrics, evals, checkpoint.

    Resuming restores parameters from a checkpoint and continues iteration
    numbering after any rows already in the output metrics.csv; dictionary
    and momentum state start cold.
    """
    os.makedirs(cfg.output_dir, exist_ok=True)
    state = TrainState(cfg)
    metrics_path = os.path.join(cfg.output_dir, "metrics.csv")
    eval_path = os.path.join(cfg.output_dir, "eval.csv")
    checkpoint_path = os.path.join(cfg.output_dir, CHECKPOINT_NAME)

    start_iteration = 0
    if resume_from is not None:
        from .checkpoint import load_matrices

        restore_network(state.net, load_matrices(resume_from), state.head)
        if os.path.exists(metrics_path):
            with open(metrics_path, newline="") as fh:
                rows = list(csv.reader(fh))[1:]
            if rows:
                start_iteration = int(rows[-1][0]) + 1
        state.iteration = start_iteration

    queries, gallery = build_eval_split(state.world, cfg.gallery_size, state.eval_rng)

    metrics: list[MetricsRow] = []
    eval_points: list[tuple[int, EvalReport]] = []
    mode = "a" if start_iteration > 0 else "w"
    with open(metrics_path, mode, newline="") as metrics_fh:
        writer = csv.writer(metrics_fh)
        if start_iteration == 0:
            writer.writerow(METRICS_CSV_COLUMNS)
            eval_points.append((0, evaluate_state(state, queries, gallery)))
        for _ in range(start_iteration, cfg.total_iterations):
            row = train_iteration(state)
            metrics.append(row)
            writer.writerow(row.csv_row())
            done = state.iteration
            if cfg.eval_every and done % cfg.eval_every == 0 and done < cfg.total_iterations:
                eval_points.append((done, evaluate_state(state, queries, gallery)))
    eval_points.append((state.iteration, evaluate_state(state, queries, gallery)))

    with open(eval_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", *EVAL_CSV_COLUMNS])
        for iteration, report in eval_points:
            writer.writerow([iteration, *report.csv_row()])

    save_matrices(checkpoint_path, network_matrices(state.net, state.head))
    return TrainResult(state, metrics, eval_points, checkpoint_path)
