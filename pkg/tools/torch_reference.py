"""Independent cross-check of the training pipeline using torch autograd.

Trains the same objectives on the same simulated stream, but every gradient
comes from torch's autograd instead of the library's hand-written backward
passes. Used once to calibrate the end-to-end acceptance thresholds; the
numbers it prints are recorded in the acceptance suite.

Run:  python3 tools/torch_reference.py [--seed 12345] [--iterations 5000]
"""

import argparse

import numpy as np
import torch

from reidlab import default_config
from reidlab.dictionary import UNLABELED
from reidlab.simulator import build_eval_split, build_world, sample_scene_pair


def build_model(cfg, torch_seed):
    torch.manual_seed(torch_seed)
    dims = cfg.embedding.layer_dims
    layers = []
    for i in range(len(dims) - 1):
        layers.append(torch.nn.Linear(dims[i], dims[i + 1]))
        if i < len(dims) - 2:
            layers.append(torch.nn.ReLU())
    net = torch.nn.Sequential(*layers)
    with torch.no_grad():
        final = [m for m in net if isinstance(m, torch.nn.Linear)][-1]
        final.weight *= 0.1
        final.bias *= 0.0
    head = torch.nn.Linear(cfg.embedding.embed_dim, cfg.world.num_train_identities + 1)
    with torch.no_grad():
        head.weight *= 0.0
        head.bias *= 0.0
    return net, head


def embed(net, x):
    v = net(x)
    return v / v.norm(dim=1, keepdim=True)


def train(cfg, mode):
    world = build_world(cfg.world)
    _, scene_ss, select_ss, eval_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    scene_rng = np.random.default_rng(scene_ss)
    select_rng = np.random.default_rng(select_ss)
    eval_rng = np.random.default_rng(eval_ss)

    net, head = build_model(cfg, torch_seed=cfg.seed)
    params = list(net.parameters()) + list(head.parameters())
    opt = torch.optim.SGD(params, lr=cfg.sgd.base_lr)
    drop_at = int(np.floor(cfg.sgd.drop_fraction * cfg.total_iterations))

    dict_feats: list[torch.Tensor] = []
    dict_labels: list[int] = []
    num_classes = cfg.world.num_train_identities + 1

    for it in range(cfg.total_iterations):
        lr = cfg.sgd.base_lr if it < drop_at else cfg.sgd.drop_lr
        for group in opt.param_groups:
            group["lr"] = lr

        pair = sample_scene_pair(world, scene_rng)
        proposals = pair.proposals_a + pair.proposals_b
        labels = np.asarray([p.label for p in proposals])
        inputs = torch.tensor(np.stack([p.vector for p in proposals]), dtype=torch.float64)
        features = embed(net, inputs)
        n_a = len(pair.proposals_a)

        if dict_feats:
            bank = torch.stack(dict_feats)
            bank_labels = np.asarray(dict_labels)
        else:
            bank, bank_labels = None, None

        # symmetric subgroups, anchor-only gradient via detached partners
        terms = []
        hard_stats = []
        for c in pair.shared_identities:
            rows_a = np.flatnonzero(labels[:n_a] == c)
            rows_b = n_a + np.flatnonzero(labels[n_a:] == c)
            negatives = None
            if bank is not None:
                keep = np.flatnonzero(bank_labels != c)
                if keep.size:
                    negatives = bank[torch.tensor(keep)]
                    neg_labels = bank_labels[keep]
            pairs = [(a, b) for a in rows_a for b in rows_b][: cfg.max_pairs_per_identity]
            for a, b in pairs:
                for anchor, positive in ((a, b), (b, a)):
                    xa = features[anchor]
                    xp = features[positive].detach()
                    d_pos = (xa * xp).sum()
                    if negatives is None:
                        terms.append(d_pos * 0.0)
                    else:
                        d_neg = negatives @ xa
                        logits = torch.cat([d_pos.view(1), d_neg])
                        terms.append(-torch.log_softmax(logits, 0)[0])
                        hard_stats.append((d_neg.detach().numpy(), neg_labels))
        olp = torch.stack(terms).mean() if terms else torch.tensor(0.0)

        hep = torch.tensor(0.0)
        if mode != "olp_only":
            rows = np.flatnonzero(labels != UNLABELED)
            true_classes = labels[rows]
            if mode == "olp_softmax":
                pool = np.arange(num_classes)
            else:
                seen = dict.fromkeys(int(c) for c in true_classes)
                for distances, neg_labels in hard_stats:
                    labeled = np.flatnonzero(neg_labels != UNLABELED)
                    order = labeled[np.argsort(-distances[labeled], kind="stable")]
                    for idx in order[: cfg.hep.hard_per_subgroup]:
                        seen.setdefault(int(neg_labels[idx]))
                pool = list(seen)
                if len(pool) < cfg.hep.num_selected:
                    rest = np.setdiff1d(np.arange(num_classes), np.asarray(pool))
                    pool += select_rng.permutation(rest)[: cfg.hep.num_selected - len(pool)].tolist()
                pool = np.asarray(pool)
            position = {int(c): j for j, c in enumerate(pool)}
            cols = torch.tensor([position[int(c)] for c in true_classes])
            logits = head(features[torch.tensor(rows)])[:, torch.tensor(pool)]
            hep = torch.nn.functional.cross_entropy(logits, cols)

        opt.zero_grad()
        (olp + hep).backward()
        opt.step()

        with torch.no_grad():
            stored = embed(net, inputs)
        for p, u in zip(proposals, stored):
            if p.store_in_dictionary:
                dict_feats.append(u)
                dict_labels.append(p.label)
        if len(dict_feats) > cfg.dictionary_capacity:
            dict_feats = dict_feats[-cfg.dictionary_capacity :]
            dict_labels = dict_labels[-cfg.dictionary_capacity :]

    return world, net, eval_rng


def evaluate_model(world, net, gallery_size, rng, splits=5):
    top1s, maps = [], []
    for t in range(splits):
        queries, gallery = build_eval_split(world, gallery_size, np.random.default_rng(5000 + t))
        with torch.no_grad():
            qf = embed(net, torch.tensor(np.stack([p.vector for p in queries]))).numpy()
            gf = embed(net, torch.tensor(np.stack([p.vector for p in gallery]))).numpy()
        qids = np.asarray([p.label for p in queries])
        gids = np.asarray([p.label for p in gallery])
        order = np.argsort(-(qf @ gf.T), axis=1)
        ranks = np.asarray(
            [np.flatnonzero(gids[order[i]] == qids[i])[0] + 1 for i in range(len(qids))]
        )
        top1s.append((ranks == 1).mean())
        maps.append((1.0 / ranks).mean())
    return float(np.mean(top1s)), float(np.mean(maps))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--iterations", type=int, default=5000)
    args = parser.parse_args()

    torch.set_default_dtype(torch.float64)
    cfg = default_config(seed=args.seed, total_iterations=args.iterations)
    for mode in ("olp_only", "olp_softmax", "olp_hep"):
        world, net, eval_rng = train(cfg, mode)
        top1, mean_ap = evaluate_model(world, net, cfg.gallery_size, eval_rng)
        print(f"{mode:12s} top1={top1:.3f} map={mean_ap:.3f} (5-split average)")


if __name__ == "__main__":
    main()
