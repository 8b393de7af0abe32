"""Identity world and proposal stream properties."""

import numpy as np
import pytest

from reidlab import (
    BACKGROUND,
    UNLABELED,
    ConfigError,
    GallerySizeTooSmallError,
    WorldConfig,
    build_eval_split,
    build_world,
    sample_scene_pair,
)

SMALL = WorldConfig(num_train_identities=20, num_test_identities=10, seed=5)


class TestWorldBuild:
    def test_deterministic_given_seed(self):
        a = build_world(WorldConfig(seed=3))
        b = build_world(WorldConfig(seed=3))
        np.testing.assert_array_equal(a.prototypes, b.prototypes)
        np.testing.assert_array_equal(a.observation_map, b.observation_map)

    def test_train_test_identity_sets_disjoint(self):
        world = build_world(SMALL)
        assert not set(world.train_identities) & set(world.test_identities)

    def test_prototypes_spread_and_distinct(self):
        world = build_world(WorldConfig(seed=11))
        gram = world.prototypes @ world.prototypes.T
        np.fill_diagonal(gram, 0.0)
        assert gram.max() <= 0.5 + 1e-9

    def test_within_identity_closer_than_between(self):
        """Monte Carlo: 1000 observation pairs per side."""
        world = build_world(SMALL)
        rng = np.random.default_rng(0)
        ids = rng.choice(world.train_identities, size=1000)
        within = between = 0.0
        for c in ids:
            x, y = world.observe(int(c), rng, 2)
            other = int(rng.choice(world.train_identities[world.train_identities != c]))
            z = world.observe(other, rng, 1)[0]
            within += np.linalg.norm(x - y)
            between += np.linalg.norm(x - z)
        assert within / 1000 < between / 1000

    def test_backgrounds_keep_two_sigma_margin(self):
        world = build_world(SMALL)
        rng = np.random.default_rng(1)
        backgrounds = world.observe_background(rng, 2000)
        images = world.prototypes @ world.observation_map.T
        gaps = np.linalg.norm(backgrounds[:, None, :] - images[None, :, :], axis=2)
        assert gaps.min() >= 2.0 * SMALL.observation_noise_sigma

    def test_sigma_too_large_for_background_margin(self):
        with pytest.raises(ConfigError):
            build_world(WorldConfig(observation_noise_sigma=0.3, seed=0))

    def test_invalid_configs(self):
        with pytest.raises(ConfigError):
            WorldConfig(num_train_identities=0).validate()
        with pytest.raises(ConfigError):
            WorldConfig(backgrounds_stored_per_image=40).validate()
        with pytest.raises(ConfigError):
            WorldConfig(proposals_per_identity_range=(2, 1)).validate()


class TestScenePairs:
    def test_always_at_least_one_shared_identity(self):
        world = build_world(SMALL)
        rng = np.random.default_rng(2)
        for _ in range(200):
            pair = sample_scene_pair(world, rng)
            assert len(pair.shared_identities) >= 1
            labels_a = {p.label for p in pair.proposals_a}
            labels_b = {p.label for p in pair.proposals_b}
            for c in pair.shared_identities:
                assert c in labels_a and c in labels_b

    def test_exactly_five_storage_flagged_backgrounds(self):
        world = build_world(WorldConfig(seed=9))
        rng = np.random.default_rng(3)
        pair = sample_scene_pair(world, rng)
        for side in (pair.proposals_a, pair.proposals_b):
            flagged = [p for p in side if p.label == BACKGROUND and p.store_in_dictionary]
            generated = [p for p in side if p.label == BACKGROUND]
            assert len(flagged) == 5
            assert len(generated) == 32

    def test_label_histogram_matches_configured_rates(self):
        """Counts over 1000 pairs stay within 3 sigma of expectation."""
        world = build_world(SMALL)
        rng = np.random.default_rng(4)
        trials = 1000
        counts = {"id": 0, "unlabeled": 0, "background": 0}
        for _ in range(trials):
            pair = sample_scene_pair(world, rng)
            for p in pair.proposals_a + pair.proposals_b:
                if p.label == BACKGROUND:
                    counts["background"] += 1
                elif p.label == UNLABELED:
                    counts["unlabeled"] += 1
                else:
                    counts["id"] += 1
        images = 2 * trials
        assert counts["background"] == images * 32
        # per image: 4 identities and 1 unlabeled person, 1..2 proposals each
        for key, per_image in (("id", 4 * 1.5), ("unlabeled", 1.5)):
            mean = images * per_image
            sigma = np.sqrt(images * per_image / 3.0)  # var of 1..2 uniform is 1/4 per draw
            assert abs(counts[key] - mean) < 3.0 * max(sigma, 1.0), key

    def test_deterministic_given_rng_state(self):
        world = build_world(SMALL)
        pa = sample_scene_pair(world, np.random.default_rng(77))
        pb = sample_scene_pair(world, np.random.default_rng(77))
        np.testing.assert_array_equal(
            np.stack([p.vector for p in pa.proposals_a]),
            np.stack([p.vector for p in pb.proposals_a]),
        )


class TestEvalSplit:
    def test_default_gallery_size_one_match_per_probe(self):
        world = build_world(WorldConfig(seed=13))
        queries, gallery = build_eval_split(world, 100, np.random.default_rng(5))
        assert len(gallery) == 100
        gallery_ids = [p.label for p in gallery]
        for q in queries:
            assert gallery_ids.count(q.label) == 1

    def test_single_probe_single_item_gallery(self):
        world = build_world(SMALL)
        queries, gallery = build_eval_split(world, 1, np.random.default_rng(6), num_probes=1)
        assert len(queries) == 1 and len(gallery) == 1
        assert queries[0].label == gallery[0].label

    def test_gallery_too_small_for_probes(self):
        world = build_world(SMALL)
        with pytest.raises(GallerySizeTooSmallError):
            build_eval_split(world, 3, np.random.default_rng(7), num_probes=5)
        with pytest.raises(GallerySizeTooSmallError):
            build_eval_split(world, 0, np.random.default_rng(7))

    def test_distractors_avoid_probe_identities(self):
        world = build_world(SMALL)
        queries, gallery = build_eval_split(world, 40, np.random.default_rng(8))
        probe_ids = {p.label for p in queries}
        distractors = gallery[len(queries):]
        assert all(p.label not in probe_ids for p in distractors)
