"""Synthetic proposal stream standing in for a detector.

An identity world holds latent prototypes for disjoint train and test
identity sets plus a background distribution. Scene pairs emit labeled
proposal vectors of three kinds: identities shared across annotations,
persons without identity (label -1), and backgrounds (label 0). Proposals
are noisy observations; there is no image geometry anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import BACKGROUND, UNLABELED
from .errors import ConfigError, GallerySizeTooSmallError

# Backgrounds live inside this radius around the origin while identity
# observations sit near the unit sphere, keeping the two separable.
_BACKGROUND_RADIUS = 0.5

# Prototypes are repelled until no pair is more similar than this, so no
# two identities are near-duplicates of each other.
_PROTOTYPE_MAX_COSINE = 0.5
_REPULSION_STEP = 0.1
_REPULSION_ROUNDS = 200


def _spread_prototypes(prototypes: np.ndarray) -> np.ndarray:
    """Push unit prototypes apart until pairwise cosine <= the cap.

    Deterministic given the input draw; converges in a handful of rounds
    for the desk-scale identity counts.
    """
    p = prototypes.copy()
    for _ in range(_REPULSION_ROUNDS):
        gram = p @ p.T
        np.fill_diagonal(gram, 0.0)
        if gram.max() <= _PROTOTYPE_MAX_COSINE:
            break
        for i, j in np.argwhere(np.triu(gram > _PROTOTYPE_MAX_COSINE, k=1)):
            gap = p[i] - p[j]
            norm = np.linalg.norm(gap)
            if norm < 1e-12:
                continue
            p[i] += _REPULSION_STEP * gap / norm
            p[j] -= _REPULSION_STEP * gap / norm
        p /= np.linalg.norm(p, axis=1, keepdims=True)
    return p


@dataclass(frozen=True)
class WorldConfig:
    num_train_identities: int = 200
    num_test_identities: int = 100
    latent_dim: int = 16
    input_dim: int = 64
    observation_noise_sigma: float = 0.15
    proposals_per_identity_range: tuple[int, int] = (1, 2)
    backgrounds_generated_per_image: int = 32
    backgrounds_stored_per_image: int = 5
    unlabeled_identities_per_image: int = 1
    identities_per_image: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.num_train_identities < 1 or self.num_test_identities < 1:
            raise ConfigError("world: identity counts must be >= 1")
        if self.observation_noise_sigma <= 0:
            raise ConfigError("world.observation_noise_sigma: must be > 0")
        lo, hi = self.proposals_per_identity_range
        if not (1 <= lo <= hi):
            raise ConfigError("world.proposals_per_identity_range: need 1 <= lo <= hi")
        if self.backgrounds_stored_per_image > self.backgrounds_generated_per_image:
            raise ConfigError("world: stored backgrounds exceed generated backgrounds")
        if self.backgrounds_stored_per_image < 0 or self.unlabeled_identities_per_image < 0:
            raise ConfigError("world: per-image counts must be >= 0")
        if self.identities_per_image < 1:
            raise ConfigError("world.identities_per_image: must be >= 1")
        if self.identities_per_image > self.num_train_identities:
            raise ConfigError("world.identities_per_image: exceeds train identities")
        if self.latent_dim < 1 or self.input_dim < 1:
            raise ConfigError("world: dims must be >= 1")

    @property
    def max_proposals_per_image(self) -> int:
        """Nominal per-image proposal count; sizes the feature dictionary."""
        persons = self.identities_per_image + self.unlabeled_identities_per_image
        return self.backgrounds_generated_per_image + persons * self.proposals_per_identity_range[1]


@dataclass
class Proposal:
    vector: np.ndarray
    label: int                  # BACKGROUND, UNLABELED, or identity in 1..C
    store_in_dictionary: bool   # backgrounds are stored only when flagged


@dataclass
class ScenePair:
    proposals_a: list[Proposal]
    proposals_b: list[Proposal]
    shared_identities: list[int]


class IdentityWorld:
    """Immutable after build; all sampling uses caller-supplied RNG streams."""

    def __init__(self, config: WorldConfig):
        config.validate()
        self.config = config
        rng = np.random.default_rng(config.seed)
        total = config.num_train_identities + config.num_test_identities
        prototypes = rng.normal(size=(total, config.latent_dim))
        prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)
        self.prototypes = _spread_prototypes(prototypes)  # rows 0..C-1 train, then test
        # Orthonormal columns: latent prototypes map to the unit sphere.
        basis, _ = np.linalg.qr(rng.normal(size=(config.input_dim, config.latent_dim)))
        self.observation_map = basis
        self.background_radius = _BACKGROUND_RADIUS

        if np.min(self._pairwise_gaps()) <= 0.0:
            raise ConfigError("world: identity prototypes collided")
        # Separability guard: background draws stay a 2-sigma band away
        # from every identity prototype image.
        margin = 1.0 - self.background_radius
        if margin < 2.0 * config.observation_noise_sigma:
            raise ConfigError(
                "world: background radius too close to identity prototypes "
                f"(margin {margin:.3f} < 2 sigma {2 * config.observation_noise_sigma:.3f})"
            )

    def _pairwise_gaps(self) -> np.ndarray:
        gram = self.prototypes @ self.prototypes.T
        np.fill_diagonal(gram, -1.0)
        return 2.0 - 2.0 * gram.max(axis=1)

    @property
    def train_identities(self) -> np.ndarray:
        """Identity labels 1..C for training."""
        return np.arange(1, self.config.num_train_identities + 1)

    @property
    def test_identities(self) -> np.ndarray:
        c = self.config.num_train_identities
        return np.arange(c + 1, c + self.config.num_test_identities + 1)

    def _prototype_image(self, identity: int) -> np.ndarray:
        return self.observation_map @ self.prototypes[identity - 1]

    def observe(self, identity: int, rng: np.random.Generator, count: int = 1) -> np.ndarray:
        """Noisy observations of an identity, each a row."""
        center = self._prototype_image(identity)
        noise = rng.normal(0.0, self.config.observation_noise_sigma,
                           size=(count, self.config.input_dim))
        return center + noise

    def observe_unlabeled(self, rng: np.random.Generator, count: int = 1) -> np.ndarray:
        """Observations of a transient person with no identity record."""
        latent = rng.normal(size=self.config.latent_dim)
        latent /= np.linalg.norm(latent)
        center = self.observation_map @ latent
        noise = rng.normal(0.0, self.config.observation_noise_sigma,
                           size=(count, self.config.input_dim))
        return center + noise

    def observe_background(self, rng: np.random.Generator, count: int = 1) -> np.ndarray:
        """Background clutter inside the guarded radius."""
        directions = rng.normal(size=(count, self.config.input_dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = rng.uniform(0.0, self.background_radius, size=(count, 1))
        return directions * radii


def build_world(config: WorldConfig) -> IdentityWorld:
    return IdentityWorld(config)


def _sample_image(
    world: IdentityWorld, identities: np.ndarray, rng: np.random.Generator
) -> list[Proposal]:
    cfg = world.config
    lo, hi = cfg.proposals_per_identity_range
    proposals: list[Proposal] = []
    for identity in identities:
        count = int(rng.integers(lo, hi + 1))
        for row in world.observe(int(identity), rng, count):
            proposals.append(Proposal(row, int(identity), True))
    for _ in range(cfg.unlabeled_identities_per_image):
        count = int(rng.integers(lo, hi + 1))
        for row in world.observe_unlabeled(rng, count):
            proposals.append(Proposal(row, UNLABELED, True))
    n_bg = cfg.backgrounds_generated_per_image
    stored = set(
        rng.choice(n_bg, size=cfg.backgrounds_stored_per_image, replace=False).tolist()
    ) if n_bg else set()
    for j, row in enumerate(world.observe_background(rng, n_bg)):
        proposals.append(Proposal(row, BACKGROUND, j in stored))
    return proposals


def sample_scene_pair(world: IdentityWorld, rng: np.random.Generator) -> ScenePair:
    """Draw two co-annotated scenes guaranteed to share an identity."""
    cfg = world.config
    train = world.train_identities
    shared = int(rng.choice(train))
    others = train[train != shared]
    extra = cfg.identities_per_image - 1
    ids_a = np.concatenate(([shared], rng.choice(others, size=extra, replace=False)))
    ids_b = np.concatenate(([shared], rng.choice(others, size=extra, replace=False)))
    proposals_a = _sample_image(world, ids_a, rng)
    proposals_b = _sample_image(world, ids_b, rng)
    shared_ids = sorted(set(ids_a.tolist()) & set(ids_b.tolist()))
    return ScenePair(proposals_a, proposals_b, [int(c) for c in shared_ids])


def build_eval_split(
    world: IdentityWorld,
    gallery_size: int,
    rng: np.random.Generator,
    num_probes: int | None = None,
) -> tuple[list[Proposal], list[Proposal]]:
    """Probe and gallery observation sets over held-out identities.

    Each probe identity contributes one query observation and exactly one
    matching gallery observation; the gallery is padded to gallery_size
    with observations of test identities outside the probe set.
    """
    if gallery_size < 1:
        raise GallerySizeTooSmallError("gallery_size must be >= 1")
    test = world.test_identities
    if num_probes is None:
        num_probes = min(len(test) // 2, gallery_size)
    if num_probes < 1:
        raise GallerySizeTooSmallError("no probe identities available")
    if gallery_size < num_probes:
        raise GallerySizeTooSmallError(
            f"gallery_size {gallery_size} < {num_probes} probe identities"
        )
    if num_probes >= len(test) and gallery_size > num_probes:
        raise GallerySizeTooSmallError(
            "no distractor identities left outside the probe set"
        )
    probe_ids = rng.choice(test, size=num_probes, replace=False)
    distractor_pool = np.setdiff1d(test, probe_ids)

    queries = [
        Proposal(world.observe(int(c), rng)[0], int(c), False) for c in probe_ids
    ]
    gallery = [
        Proposal(world.observe(int(c), rng)[0], int(c), False) for c in probe_ids
    ]
    for _ in range(gallery_size - num_probes):
        c = int(rng.choice(distractor_pool))
        gallery.append(Proposal(world.observe(c, rng)[0], c, False))
    return queries, gallery
