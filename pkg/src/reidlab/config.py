"""Run configuration and its flat JSON wire format."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ConfigError
from .network import EmbeddingConfig
from .optim import SgdConfig
from .priority import HepConfig
from .simulator import WorldConfig

LOSS_MODES = ("olp_only", "olp_softmax", "olp_hep")

DEFAULT_GALLERY_SIZES = (50, 100, 200, 400, 800)
DEFAULT_MULTIPLIERS = (20, 40, 80)


@dataclass(frozen=True)
class RunConfig:
    embedding: EmbeddingConfig
    sgd: SgdConfig
    world: WorldConfig
    hep: HepConfig
    seed: int
    dictionary_capacity_multiplier: int = 40
    loss_mode: str = "olp_hep"
    total_iterations: int = 5000
    eval_every: int = 1000
    gallery_size: int = 100
    max_pairs_per_identity: int = 2
    output_dir: str = "."
    checkpoint: str | None = None
    gallery_sizes: tuple[int, ...] = DEFAULT_GALLERY_SIZES
    multipliers: tuple[int, ...] = DEFAULT_MULTIPLIERS

    def validate(self) -> None:
        problems = []
        for cfg in (self.embedding, self.sgd, self.world, self.hep):
            try:
                cfg.validate()
            except ConfigError as exc:
                problems.append(str(exc))
        if self.embedding.input_dim != self.world.input_dim:
            problems.append("embedding.input_dim: must equal world.input_dim")
        if self.sgd.total_iterations != self.total_iterations:
            problems.append("sgd.total_iterations: must equal total_iterations")
        if self.hep.num_classes_total != self.world.num_train_identities + 1:
            problems.append("hep.num_classes_total: must equal num_train_identities + 1")
        if self.dictionary_capacity_multiplier < 1:
            problems.append("dictionary_capacity_multiplier: must be >= 1")
        if self.loss_mode not in LOSS_MODES:
            problems.append(f"loss_mode: must be one of {LOSS_MODES}")
        if self.total_iterations < 1:
            problems.append("total_iterations: must be >= 1")
        if self.eval_every < 0:
            problems.append("eval_every: must be >= 0")
        if self.gallery_size < 1:
            problems.append("gallery_size: must be >= 1")
        if self.max_pairs_per_identity < 1:
            problems.append("max_pairs_per_identity: must be >= 1")
        if self.seed is None:
            problems.append("seed: is mandatory")
        if list(self.gallery_sizes) != sorted(set(self.gallery_sizes)):
            problems.append("gallery_sizes: must be ascending and unique")
        if any(m < 1 for m in self.multipliers):
            problems.append("multipliers: must all be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def dictionary_capacity(self) -> int:
        return self.dictionary_capacity_multiplier * self.world.max_proposals_per_image

    def with_mode(self, loss_mode: str) -> "RunConfig":
        return replace(self, loss_mode=loss_mode)


_FLAT_KEYS = {
    "input_dim", "hidden_dims", "embed_dim",
    "base_lr", "drop_lr", "drop_fraction", "momentum",
    "num_train_identities", "num_test_identities", "latent_dim",
    "observation_noise_sigma", "proposals_per_identity_range",
    "backgrounds_generated_per_image", "backgrounds_stored_per_image",
    "unlabeled_identities_per_image", "identities_per_image", "world_seed",
    "num_selected", "hard_per_subgroup",
    "dictionary_capacity_multiplier", "loss_mode", "total_iterations",
    "eval_every", "gallery_size", "max_pairs_per_identity",
    "checkpoint", "gallery_sizes", "multipliers", "seed",
}


def config_from_flat(flat: dict, seed: int, output_dir: str = ".") -> RunConfig:
    """Build a RunConfig from a flat key/value document.

    Unknown keys are rejected so typos fail loudly. The seed argument wins
    over any seed key in the document.
    """
    unknown = sorted(set(flat) - _FLAT_KEYS)
    if unknown:
        raise ConfigError("; ".join(f"{k}: unknown config key" for k in unknown))

    def get(key, default):
        return flat.get(key, default)

    total_iterations = int(get("total_iterations", 5000))
    embedding = EmbeddingConfig(
        input_dim=int(get("input_dim", 64)),
        hidden_dims=tuple(int(h) for h in get("hidden_dims", ())),
        embed_dim=int(get("embed_dim", 32)),
    )
    sgd = SgdConfig(
        base_lr=float(get("base_lr", 0.001)),
        drop_lr=float(get("drop_lr", 0.0001)),
        drop_fraction=float(get("drop_fraction", 5.0 / 6.0)),
        momentum=float(get("momentum", 0.0)),
        total_iterations=total_iterations,
    )
    prop_range = get("proposals_per_identity_range", (1, 2))
    if len(prop_range) != 2:
        raise ConfigError("proposals_per_identity_range: expected [lo, hi]")
    num_train = int(get("num_train_identities", 200))
    world = WorldConfig(
        num_train_identities=num_train,
        num_test_identities=int(get("num_test_identities", 100)),
        latent_dim=int(get("latent_dim", 16)),
        input_dim=embedding.input_dim,
        observation_noise_sigma=float(get("observation_noise_sigma", 0.15)),
        proposals_per_identity_range=(int(prop_range[0]), int(prop_range[1])),
        backgrounds_generated_per_image=int(get("backgrounds_generated_per_image", 32)),
        backgrounds_stored_per_image=int(get("backgrounds_stored_per_image", 5)),
        unlabeled_identities_per_image=int(get("unlabeled_identities_per_image", 1)),
        identities_per_image=int(get("identities_per_image", 4)),
        seed=int(get("world_seed", seed)),
    )
    # Default pool target is 100, clamped for worlds with few classes.
    hep = HepConfig(
        num_selected=int(get("num_selected", min(100, num_train + 1))),
        hard_per_subgroup=int(get("hard_per_subgroup", 20)),
        num_classes_total=num_train + 1,
    )
    checkpoint = get("checkpoint", None)
    cfg = RunConfig(
        embedding=embedding,
        sgd=sgd,
        world=world,
        hep=hep,
        seed=int(seed),
        dictionary_capacity_multiplier=int(get("dictionary_capacity_multiplier", 40)),
        loss_mode=str(get("loss_mode", "olp_hep")),
        total_iterations=total_iterations,
        eval_every=int(get("eval_every", 1000)),
        gallery_size=int(get("gallery_size", 100)),
        max_pairs_per_identity=int(get("max_pairs_per_identity", 2)),
        output_dir=output_dir,
        checkpoint=str(checkpoint) if checkpoint is not None else None,
        gallery_sizes=tuple(int(s) for s in get("gallery_sizes", DEFAULT_GALLERY_SIZES)),
        multipliers=tuple(int(m) for m in get("multipliers", DEFAULT_MULTIPLIERS)),
    )
    cfg.validate()
    return cfg


def default_config(seed: int, output_dir: str = ".", **overrides) -> RunConfig:
    """Desk-scale defaults with flat-key overrides, mainly for tests."""
    return config_from_flat(dict(overrides), seed=seed, output_dir=output_dir)
