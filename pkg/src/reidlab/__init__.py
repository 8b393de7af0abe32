"""Siamese metric-learning lab over a simulated proposal stream.

The library trains a small embedding network with two joint objectives: an
online pairing loss drawing negatives from a FIFO feature dictionary, and a
hard-example-priority softmax over a selected class pool. Retrieval quality
is measured with CMC and mAP over probe/gallery splits of held-out
identities.
"""

from .checkpoint import load_matrices, network_matrices, restore_network, save_matrices
from .config import RunConfig, config_from_flat, default_config
from .dictionary import BACKGROUND, UNLABELED, FeatureDictionary
from .errors import (
    ConfigError,
    EmptyBatchError,
    GallerySizeTooSmallError,
    NoCacheError,
    NonFiniteFunctionError,
    NoRelevantItemError,
    NumericalFailureError,
    ReidlabError,
    ShapeMismatchError,
    TrueClassNotSelectedError,
    UnnormalizedFeatureError,
    UnnormalizedInputError,
    ZeroCapacityError,
    ZeroVectorError,
)
from .evaluation import EvalReport, average_precisions, evaluate, extract_embeddings, gallery_sweep
from .gradcheck import gradient_check
from .network import (
    EmbeddingConfig,
    EmbeddingNetwork,
    ParameterGradients,
    l2_normalize,
    l2_normalize_backward,
)
from .optim import SgdConfig, SgdOptimizer, learning_rate, sgd_step
from .pairing import (
    Subgroup,
    SubgroupBatch,
    cosine_distance,
    form_subgroups,
    pairing_gradient,
    pairing_loss,
    pairing_terms,
)
from .priority import (
    ClassifierHead,
    HepBatch,
    HepConfig,
    SelectionPool,
    full_pool,
    priority_softmax_gradient,
    priority_softmax_loss,
    select_classes,
)
from .simulator import (
    IdentityWorld,
    Proposal,
    ScenePair,
    WorldConfig,
    build_eval_split,
    build_world,
    sample_scene_pair,
)
from .training import MetricsRow, TrainResult, TrainState, run_training, train_iteration
from .studies import run_ablation, run_dictionary_sweep, run_gallery_study

__version__ = "0.1.0"
