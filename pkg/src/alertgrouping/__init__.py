"""Self-supervised alert grouping.

Embeds IDS alerts with a small masked-alert transformer (timestamp-driven
rotary attention), groups them by density clustering under a combined
time/cosine metric, augments labelled corpora with controllable noise levels
and simultaneous attacks, and evaluates groupings with pairwise
two-parameter ROC envelopes.
"""

__version__ = "0.1.0"

from .core import (
    FEATURE_KEYS,
    MISSING,
    NOISE_EVENT,
    Alert,
    AlertSequence,
    HierLabel,
    canonicalize_groups,
    merge_sorted,
    validate_sequence,
)
from .embed import PcaModel, ReadoutConfig, fit_pca, transform_pca, windowed_embed
from .estimators import (
    EmbeddingPca,
    MaskedAlertEncoder,
    TimeCosineGrouper,
    TimeDeltaGrouper,
)
from .evaluate import (
    PairConfusion,
    RocPoint,
    RocReport,
    build_report,
    default_parameter_grid,
    macro_aggregate,
    pair_confusion,
    roc_envelope,
    sweep_grid,
    sweep_time_delta,
)
from .group import (
    AlertRepresentation,
    GroupingParams,
    OnlineGrouper,
    UnionFind,
    connected_components,
    enumerate_edges,
    group_alerts,
    neighbourhood_cone_angle,
    time_cosine_distance,
    time_delta_group,
)
from .ingest import FeatureExtractionConfig, parse_stream, split_scenarios, write_stream
from .model import (
    ModelConfig,
    ModelState,
    TrainConfig,
    forward,
    gradient_check,
    load_checkpoint,
    masked_loss,
    rotary_angles,
    save_checkpoint,
    train,
)
from .vocab import Vocabulary, build_vocab, embed_sequence, initial_embedding, tokenize

__all__ = [
    "Alert",
    "AlertRepresentation",
    "AlertSequence",
    "EmbeddingPca",
    "FeatureExtractionConfig",
    "FEATURE_KEYS",
    "GroupingParams",
    "HierLabel",
    "MISSING",
    "MaskedAlertEncoder",
    "ModelConfig",
    "ModelState",
    "NOISE_EVENT",
    "OnlineGrouper",
    "PairConfusion",
    "PcaModel",
    "ReadoutConfig",
    "RocPoint",
    "RocReport",
    "TimeCosineGrouper",
    "TimeDeltaGrouper",
    "TrainConfig",
    "UnionFind",
    "Vocabulary",
    "build_report",
    "build_vocab",
    "canonicalize_groups",
    "connected_components",
    "default_parameter_grid",
    "embed_sequence",
    "enumerate_edges",
    "fit_pca",
    "forward",
    "gradient_check",
    "group_alerts",
    "initial_embedding",
    "load_checkpoint",
    "macro_aggregate",
    "masked_loss",
    "merge_sorted",
    "neighbourhood_cone_angle",
    "pair_confusion",
    "parse_stream",
    "roc_envelope",
    "rotary_angles",
    "save_checkpoint",
    "split_scenarios",
    "sweep_grid",
    "sweep_time_delta",
    "time_cosine_distance",
    "time_delta_group",
    "tokenize",
    "train",
    "transform_pca",
    "validate_sequence",
    "windowed_embed",
    "write_stream",
]
