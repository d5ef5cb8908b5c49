"""Temporally adaptive stance classification toolkit.

Builds drifting per-year corpora, trains CBOW embeddings under five temporal
strategies (discrete, incremental update, and compass-aligned variants), runs
a fixed text-CNN stance classifier across all source/target year pairs, and
reports macro-F1 decay with relative performance drops per temporal gap.
"""

from .alignment import (
    AlignedSlice,
    CompassModel,
    StrategyKind,
    StrategyPlan,
    align_slice,
    build_embedding,
    make_plan,
    train_compass,
)
from .classifier import (
    ClassifierConfig,
    EncodedPost,
    TextCNN,
    encode,
    encode_posts,
    forward,
    gradients_check,
    macro_f1,
    predict,
    train_classifier,
)
from .corpus import (
    HashtagLexicon,
    LabelledDataset,
    LabelledPost,
    RawPost,
    StanceLabel,
    TemporalSlice,
    Vocabulary,
    balance_and_split,
    build_vocabulary,
    distant_label,
    ingest,
    jaccard_matrix,
    jaccard_similarity,
    tokenize,
)
from .embedding import (
    EmbeddingConfig,
    EmbeddingLookup,
    EmbeddingModel,
    cbow_loss_and_grad,
    load_model,
    lookup,
    save_model,
    train_cbow,
    update_incremental,
)
from .experiment import (
    ExperimentData,
    ExperimentSpec,
    GapAggregate,
    PairResult,
    aggregate_by_gap,
    emit_report,
    grid_pairs,
    rpd,
    run_grid,
    run_pair,
)
from .synthetic import SyntheticDriftConfig, generate_synthetic_corpus

__version__ = "0.1.0"

__all__ = [
    "AlignedSlice",
    "ClassifierConfig",
    "CompassModel",
    "EmbeddingConfig",
    "EmbeddingLookup",
    "EmbeddingModel",
    "EncodedPost",
    "ExperimentData",
    "ExperimentSpec",
    "GapAggregate",
    "HashtagLexicon",
    "LabelledDataset",
    "LabelledPost",
    "PairResult",
    "RawPost",
    "StanceLabel",
    "StrategyKind",
    "StrategyPlan",
    "SyntheticDriftConfig",
    "TemporalSlice",
    "TextCNN",
    "Vocabulary",
    "aggregate_by_gap",
    "align_slice",
    "balance_and_split",
    "build_embedding",
    "build_vocabulary",
    "cbow_loss_and_grad",
    "distant_label",
    "emit_report",
    "encode",
    "encode_posts",
    "forward",
    "generate_synthetic_corpus",
    "gradients_check",
    "grid_pairs",
    "ingest",
    "jaccard_matrix",
    "jaccard_similarity",
    "load_model",
    "lookup",
    "macro_f1",
    "make_plan",
    "predict",
    "rpd",
    "run_grid",
    "run_pair",
    "save_model",
    "tokenize",
    "train_cbow",
    "train_classifier",
    "train_compass",
    "update_incremental",
]
