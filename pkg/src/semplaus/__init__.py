"""Semantic plausibility classification of s-v-o events.

Dataset ingestion, world-knowledge attribute featurization, from-scratch
neural classifiers, semi-supervised pair-label propagation, and a
reproducible cross-validation harness.
"""

__version__ = "0.1.0"

from .corpus import (
    AnnotationRecord,
    FoldPlan,
    LabeledTriple,
    Vocabulary,
    aggregate_votes,
    dataset_stats,
    generate_candidate_triples,
    load_triples,
    load_vocabulary,
    make_folds,
)
from .embeddings import EmbeddingTable, load_embeddings, triple_vector
from .errors import DivergenceError, ParseError, SemplausError, ValidationError
from .harness import ExperimentConfig, error_analysis, run_cv, run_propagation_bench
from .models import (
    EnsembleModel,
    GoldPairFeatures,
    LrModel,
    ModelConfig,
    NnModel,
    WkModel,
    predict_ensemble,
    predict_lr,
    predict_nn,
    train_classifier,
)
from .propagation import (
    OrdinalPairClassifier,
    PairDataset,
    SpreadConfig,
    fit_predict_lr,
    fit_predict_ordinal,
    fit_predict_spread,
    label_spread,
    propagate_profiles,
    sample_pairs,
    split_fraction,
)
from .wk_features import (
    FeatureSchema,
    NounProfile,
    PairFeatures,
    bin_diff,
    encode_indices,
    encode_raw_onehot,
    load_bins,
    pair_features,
    three_level,
)
