"""Semantic diversity analysis for dialogue response corpora.

The package measures how semantically varied a set of responses is
(entropy over embedding clusters), computes classic lexical diversity
baselines, derives focal training weights that push models away from
over-represented response clusters, and correlates diversity scores with
human pairwise preferences.
"""

import os as _os

# Honor SEMDIV_THREADS before numpy (and its BLAS) can load. Only
# effective when this package is imported first, which is always the case
# for the `semdiv` console script.
_threads = _os.environ.get("SEMDIV_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        _os.environ[_var] = _threads
del _os, _threads

from .clustering import (
    ClusterAssignment,
    ClusterModel,
    SemanticDistribution,
    assign,
    kmeans_fit,
    load_model,
    normalize_rows,
    save_model,
    semantic_distribution,
)
from .corpus_io import (
    EmbeddingMatrix,
    ResponseCorpus,
    ResponseRecord,
    TokenSequence,
    extract_ngrams,
    load_responses,
    read_embeddings,
    tokenize,
    write_embeddings,
    write_responses,
)
from .dress import (
    HeadClusters,
    WeightEntry,
    WeightTable,
    apply_nt_flags,
    compute_weights,
    focal_weight,
    head_clusters,
    read_weight_table,
    renormalized_weights,
    write_weight_table,
)
from .errors import DataError
from .lexical_metrics import (
    LexicalReport,
    VocabCounts,
    build_vocab_counts,
    dist_n,
    ent_n,
    lexical_report,
    low_frequency,
)
from .pairwise import (
    BTScores,
    CorrelationResult,
    OutcomeCounts,
    PairwiseAnnotation,
    bt_fit,
    bt_prob,
    likert_to_outcomes,
    pearson,
    read_annotations,
    spearman,
)
from .sement import SemEntScore, compare_sement, sem_ent
from .toy_trainer import (
    ToyDataset,
    ToyModel,
    ToyWorld,
    TrainConfig,
    TrainHistory,
    evaluate_generations,
    grad_weighted_nll,
    head_mass,
    make_synthetic_dataset,
    make_world,
    train,
    weighted_nll,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "ResponseRecord",
    "ResponseCorpus",
    "TokenSequence",
    "EmbeddingMatrix",
    "load_responses",
    "write_responses",
    "tokenize",
    "extract_ngrams",
    "read_embeddings",
    "write_embeddings",
    "VocabCounts",
    "LexicalReport",
    "build_vocab_counts",
    "dist_n",
    "ent_n",
    "low_frequency",
    "lexical_report",
    "ClusterModel",
    "ClusterAssignment",
    "SemanticDistribution",
    "kmeans_fit",
    "assign",
    "semantic_distribution",
    "normalize_rows",
    "save_model",
    "load_model",
    "SemEntScore",
    "sem_ent",
    "compare_sement",
    "WeightEntry",
    "WeightTable",
    "HeadClusters",
    "focal_weight",
    "compute_weights",
    "head_clusters",
    "apply_nt_flags",
    "renormalized_weights",
    "write_weight_table",
    "read_weight_table",
    "ToyWorld",
    "ToyDataset",
    "ToyModel",
    "TrainConfig",
    "TrainHistory",
    "make_world",
    "make_synthetic_dataset",
    "weighted_nll",
    "grad_weighted_nll",
    "train",
    "evaluate_generations",
    "head_mass",
    "PairwiseAnnotation",
    "OutcomeCounts",
    "BTScores",
    "CorrelationResult",
    "read_annotations",
    "likert_to_outcomes",
    "bt_fit",
    "bt_prob",
    "pearson",
    "spearman",
]
