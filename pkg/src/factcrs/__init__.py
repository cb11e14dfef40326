"""Conversational recommendation over a forest of factorization trees.

The package trains shallow binary trees whose internal nodes split a user
interaction set on a single attribute while fitting a pair of profile
embeddings against an item embedding table.  At chat time the trees double
as question policies: each internal node is a yes/no attribute question,
each leaf a candidate pool, and rejected recommendations feed back into the
scoring vector before the next tree is consulted.
"""

from .benchmark import BenchmarkReport, analytics_report, average_turns, run_benchmark, success_rate_at
from .config import RunConfig, load_config, parse_config_text, parse_overrides
from .data import (AttributeVocabulary, DataSplit, Dataset, InteractionRecord,
                   PlantedTree, RecordBatch, SyntheticSpec, generate_synthetic,
                   load_dataset, save_dataset, split_by_user)
from .embeddings import (FitResult, ItemEmbeddingTable, NegativeSamples, bpr_loss,
                         ce_loss, fit_partition_embeddings, partition_objective,
                         sample_negatives, sample_negatives_batch, sigmoid,
                         softplus)
from .errors import (ConfigError, DataFormatError, FactCrsError,
                     ModelFormatError, NumericalError, SessionProtocolError,
                     VocabularyMismatchError)
from .forest import (InteractionForest, build_forest, draw_attribute_pool,
                     load_model, resolve_pool_size, save_model)
from .session import (AblationFlags, Ask, Recommend, SessionState,
                      apply_acceptance, apply_answer, apply_rejection,
                      assemble_recommendation, current_action, feedback_offset,
                      fused_embedding, is_terminal, score_item,
                      select_next_tree, start_session)
from .simulate import (EpisodeTrace, SimulatedUser, TurnRecord, load_traces,
                       make_simulated_user, oracle_answer, oracle_feedback,
                       run_episode, save_traces, trace_from_dict, trace_to_dict)
from .tree import (InteractionTree, SplitCandidate, TreeNode, build_tree,
                   descend_answered, evaluate_split, gini_from_counts,
                   gini_index, partition_by_attribute, select_split,
                   traverse_known)

__version__ = "0.1.0"

__all__ = [
    "AblationFlags", "Ask", "AttributeVocabulary", "BenchmarkReport",
    "ConfigError", "DataFormatError", "DataSplit", "Dataset", "EpisodeTrace",
    "FactCrsError", "FitResult", "InteractionForest", "InteractionRecord",
    "InteractionTree", "ItemEmbeddingTable", "ModelFormatError",
    "NegativeSamples", "NumericalError", "PlantedTree", "Recommend",
    "RecordBatch",
    "RunConfig", "SessionProtocolError", "SessionState", "SimulatedUser",
    "SplitCandidate", "SyntheticSpec", "TreeNode", "TurnRecord",
    "VocabularyMismatchError", "analytics_report", "apply_acceptance",
    "apply_answer", "apply_rejection", "assemble_recommendation",
    "average_turns", "bpr_loss", "build_forest", "build_tree", "ce_loss",
    "current_action", "descend_answered", "draw_attribute_pool",
    "evaluate_split", "feedback_offset", "fit_partition_embeddings",
    "fused_embedding", "generate_synthetic", "gini_from_counts", "gini_index",
    "is_terminal", "load_config", "load_dataset", "load_model", "load_traces",
    "make_simulated_user", "oracle_answer", "oracle_feedback",
    "parse_config_text", "parse_overrides", "partition_by_attribute",
    "partition_objective", "resolve_pool_size", "run_benchmark", "run_episode",
    "sample_negatives", "sample_negatives_batch", "save_dataset", "save_model",
    "save_traces", "score_item", "select_next_tree", "select_split", "sigmoid",
    "softplus", "split_by_user", "start_session", "success_rate_at",
    "trace_from_dict", "trace_to_dict", "traverse_known",
]
