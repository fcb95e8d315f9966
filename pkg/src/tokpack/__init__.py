"""Semantics-aware packet aggregation for token transmission.

Tokens of a sentence are grouped into fixed-size packets sent over an
erasure channel; the library computes the exact expected similarity of
the received reconstruction to the original and optimizes the grouping
with a genetic beam search, alongside exhaustive and random baselines.
"""

from .ats import AtsReport, ErasureModel, exact_ats, single_packet_ats, subset_weight
from .channel import ChannelTrace, sample_received_text, simulate
from .embedding import (
    AdditiveProvider,
    EmbeddingProvider,
    EvalCounter,
    FileCacheProvider,
    HashProvider,
    RemoteProvider,
    SubsetCache,
    cosine,
    load_embedding_cache,
    subset_similarity,
    write_embedding_cache,
)
from .errors import (
    ConfigError,
    CorpusError,
    DegenerateGroupError,
    DimensionMismatch,
    DivisibilityError,
    EnumerationLimitError,
    PartitionError,
    ProviderError,
    TokpackError,
    ZeroNormError,
)
from .harness import ExperimentConfig, ResultRow, emit_plot_data, run_experiment
from .model import (
    CorpusSentence,
    Packet,
    PacketGroup,
    PartitionConfig,
    Token,
    TokenizationMode,
    TokenizedMessage,
    load_corpus,
    make_group,
    reconstruct_text,
    render_positions,
    tokenize_words,
)
from .search import (
    GBeamConfig,
    GenerationStats,
    SearchResult,
    apply_swap,
    enumerate_partitions,
    full_search,
    full_search_encoding_steps,
    gbeam_encoding_steps,
    gbeam_encoding_steps_total,
    gbeam_search,
    mutate,
    partition_count,
    random_pa,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveProvider", "AtsReport", "ChannelTrace", "ConfigError",
    "CorpusError", "CorpusSentence", "DegenerateGroupError",
    "DimensionMismatch", "DivisibilityError", "EmbeddingProvider",
    "EnumerationLimitError", "ErasureModel", "EvalCounter",
    "ExperimentConfig", "FileCacheProvider", "GBeamConfig",
    "GenerationStats", "HashProvider", "Packet", "PacketGroup",
    "PartitionConfig", "PartitionError", "ProviderError", "RemoteProvider",
    "ResultRow", "SearchResult", "SubsetCache", "Token",
    "TokenizationMode", "TokenizedMessage", "TokpackError", "ZeroNormError",
    "apply_swap", "cosine", "emit_plot_data", "enumerate_partitions",
    "exact_ats", "full_search", "full_search_encoding_steps",
    "gbeam_encoding_steps", "gbeam_encoding_steps_total", "gbeam_search",
    "load_corpus", "load_embedding_cache", "make_group", "mutate",
    "partition_count", "random_pa", "reconstruct_text", "render_positions",
    "run_experiment", "sample_received_text", "simulate",
    "single_packet_ats", "subset_similarity", "subset_weight",
    "tokenize_words", "write_embedding_cache",
]
