"""Entity typing toolkit: binary interchange formats, dataset loading,
re-ranking and filtered evaluation backed by the C++ core."""

from ._sset import (
    EMBEDDING_FORMAT_VERSION,
    PROBABILITY_FORMAT_VERSION,
    FormatError,
    KnowledgeGraph,
    LoadError,
    check_probability_file,
    evaluate,
    filtered_rank,
    open_graph,
    read_embedding_file,
    read_probability_file,
    rerank,
    reweight,
    summarize_ranks,
    write_embedding_file,
    write_probability_file,
    write_topk_probability_file,
)

__all__ = [
    "EMBEDDING_FORMAT_VERSION",
    "PROBABILITY_FORMAT_VERSION",
    "FormatError",
    "KnowledgeGraph",
    "LoadError",
    "check_probability_file",
    "evaluate",
    "filtered_rank",
    "open_graph",
    "read_embedding_file",
    "read_probability_file",
    "rerank",
    "reweight",
    "summarize_ranks",
    "write_embedding_file",
    "write_probability_file",
    "write_topk_probability_file",
]
