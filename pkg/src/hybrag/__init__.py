"""Hybrid lexical/semantic retrieval, retrieval-augmented answering and IR/QA evaluation."""

from .corpus import Document, Query, RelevanceJudgments, load_corpus, load_qrels, load_queries, tokenize
from .lexical import Bm25Params, InvertedIndex, bm25_score, build_index, idf, lexical_search
from .rerank import FusionStrategy, RankedEntry, RankedList, fuse
from .semantic import TrigramEncoder, VectorIndex, build_vector_index, cosine_sim, semantic_search

__version__ = "0.1.0"

__all__ = [
    "Bm25Params",
    "Document",
    "FusionStrategy",
    "InvertedIndex",
    "Query",
    "RankedEntry",
    "RankedList",
    "RelevanceJudgments",
    "TrigramEncoder",
    "VectorIndex",
    "bm25_score",
    "build_index",
    "build_vector_index",
    "cosine_sim",
    "fuse",
    "idf",
    "lexical_search",
    "load_corpus",
    "load_qrels",
    "load_queries",
    "semantic_search",
    "tokenize",
]
