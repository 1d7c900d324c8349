from .generation import (
    GenMetricsReport,
    accuracy,
    bleu,
    evaluate_generation,
    read_generation_pairs,
    rouge_l,
    rouge_n,
)
from .retrieval import (
    RetrievalMetricsReport,
    dcg_at_k,
    evaluate_run,
    format_table,
    map_at_k,
    mrr_at_k,
    ndcg_at_k,
    precision_recall_f1_at_k,
)

__all__ = [
    "GenMetricsReport",
    "RetrievalMetricsReport",
    "accuracy",
    "bleu",
    "dcg_at_k",
    "evaluate_generation",
    "evaluate_run",
    "format_table",
    "map_at_k",
    "mrr_at_k",
    "ndcg_at_k",
    "precision_recall_f1_at_k",
    "read_generation_pairs",
    "rouge_l",
    "rouge_n",
]
