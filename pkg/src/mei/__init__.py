"""Major entity identification: corpus tooling, metrics, assignment baselines,
a memory-based identification engine and a prompt-driven LLM pipeline."""

from .corpus import AnnotatedDocument, Cluster, Span, load_corpus, parse_conll
from .derive import MajorEntity, MeiDocument, dataset_stats, select_major_entities
from .metrics import PredictionSet, evaluate, macro_f1, micro_f1

__all__ = [
    "AnnotatedDocument", "Cluster", "Span", "load_corpus", "parse_conll",
    "MajorEntity", "MeiDocument", "dataset_stats", "select_major_entities",
    "PredictionSet", "evaluate", "macro_f1", "micro_f1",
]
