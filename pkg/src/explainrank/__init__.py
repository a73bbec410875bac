"""explainrank: explanation-augmented passage reranking pipeline."""

__version__ = "0.1.0"

from .corpus_io import CandidateSet, Passage, Qrels, Query, TrecRunEntry
from .errors import ExplainrankError, UsageError
from .sampler import LabeledPair, SamplePlan

__all__ = [
    "CandidateSet",
    "ExplainrankError",
    "LabeledPair",
    "Passage",
    "Qrels",
    "Query",
    "SamplePlan",
    "TrecRunEntry",
    "UsageError",
    "__version__",
]
