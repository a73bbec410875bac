"""relevance_trainer: seq2seq relevance model training and scoring service."""

__version__ = "0.1.0"
