"""Rerank candidate lists via a relevance-scorer endpoint.

The scorer speaks a small wire protocol owned by this package:
POST {base_url}/score with {"query": str, "passages": [str, ...]} returns
{"p_relevant": [float, ...]} positionally aligned, each value the
probability of the relevant-label token; GET /healthz answers 200.

Run assembly is deterministic: entries sort by score descending with ties
broken by docid descending (the same order trec_eval uses internally, so
evaluation of tied runs matches the reference tool).
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import httpx

from .corpus_io import CandidateSet, Passage, Query, TrecRunEntry, display_text
from .errors import ExplainrankError
from .llm_client import RetryPolicy

logger = logging.getLogger(__name__)

ON_ERROR_MODES = ("abort", "zero")


class ScoringError(ExplainrankError):
    pass


@dataclass(frozen=True)
class ScoredDoc:
    docid: str
    score: float  # probability of the relevant-label token

    def __post_init__(self):
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ScoringError(f"score for {self.docid!r} outside [0, 1]: {self.score}")


@dataclass(frozen=True)
class ScorerEndpoint:
    base_url: str
    timeout: float = 60.0
    max_in_flight: int = 4

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def health_check(endpoint: ScorerEndpoint) -> bool:
    try:
        resp = httpx.get(f"{endpoint.base_url.rstrip('/')}/healthz", timeout=endpoint.timeout)
        return resp.status_code == 200
    except httpx.HTTPError:
        return False


def _post_scores(
    endpoint: ScorerEndpoint, client: httpx.Client, query_text: str, passage_texts: list[str],
    retry: RetryPolicy,
) -> list[float]:
    attempt = 0
    while True:
        try:
            resp = client.post(
                f"{endpoint.base_url.rstrip('/')}/score",
                json={"query": query_text, "passages": passage_texts},
            )
            if resp.status_code == 429 or resp.status_code >= 500:
                raise _RetryableStatus(f"HTTP {resp.status_code}")
            if resp.status_code != 200:
                raise ScoringError(f"HTTP {resp.status_code}: {resp.text[:500]}")
            try:
                payload = resp.json()
                probs = payload["p_relevant"]
            except (ValueError, KeyError, TypeError):
                raise ScoringError(f"malformed scorer response: {resp.text[:500]}") from None
            if not isinstance(probs, list) or len(probs) != len(passage_texts):
                raise ScoringError(
                    f"scorer returned {len(probs) if isinstance(probs, list) else '?'} "
                    f"scores for {len(passage_texts)} passages"
                )
            return [float(p) for p in probs]
        except (_RetryableStatus, httpx.TimeoutException, httpx.TransportError) as exc:
            if attempt >= retry.max_retries:
                raise ScoringError(f"scoring failed after {attempt} retries: {exc}") from exc
            time.sleep(retry.delay(attempt))
            attempt += 1


class _RetryableStatus(Exception):
    pass


def score_batch(
    endpoint: ScorerEndpoint,
    query: Query,
    passages: Sequence[Passage],
    *,
    include_title: bool = False,
    retry: RetryPolicy = RetryPolicy(),
    on_error: str = "abort",
) -> list[ScoredDoc]:
    """Score passages against one query; results align with the input.

    on_error="abort" raises after retries; "zero" assigns sentinel score 0
    to the whole failed batch with a warning.
    """
    if on_error not in ON_ERROR_MODES:
        raise ValueError(f"on_error must be one of {ON_ERROR_MODES}")
    if not passages:
        return []
    texts = [display_text(p, include_title=include_title) for p in passages]
    with httpx.Client(timeout=endpoint.timeout) as client:
        try:
            probs = _post_scores(endpoint, client, query.text, texts, retry)
        except ScoringError:
            if on_error == "abort":
                raise
            logger.warning("scoring failed for query %s; assigning sentinel score 0", query.qid)
            probs = [0.0] * len(passages)
    return [ScoredDoc(docid=p.docid, score=prob) for p, prob in zip(passages, probs)]


def rerank(
    query: Query,
    candidates: CandidateSet,
    scores: Mapping[str, float],
    tag: str = "explainrank",
) -> list[TrecRunEntry]:
    """Order candidates by (score desc, docid desc) and assign ranks 1..n."""
    missing = [d for d in candidates.docids() if d not in scores]
    if missing:
        raise ScoringError(f"missing scores for query {query.qid}: {missing[:5]}")
    ordered = sorted(candidates.docids(), key=lambda d: (scores[d], d), reverse=True)
    return [
        TrecRunEntry(qid=query.qid, docid=docid, rank=i, score=scores[docid], tag=tag)
        for i, docid in enumerate(ordered, start=1)
    ]


def rerank_candidates(
    endpoint: ScorerEndpoint,
    candidate_sets: Sequence[CandidateSet],
    queries: Mapping[str, Query],
    passages: Mapping[str, Passage],
    *,
    tag: str = "explainrank",
    include_title: bool = False,
    retry: RetryPolicy = RetryPolicy(),
    on_error: str = "abort",
) -> list[TrecRunEntry]:
    """Score and rerank every candidate set; queries may be scored
    concurrently (up to endpoint.max_in_flight) but the output order is
    always the candidate-set input order."""
    for cs in candidate_sets:
        if cs.qid not in queries:
            raise ScoringError(f"candidate query {cs.qid!r} missing from queries")
        for docid in cs.docids():
            if docid not in passages:
                raise ScoringError(f"candidate doc {docid!r} missing from collection")

    def score_one(cs: CandidateSet) -> list[TrecRunEntry]:
        query = queries[cs.qid]
        docs = [passages[d] for d in cs.docids()]
        scored = score_batch(
            endpoint, query, docs, include_title=include_title, retry=retry, on_error=on_error
        )
        return rerank(query, cs, {s.docid: s.score for s in scored}, tag=tag)

    with ThreadPoolExecutor(max_workers=endpoint.max_in_flight) as pool:
        per_query = list(pool.map(score_one, candidate_sets))
    entries: list[TrecRunEntry] = []
    for group in per_query:
        entries.extend(group)
    return entries
