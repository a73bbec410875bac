import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explainrank.corpus_io import CandidateSet, Passage, Query, validate_run
from explainrank.llm_client import RetryPolicy
from explainrank.reranker import (
    ScoredDoc,
    ScorerEndpoint,
    ScoringError,
    health_check,
    rerank,
    rerank_candidates,
    score_batch,
)
from mockserver import MockScorerServer
from oracles import stable_sort_rerank

FAST_RETRY = RetryPolicy(max_retries=3, backoff_base=0.001)
QUERY = Query("q1", "what is love")


def passages(*ids):
    return [Passage(d, f"text of {d}") for d in ids]


def scores_behavior(mapping):
    def behavior(body, key, i):
        return 200, {"p_relevant": [mapping[t] for t in body["passages"]]}

    return behavior


class TestScoreBatch:
    def test_fixed_scores_in_order(self):
        behavior = scores_behavior({"text of d1": 0.9, "text of d2": 0.1})
        with MockScorerServer(behavior) as server:
            endpoint = ScorerEndpoint(server.base_url)
            result = score_batch(endpoint, QUERY, passages("d1", "d2"), retry=FAST_RETRY)
        assert [(s.docid, s.score) for s in result] == [("d1", 0.9), ("d2", 0.1)]

    def test_empty_passages(self):
        endpoint = ScorerEndpoint("http://127.0.0.1:9")  # never contacted
        assert score_batch(endpoint, QUERY, [], retry=FAST_RETRY) == []

    def test_out_of_range_score_rejected(self):
        behavior = lambda body, key, i: (200, {"p_relevant": [1.5]})
        with MockScorerServer(behavior) as server:
            with pytest.raises(ScoringError, match=r"outside \[0, 1\]"):
                score_batch(
                    ScorerEndpoint(server.base_url), QUERY, passages("d1"), retry=FAST_RETRY
                )

    def test_length_mismatch_rejected(self):
        behavior = lambda body, key, i: (200, {"p_relevant": [0.5]})
        with MockScorerServer(behavior) as server:
            with pytest.raises(ScoringError, match="2 passages"):
                score_batch(
                    ScorerEndpoint(server.base_url), QUERY, passages("d1", "d2"),
                    retry=FAST_RETRY,
                )

    def test_retry_then_success(self):
        def behavior(body, key, i):
            if i == 1:
                return 500, {"error": "flake"}
            return 200, {"p_relevant": [0.7]}

        with MockScorerServer(behavior) as server:
            result = score_batch(
                ScorerEndpoint(server.base_url), QUERY, passages("d1"), retry=FAST_RETRY
            )
            assert result[0].score == 0.7
            assert server.state.received == 2

    def test_on_error_zero_policy(self):
        behavior = lambda body, key, i: (500, {"error": "dead"})
        with MockScorerServer(behavior) as server:
            result = score_batch(
                ScorerEndpoint(server.base_url),
                QUERY,
                passages("d1", "d2"),
                retry=RetryPolicy(max_retries=1, backoff_base=0.001),
                on_error="zero",
            )
        assert [s.score for s in result] == [0.0, 0.0]

    def test_include_title(self):
        seen = {}

        def behavior(body, key, i):
            seen["passages"] = body["passages"]
            return 200, {"p_relevant": [0.5] * len(body["passages"])}

        titled = [Passage("d1", "body text", title="Header")]
        with MockScorerServer(behavior) as server:
            score_batch(
                ScorerEndpoint(server.base_url), QUERY, titled,
                include_title=True, retry=FAST_RETRY,
            )
        assert seen["passages"] == ["Header. body text"]

    def test_health_check(self):
        with MockScorerServer() as server:
            assert health_check(ScorerEndpoint(server.base_url)) is True
        assert health_check(ScorerEndpoint("http://127.0.0.1:9", timeout=0.2)) is False


class TestRerank:
    def cs(self, *ids):
        return CandidateSet(qid="q1", candidates=tuple((d, 1.0) for d in ids))

    def test_score_order(self):
        entries = rerank(QUERY, self.cs("d1", "d2"), {"d1": 0.9, "d2": 0.1}, tag="t")
        assert [(e.docid, e.rank) for e in entries] == [("d1", 1), ("d2", 2)]
        validate_run(entries)

    def test_tie_break_docid_descending(self):
        entries = rerank(QUERY, self.cs("d1", "d2"), {"d1": 0.5, "d2": 0.5}, tag="t")
        assert [e.docid for e in entries] == ["d2", "d1"]

    def test_missing_score(self):
        with pytest.raises(ScoringError, match="missing"):
            rerank(QUERY, self.cs("d1", "d2"), {"d1": 0.9}, tag="t")

    def test_tag_propagated(self):
        entries = rerank(QUERY, self.cs("d1"), {"d1": 0.9}, tag="mytag")
        assert entries[0].tag == "mytag"


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.text(alphabet="abcdef0123456789", min_size=1, max_size=5),
        min_size=1,
        max_size=100,
        unique=True,
    ),
    st.randoms(use_true_random=False),
)
def test_rerank_matches_stable_sort_oracle(docids, rnd):
    # Coarse score grid to force ties.
    scores = {d: rnd.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for d in docids}
    cs = CandidateSet(qid="q1", candidates=tuple((d, 1.0) for d in docids))
    entries = rerank(QUERY, cs, scores, tag="t")
    assert [e.docid for e in entries] == stable_sort_rerank(list(docids), scores)
    assert sorted(e.docid for e in entries) == sorted(docids)  # permutation
    assert [e.rank for e in entries] == list(range(1, len(docids) + 1))
    validate_run(entries)


class TestRerankCandidates:
    def setup_data(self):
        queries = {"q1": Query("q1", "first"), "q2": Query("q2", "second")}
        docs = {d: Passage(d, f"text of {d}") for d in ("d1", "d2", "d3")}
        sets = [
            CandidateSet(qid="q1", candidates=(("d1", 1.0), ("d2", 0.9))),
            CandidateSet(qid="q2", candidates=(("d3", 1.0), ("d1", 0.9))),
        ]
        return queries, docs, sets

    def test_end_to_end_deterministic_order(self):
        queries, docs, sets = self.setup_data()

        def behavior(body, key, i):
            time.sleep(0.02 if body["query"] == "first" else 0.0)  # q2 finishes first
            return 200, {"p_relevant": [0.2 + 0.1 * len(t) % 0.7 for t in body["passages"]]}

        with MockScorerServer(behavior) as server:
            endpoint = ScorerEndpoint(server.base_url, max_in_flight=2)
            entries = rerank_candidates(endpoint, sets, queries, docs, retry=FAST_RETRY)
        assert [e.qid for e in entries] == ["q1", "q1", "q2", "q2"]  # input order kept
        validate_run(entries)

    def test_missing_query(self):
        queries, docs, sets = self.setup_data()
        del queries["q2"]
        with MockScorerServer() as server:
            with pytest.raises(ScoringError, match="q2"):
                rerank_candidates(
                    ScorerEndpoint(server.base_url), sets, queries, docs, retry=FAST_RETRY
                )

    def test_missing_doc(self):
        queries, docs, sets = self.setup_data()
        del docs["d3"]
        with MockScorerServer() as server:
            with pytest.raises(ScoringError, match="d3"):
                rerank_candidates(
                    ScorerEndpoint(server.base_url), sets, queries, docs, retry=FAST_RETRY
                )


class TestTypes:
    def test_scored_doc_range(self):
        with pytest.raises(ScoringError):
            ScoredDoc("d", 1.01)
        with pytest.raises(ScoringError):
            ScoredDoc("d", float("nan"))
        ScoredDoc("d", 0.0)
        ScoredDoc("d", 1.0)

    def test_endpoint_validation(self):
        with pytest.raises(ValueError):
            ScorerEndpoint("http://x", max_in_flight=0)
