"""Deterministic balanced sampling of labeled (query, passage) pairs.

Sampling is a pure function of (inputs, plan): pools are sorted by id
before seeded Fisher-Yates shuffling (xoshiro256**, see rng.py), so a
fixed seed yields byte-identical output on every platform. Selection
prefers one positive per query, recycling queries only once the query
pool is exhausted, and the selection order is independent of the
requested counts, so a smaller sample is always a prefix of a larger
one drawn with the same seed.

Output order: all positives in selection order, then all negatives in
selection order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Mapping

from .corpus_io import Passage, Qrels, Query, TrecRunEntry, display_text
from .errors import ExplainrankError
from .rng import Xoshiro256StarStar

NEGATIVE_SOURCES = ("candidate_run", "random_collection")

# Phase separation: negatives draw from an independently seeded stream so
# their selection never depends on how many positives were requested.
_NEGATIVE_SEED_SALT = 0xDA3E39CB94B95BDB


class SamplingError(ExplainrankError):
    pass


def binarize(grade: int, threshold: int) -> bool:
    """True (relevant) iff grade >= threshold."""
    if grade < 0:
        raise ValueError(f"grade must be >= 0, got {grade}")
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    return grade >= threshold


@dataclass(frozen=True)
class LabeledPair:
    qid: str
    docid: str
    query_text: str
    passage_text: str
    label: bool  # True = relevant


@dataclass(frozen=True)
class SamplePlan:
    n_pos: int
    n_neg: int
    seed: int
    negative_source: str = "random_collection"

    def __post_init__(self):
        if self.n_pos < 0 or self.n_neg < 0:
            raise ValueError("n_pos and n_neg must be >= 0")
        if self.negative_source not in NEGATIVE_SOURCES:
            raise ValueError(
                f"negative_source must be one of {NEGATIVE_SOURCES}, got {self.negative_source!r}"
            )


def _as_query_map(queries: Mapping[str, Query] | Iterable[Query]) -> dict[str, Query]:
    if isinstance(queries, Mapping):
        return dict(queries)
    return {q.qid: q for q in queries}


def _as_passage_map(collection: Mapping[str, Passage] | Iterable[Passage]) -> dict[str, Passage]:
    if isinstance(collection, Mapping):
        return dict(collection)
    return {p.docid: p for p in collection}


def _interleaved_selection(
    pools: dict[str, list[str]], qid_order: list[str]
) -> Iterable[tuple[str, str]]:
    """Round-robin over queries: round r takes each query's r-th item."""
    depth = max((len(p) for p in pools.values()), default=0)
    for r in range(depth):
        for qid in qid_order:
            pool = pools[qid]
            if r < len(pool):
                yield qid, pool[r]


def _positive_selection_order(qrels: Qrels, threshold: int, rng: Xoshiro256StarStar):
    by_query: dict[str, list[str]] = {}
    for (qid, docid), grade in sorted(qrels.judgments.items()):
        if binarize(grade, threshold):
            by_query.setdefault(qid, []).append(docid)
    qids = sorted(by_query)
    rng.shuffle(qids)
    for qid in qids:
        rng.shuffle(by_query[qid])
    return _interleaved_selection(by_query, qids)


def _candidate_negative_order(
    qrels: Qrels,
    threshold: int,
    run_entries: list[TrecRunEntry],
    query_map: dict[str, Query],
    candidate_depth: int | None,
    rng: Xoshiro256StarStar,
):
    per_qid: dict[str, list[TrecRunEntry]] = {}
    for e in run_entries:
        per_qid.setdefault(e.qid, []).append(e)
    missing = sorted(q for q in per_qid if q not in query_map)
    if missing:
        raise SamplingError(f"candidate run queries missing from queries file: {missing}")
    pools: dict[str, list[str]] = {}
    for qid in per_qid:
        ranked = sorted(per_qid[qid], key=lambda e: e.rank)
        if candidate_depth is not None:
            ranked = ranked[:candidate_depth]
        pool = [
            e.docid
            for e in ranked
            if not binarize(qrels.get(qid, e.docid) or 0, threshold)
        ]
        if pool:
            pools[qid] = pool
    qids = sorted(pools)
    rng.shuffle(qids)
    for qid in qids:
        rng.shuffle(pools[qid])
    return _interleaved_selection(pools, qids)


def _random_collection_negatives(
    qrels: Qrels,
    threshold: int,
    docids: list[str],
    n_neg: int,
    rng: Xoshiro256StarStar,
) -> list[tuple[str, str]]:
    qids = list(qrels.query_ids())
    rng.shuffle(qids)
    chosen: list[tuple[str, str]] = []
    taken: set[tuple[str, str]] = set()
    n_docs = len(docids)
    if n_neg > 0 and (n_docs == 0 or not qids):
        raise SamplingError("random_collection negatives need a non-empty collection and qrels")
    stalled_rounds = 0
    while len(chosen) < n_neg:
        accepted_this_round = 0
        for qid in qids:
            if len(chosen) >= n_neg:
                break
            judged = qrels.judged_docs(qid)
            for _attempt in range(200):
                docid = docids[rng.randbelow(n_docs)]
                grade = judged.get(docid)
                if grade is not None and binarize(grade, threshold):
                    continue
                if (qid, docid) in taken:
                    continue
                taken.add((qid, docid))
                chosen.append((qid, docid))
                accepted_this_round += 1
                break
        if accepted_this_round == 0:
            stalled_rounds += 1
            if stalled_rounds >= 2:
                raise SamplingError(
                    f"negative pool exhausted: requested {n_neg}, found {len(chosen)}"
                )
        else:
            stalled_rounds = 0
    return chosen


def sample_pairs(
    queries: Mapping[str, Query] | Iterable[Query],
    collection: Mapping[str, Passage] | Iterable[Passage],
    qrels: Qrels,
    candidate_run: list[TrecRunEntry] | None,
    plan: SamplePlan,
    *,
    positive_threshold: int = 1,
    candidate_depth: int | None = None,
    include_title: bool = False,
) -> list[LabeledPair]:
    """Draw exactly plan.n_pos relevant and plan.n_neg non-relevant pairs.

    Raises SamplingError when pools are too small, when qrels reference
    unknown queries, or when sampled ids are missing from the collection.
    """
    query_map = _as_query_map(queries)
    passage_map = _as_passage_map(collection)

    missing_qids = sorted(q for q in qrels.query_ids() if q not in query_map)
    if missing_qids:
        raise SamplingError(f"qrels queries missing from queries file: {missing_qids}")

    rng_pos = Xoshiro256StarStar(plan.seed)
    rng_neg = Xoshiro256StarStar(plan.seed ^ _NEGATIVE_SEED_SALT)

    positives: list[tuple[str, str]] = []
    for qid, docid in _positive_selection_order(qrels, positive_threshold, rng_pos):
        if len(positives) >= plan.n_pos:
            break
        positives.append((qid, docid))
    if len(positives) < plan.n_pos:
        raise SamplingError(
            f"not enough positives: requested {plan.n_pos}, available {len(positives)}"
        )

    negatives: list[tuple[str, str]] = []
    if plan.negative_source == "candidate_run":
        if candidate_run is None:
            raise SamplingError("negative_source=candidate_run requires a candidate run")
        order = _candidate_negative_order(
            qrels, positive_threshold, candidate_run, query_map, candidate_depth, rng_neg
        )
        for qid, docid in order:
            if len(negatives) >= plan.n_neg:
                break
            negatives.append((qid, docid))
        if len(negatives) < plan.n_neg:
            raise SamplingError(
                f"not enough negatives in candidate run: requested {plan.n_neg}, "
                f"available {len(negatives)}"
            )
    else:
        docids = sorted(passage_map)
        negatives = _random_collection_negatives(
            qrels, positive_threshold, docids, plan.n_neg, rng_neg
        )

    pairs: list[LabeledPair] = []
    for (qid, docid), label in [(p, True) for p in positives] + [(n, False) for n in negatives]:
        passage = passage_map.get(docid)
        if passage is None:
            raise SamplingError(f"sampled docid {docid!r} missing from collection")
        pairs.append(
            LabeledPair(
                qid=qid,
                docid=docid,
                query_text=query_map[qid].text,
                passage_text=display_text(passage, include_title=include_title),
                label=label,
            )
        )
    return pairs


def write_pairs_jsonl(pairs: Iterable[LabeledPair], stream: IO[str]) -> None:
    for p in pairs:
        stream.write(
            json.dumps(
                {
                    "qid": p.qid,
                    "docid": p.docid,
                    "query": p.query_text,
                    "passage": p.passage_text,
                    "label": p.label,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


def read_pairs_jsonl(stream: IO[str] | Iterable[str]) -> list[LabeledPair]:
    pairs = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SamplingError(f"pairs file line {line_no}: invalid JSON ({exc.msg})") from exc
        try:
            pairs.append(
                LabeledPair(
                    qid=obj["qid"],
                    docid=obj["docid"],
                    query_text=obj["query"],
                    passage_text=obj["passage"],
                    label=bool(obj["label"]),
                )
            )
        except KeyError as exc:
            raise SamplingError(f"pairs file line {line_no}: missing field {exc}") from None
    return pairs
