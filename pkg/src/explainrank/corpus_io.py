"""Parsers and writers for the pipeline's external data formats.

Covers MS MARCO-style TSV (queries, collection), BEIR-style JSONL corpora,
4-column TREC qrels, and 6-column TREC run files. All text is UTF-8,
normalized to NFC with CR/LF stripped at parse time so downstream prompt
hashes are stable. TSV text fields split on the FIRST tab only; later tabs
stay in the text verbatim.

Parsed value objects are immutable and safe to share across threads.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Optional

from .errors import ExplainrankError


class ParseError(ExplainrankError):
    """Malformed input; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class RunFormatError(ExplainrankError):
    """A run violates the TREC run invariants (ranks, uniqueness, order)."""


def _norm(text: str) -> str:
    return unicodedata.normalize("NFC", text.replace("\r", "").replace("\n", ""))


def _iter_lines(stream: IO[str] | Iterable[str]) -> Iterator[str]:
    for line in stream:
        yield line


@dataclass(frozen=True)
class Query:
    qid: str
    text: str


@dataclass(frozen=True)
class Passage:
    docid: str
    text: str
    title: Optional[str] = None


def display_text(passage: Passage, include_title: bool = False) -> str:
    """Passage text as fed to prompts and scorers.

    Title concatenation ("{title}. {text}") happens here, not at parse
    time, so raw corpora stay lossless.
    """
    if include_title and passage.title:
        return f"{passage.title}. {passage.text}"
    return passage.text


class Qrels:
    """Graded relevance judgments keyed by (qid, docid).

    Grades are integers >= 0. Lookups of unjudged pairs return None,
    which is distinct from an explicit grade of 0.
    """

    def __init__(self, judgments: dict[tuple[str, str], int] | None = None):
        self._judgments: dict[tuple[str, str], int] = {}
        self._by_query: dict[str, dict[str, int]] = {}
        if judgments:
            for (qid, docid), grade in judgments.items():
                self.add(qid, docid, grade)

    def add(self, qid: str, docid: str, grade: int) -> None:
        if grade < 0:
            raise ValueError(f"negative grade {grade} for ({qid}, {docid})")
        self._judgments[(qid, docid)] = grade
        self._by_query.setdefault(qid, {})[docid] = grade

    def get(self, qid: str, docid: str) -> int | None:
        """Grade for (qid, docid), or None if the pair is unjudged."""
        return self._judgments.get((qid, docid))

    def judged_docs(self, qid: str) -> dict[str, int]:
        return dict(self._by_query.get(qid, {}))

    @property
    def judgments(self) -> dict[tuple[str, str], int]:
        return dict(self._judgments)

    def query_ids(self) -> list[str]:
        return sorted(self._by_query)

    def __len__(self) -> int:
        return len(self._judgments)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Qrels) and self._judgments == other._judgments


@dataclass(frozen=True)
class TrecRunEntry:
    qid: str
    docid: str
    rank: int
    score: float
    tag: str


@dataclass(frozen=True)
class CandidateSet:
    """One query's first-stage candidates, in rank order."""

    qid: str
    candidates: tuple[tuple[str, float], ...]  # (docid, first-stage score)

    def __post_init__(self):
        if not self.candidates:
            raise ValueError(f"empty candidate set for query {self.qid}")
        docids = [d for d, _ in self.candidates]
        if len(set(docids)) != len(docids):
            raise ValueError(f"duplicate docids in candidate set for query {self.qid}")

    def docids(self) -> list[str]:
        return [d for d, _ in self.candidates]


def _check_id(value: str, what: str, line_no: int | None = None) -> str:
    if not value or any(c.isspace() for c in value):
        raise ParseError(f"invalid {what} {value!r}", line_no)
    return value


def parse_queries_tsv(stream: IO[str] | Iterable[str]) -> list[Query]:
    """Parse `qid<TAB>text` lines; order preserved, duplicate qids rejected."""
    queries: list[Query] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(_iter_lines(stream), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise ParseError("expected qid<TAB>text", line_no)
        qid, text = line.split("\t", 1)
        qid = _check_id(_norm(qid), "qid", line_no)
        text = _norm(text)
        if not text:
            raise ParseError(f"empty query text for qid {qid!r}", line_no)
        if qid in seen:
            raise ParseError(f"duplicate qid {qid!r}", line_no)
        seen.add(qid)
        queries.append(Query(qid=qid, text=text))
    return queries


def parse_collection_tsv(stream: IO[str] | Iterable[str]) -> Iterator[Passage]:
    """Stream `docid<TAB>text` lines lazily; never materializes the corpus."""
    for line_no, raw in enumerate(_iter_lines(stream), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise ParseError("expected docid<TAB>text", line_no)
        docid, text = line.split("\t", 1)
        docid = _check_id(_norm(docid), "docid", line_no)
        yield Passage(docid=docid, text=_norm(text))


def parse_beir_corpus(stream: IO[str] | Iterable[str]) -> Iterator[Passage]:
    """Stream a BEIR JSONL corpus: objects with `_id`, `text`, optional `title`."""
    for line_no, raw in enumerate(_iter_lines(stream), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", line_no)
        for key in ("_id", "text"):
            if key not in obj:
                raise ParseError(f"missing field {key!r}", line_no)
        docid = _check_id(_norm(str(obj["_id"])), "docid", line_no)
        title = obj.get("title")
        yield Passage(
            docid=docid,
            text=_norm(str(obj["text"])),
            title=_norm(str(title)) if title is not None and title != "" else None,
        )


def parse_qrels(stream: IO[str] | Iterable[str]) -> Qrels:
    """Parse `qid 0 docid grade` lines (whitespace-separated; col 2 ignored).

    Duplicate (qid, docid) pairs with equal grades deduplicate silently;
    conflicting grades are an error.
    """
    qrels = Qrels()
    for line_no, raw in enumerate(_iter_lines(stream), start=1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", line_no)
        qid, _iter_col, docid, grade_str = parts
        qid = _check_id(_norm(qid), "qid", line_no)
        docid = _check_id(_norm(docid), "docid", line_no)
        try:
            grade = int(grade_str)
        except ValueError:
            raise ParseError(f"non-integer grade {grade_str!r}", line_no) from None
        if grade < 0:
            raise ParseError(f"negative grade {grade}", line_no)
        existing = qrels.get(qid, docid)
        if existing is not None and existing != grade:
            raise ParseError(
                f"conflicting grades for ({qid}, {docid}): {existing} vs {grade}", line_no
            )
        qrels.add(qid, docid, grade)
    return qrels


def serialize_qrels(qrels: Qrels, stream: IO[str]) -> None:
    """Write qrels as `qid 0 docid grade`, sorted by (qid, docid)."""
    for (qid, docid), grade in sorted(qrels.judgments.items()):
        stream.write(f"{qid} 0 {docid} {grade}\n")


def validate_run(entries: Iterable[TrecRunEntry]) -> None:
    """Check TREC run invariants: per qid, ranks 1..n contiguous, docids
    unique, scores non-increasing with rank; all scores finite."""
    import math

    per_qid: dict[str, list[TrecRunEntry]] = {}
    for e in entries:
        if not e.qid or not e.docid:
            raise RunFormatError(f"empty qid/docid in entry {e}")
        if not math.isfinite(e.score):
            raise RunFormatError(f"non-finite score for ({e.qid}, {e.docid})")
        per_qid.setdefault(e.qid, []).append(e)
    for qid, group in per_qid.items():
        group_sorted = sorted(group, key=lambda e: e.rank)
        ranks = [e.rank for e in group_sorted]
        if ranks != list(range(1, len(group) + 1)):
            raise RunFormatError(f"ranks for query {qid} are not contiguous 1..n: {ranks}")
        docids = [e.docid for e in group_sorted]
        if len(set(docids)) != len(docids):
            raise RunFormatError(f"duplicate docids for query {qid}")
        for a, b in zip(group_sorted, group_sorted[1:]):
            if a.score < b.score:
                raise RunFormatError(
                    f"scores increase with rank for query {qid}: "
                    f"rank {a.rank} has {a.score} < rank {b.rank}'s {b.score}"
                )


def write_run(entries: list[TrecRunEntry], stream: IO[str]) -> None:
    """Write `qid Q0 docid rank score tag` lines, score with 6 fractional
    digits; queries stay in input order. Validates invariants first so an
    invalid run never produces partial output."""
    validate_run(entries)
    for e in entries:
        stream.write(f"{e.qid} Q0 {e.docid} {e.rank} {e.score:.6f} {e.tag}\n")


def parse_run(stream: IO[str] | Iterable[str], strict: bool = True) -> list[TrecRunEntry]:
    """Parse a TREC run file (variable whitespace tolerated).

    With strict=True (default) the parsed run must satisfy the same
    invariants write_run enforces.
    """
    entries: list[TrecRunEntry] = []
    for line_no, raw in enumerate(_iter_lines(stream), start=1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", line_no)
        qid, _q0, docid, rank_str, score_str, tag = parts
        try:
            rank = int(rank_str)
        except ValueError:
            raise ParseError(f"non-integer rank {rank_str!r}", line_no) from None
        try:
            score = float(score_str)
        except ValueError:
            raise ParseError(f"non-numeric score {score_str!r}", line_no) from None
        entries.append(
            TrecRunEntry(qid=_norm(qid), docid=_norm(docid), rank=rank, score=score, tag=tag)
        )
    if strict:
        validate_run(entries)
    return entries


def candidate_sets_from_run(
    entries: Iterable[TrecRunEntry], depth: int | None = None
) -> list[CandidateSet]:
    """Group run entries into per-query candidate sets (rank order), keeping
    the queries in first-appearance order; optionally cut at `depth`."""
    order: list[str] = []
    per_qid: dict[str, list[TrecRunEntry]] = {}
    for e in entries:
        if e.qid not in per_qid:
            order.append(e.qid)
            per_qid[e.qid] = []
        per_qid[e.qid].append(e)
    sets = []
    for qid in order:
        group = sorted(per_qid[qid], key=lambda e: e.rank)
        if depth is not None:
            group = group[:depth]
        sets.append(CandidateSet(qid=qid, candidates=tuple((e.docid, e.score) for e in group)))
    return sets
