"""trec_eval-compatible nDCG@k, aggregate reports, checkpoint selection,
and comparison tables.

Conventions pinned here (they decide whether numbers match the reference
tool): linear gain (grade / log2(rank+1), not 2^grade-1); run order is
recomputed as (score desc, docid desc) regardless of stored ranks;
queries present in qrels but absent from the run contribute 0 to the
mean (trec_eval -c); nDCG is 0 when the ideal DCG is 0. Display rounding
is 3 decimals, half away from zero.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import IO, Mapping, Optional, Sequence

from .corpus_io import Qrels, TrecRunEntry
from .errors import ExplainrankError

DEFAULT_ZERO_SHOT_IDS = ("robust04", "trec-covid", "dbpedia", "fiqa", "trec-news", "nfcorpus")

_COLUMN_HEADERS = {
    "dl20": "DL 20",
    "robust04": "Robust",
    "trec-covid": "Covid",
    "dbpedia": "Dbp",
    "fiqa": "FiQA",
    "trec-news": "News",
    "nfcorpus": "NFC",
}


class EvalError(ExplainrankError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    k: int = 10
    validation_dataset_id: str = "dl20"
    zero_shot_dataset_ids: tuple[str, ...] = DEFAULT_ZERO_SHOT_IDS

    def __post_init__(self):
        if self.k < 1:
            raise EvalError("cutoff k must be >= 1")
        if self.validation_dataset_id in self.zero_shot_dataset_ids:
            raise EvalError("validation dataset must not be in the zero-shot list")


@dataclass(frozen=True)
class MetricReport:
    dataset_id: str
    k: int
    per_query: dict[str, float]
    mean: float
    n_queries: int

    def as_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "k": self.k,
            "mean": self.mean,
            "n_queries": self.n_queries,
            "per_query": dict(sorted(self.per_query.items())),
        }


def round_display(value: float, places: int = 3) -> float:
    """Round for display: half away from zero (paper-table convention)."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def _dcg(gains: Sequence[int], k: int) -> float:
    return math.fsum(g / math.log2(i + 1) for i, g in enumerate(gains[:k], start=1))


def ndcg_at_k(
    run: Sequence[TrecRunEntry], qrels: Qrels, k: int = 10, dataset_id: str = ""
) -> MetricReport:
    """Mean nDCG@k over every qrels query.

    Run entries for queries without judgments are ignored; judged queries
    missing from the run score 0.
    """
    if k < 1:
        raise EvalError("cutoff k must be >= 1")
    by_query: dict[str, list[TrecRunEntry]] = {}
    for e in run:
        by_query.setdefault(e.qid, []).append(e)

    per_query: dict[str, float] = {}
    for qid in qrels.query_ids():
        judged = qrels.judged_docs(qid)
        ideal_gains = sorted(judged.values(), reverse=True)
        idcg = _dcg(ideal_gains, k)
        if idcg == 0.0:
            per_query[qid] = 0.0
            continue
        entries = by_query.get(qid)
        if not entries:
            per_query[qid] = 0.0
            continue
        ordered = sorted(entries, key=lambda e: (e.score, e.docid), reverse=True)
        gains = [judged.get(e.docid, 0) for e in ordered]
        per_query[qid] = _dcg(gains, k) / idcg

    qids = sorted(per_query)
    mean = math.fsum(per_query[q] for q in qids) / len(qids) if qids else 0.0
    return MetricReport(
        dataset_id=dataset_id, k=k, per_query=per_query, mean=mean, n_queries=len(qids)
    )


def avg_zero_shot(means: Mapping[str, float], config: EvalConfig = EvalConfig()) -> float:
    """Unweighted arithmetic mean over the configured zero-shot datasets."""
    missing = [d for d in config.zero_shot_dataset_ids if d not in means]
    if missing:
        raise EvalError(f"missing zero-shot dataset mean(s): {missing}")
    return math.fsum(means[d] for d in config.zero_shot_dataset_ids) / len(
        config.zero_shot_dataset_ids
    )


def select_checkpoint(history: Sequence[tuple[int, float]]) -> int:
    """Epoch with the highest validation nDCG@k; ties go to the earliest."""
    if not history:
        raise EvalError("checkpoint history is empty")
    best_epoch, best_score = None, -math.inf
    for epoch, score in sorted(history, key=lambda t: t[0]):
        if score > best_score:
            best_epoch, best_score = epoch, score
    return best_epoch


@dataclass(frozen=True)
class ComparisonRow:
    model_name: str
    ft_pos: int
    dataset_means: dict[str, float] = field(default_factory=dict)
    avg_zs: Optional[float] = None
    llm: Optional[str] = None
    validation_mean: Optional[float] = None

    @classmethod
    def from_dataset_means(
        cls,
        model_name: str,
        ft_pos: int,
        dataset_means: Mapping[str, float],
        config: EvalConfig = EvalConfig(),
        llm: str | None = None,
    ) -> "ComparisonRow":
        means = dict(dataset_means)
        return cls(
            model_name=model_name,
            ft_pos=ft_pos,
            dataset_means=means,
            avg_zs=avg_zero_shot(means, config),
            llm=llm,
            validation_mean=means.get(config.validation_dataset_id),
        )


@dataclass(frozen=True)
class ImprovementReport:
    per_size: tuple[tuple[int, float], ...]  # (ft_pos, avg_zs delta), largest size first
    mean_delta: float

    def as_points(self) -> list[tuple[int, float]]:
        """Deltas in nDCG "points" (x100), display-rounded to one decimal."""
        return [(n, round_display(d * 100, 1)) for n, d in self.per_size]


def improvement_report(
    rows_a: Sequence[ComparisonRow], rows_b: Sequence[ComparisonRow]
) -> ImprovementReport:
    """Per-size avg_zs deltas (a minus b, matched on ft_pos) plus their mean."""
    by_size_a = {r.ft_pos: r for r in rows_a}
    by_size_b = {r.ft_pos: r for r in rows_b}
    if set(by_size_a) != set(by_size_b):
        unmatched = sorted(set(by_size_a) ^ set(by_size_b))
        raise EvalError(f"unmatched ft_pos sizes: {unmatched}")
    for rows in (rows_a, rows_b):
        if len({r.ft_pos for r in rows}) != len(rows):
            raise EvalError("duplicate ft_pos within one row set")
    deltas = []
    for size in sorted(by_size_a, reverse=True):
        a, b = by_size_a[size], by_size_b[size]
        if a.avg_zs is None or b.avg_zs is None:
            raise EvalError(f"rows for ft_pos={size} lack avg_zs")
        deltas.append((size, a.avg_zs - b.avg_zs))
    mean_delta = math.fsum(d for _, d in deltas) / len(deltas)
    return ImprovementReport(per_size=tuple(deltas), mean_delta=mean_delta)


def _fmt_count(n: int) -> str:
    if n >= 1000:
        return f"{n / 1000:g}k"
    return str(n)


def _row_cells(row: ComparisonRow, dataset_ids: Sequence[str]) -> list[str]:
    cells = [row.model_name, row.llm or "n/a", _fmt_count(row.ft_pos)]
    for did in dataset_ids:
        value = row.dataset_means.get(did)
        cells.append(f"{round_display(value):.3f}" if value is not None else "-")
    cells.append(f"{round_display(row.avg_zs):.3f}" if row.avg_zs is not None else "-")
    return cells


def format_comparison_table(
    rows: Sequence[ComparisonRow], config: EvalConfig = EvalConfig()
) -> str:
    """Aligned text table: Model, LLM, Ft Pos., per-dataset means, Avg ZS."""
    dataset_ids = (config.validation_dataset_id,) + tuple(config.zero_shot_dataset_ids)
    header = (
        ["Model", "LLM", "Ft Pos."]
        + [_COLUMN_HEADERS.get(d, d) for d in dataset_ids]
        + ["Avg ZS"]
    )
    table = [header] + [_row_cells(r, dataset_ids) for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_report_csv(
    rows: Sequence[ComparisonRow], stream: IO[str], config: EvalConfig = EvalConfig()
) -> None:
    """Full-precision CSV for downstream plotting (nDCG vs training size)."""
    dataset_ids = (config.validation_dataset_id,) + tuple(config.zero_shot_dataset_ids)
    writer = csv.writer(stream)
    writer.writerow(["model", "llm", "ft_pos"] + list(dataset_ids) + ["avg_zs"])
    for r in rows:
        writer.writerow(
            [r.model_name, r.llm or "", r.ft_pos]
            + [r.dataset_means.get(d, "") for d in dataset_ids]
            + [r.avg_zs if r.avg_zs is not None else ""]
        )


def rows_to_json(rows: Sequence[ComparisonRow]) -> str:
    return json.dumps(
        [
            {
                "model": r.model_name,
                "llm": r.llm,
                "ft_pos": r.ft_pos,
                "dataset_means": r.dataset_means,
                "avg_zs": r.avg_zs,
            }
            for r in rows
        ],
        indent=2,
        ensure_ascii=False,
    )
