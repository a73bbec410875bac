"""Fine-tuning dataset handling: JSONL records, label parsing, balanced
batches.

Datasets with and without explanations go through the identical path;
the target string is the only difference. Every batch carries an equal
number of relevant and non-relevant examples (shuffled within class per
epoch, seeded); if the classes are unequal the smaller one is oversampled
with a warning.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Record:
    source: str
    target: str
    relevant: bool


class DatasetError(Exception):
    pass


def _leading_label(target: str, vocabulary: tuple[str, str]) -> bool | None:
    trimmed = target.strip()
    lower = trimmed.lower()
    for word in sorted(vocabulary, key=len, reverse=True):
        w = word.lower()
        if lower.startswith(w) and (len(trimmed) == len(w) or not trimmed[len(w)].isalnum()):
            return word == vocabulary[0]
    return None


def load_records(path: str | Path, vocabulary: tuple[str, str] = ("true", "false")) -> list[Record]:
    """Parse FinetuneRecord JSONL; abort naming the row on a bad label."""
    records: list[Record] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                source, target = obj["source"], obj["target"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise DatasetError(f"row {line_no}: malformed record ({exc})") from None
            label = _leading_label(target, vocabulary)
            if label is None:
                raise DatasetError(
                    f"row {line_no}: target does not start with a label token "
                    f"from {vocabulary}: {target[:60]!r}"
                )
            records.append(Record(source=source, target=target, relevant=label))
    return records


def balanced_batches(
    records: list[Record], batch_size: int, seed: int, epoch: int
) -> Iterator[list[Record]]:
    """Yield batches of batch_size/2 relevant + batch_size/2 non-relevant.

    Within-class order reshuffles every epoch. The smaller class is
    oversampled (with replacement) up to the larger one, with a warning.
    """
    if batch_size < 2 or batch_size % 2:
        raise ValueError("batch_size must be even and >= 2")
    pos = [r for r in records if r.relevant]
    neg = [r for r in records if not r.relevant]
    if not pos or not neg:
        raise DatasetError("balanced batching needs at least one example per class")
    rnd = random.Random((seed << 16) ^ epoch)
    rnd.shuffle(pos)
    rnd.shuffle(neg)
    if len(pos) != len(neg):
        smaller, larger = (pos, neg) if len(pos) < len(neg) else (neg, pos)
        logger.warning(
            "classes unequal (%d vs %d); oversampling the smaller class",
            len(smaller), len(larger),
        )
        smaller.extend(rnd.choice(smaller) for _ in range(len(larger) - len(smaller)))
    half = batch_size // 2
    n = min(len(pos), len(neg))
    for start in range(0, n, half):
        batch_pos = pos[start:start + half]
        batch_neg = neg[start:start + half]
        if not batch_pos or not batch_neg:
            break
        yield batch_pos + batch_neg
