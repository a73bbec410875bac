"""Explanation generation over sampled pairs, with label-integrity checks
and export of seq2seq fine-tuning datasets.

An LLM output is only accepted when its leading label token agrees with
the pair's qrels-derived label, so explanations can never flip a label.
Contradicting or unparseable outputs are retried with a corrective suffix
stating the expected label; retries carry a retry-count cache salt so a
cached wrong answer is never replayed. After the retry budget, items fall
back to a label-only target (or are marked failed, per policy).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import ExplainrankError
from .llm_client import CompletionRequest, GenerationConfig, LlmClient, request_cache_key
from .prompts import FewShotExample, PromptTemplate, render_prompt
from .sampler import LabeledPair

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_FALLBACK = "fallback_label_only"
STATUS_FAILED = "failed"
STATUSES = (STATUS_OK, STATUS_FALLBACK, STATUS_FAILED)

DEFAULT_INPUT_FORMAT = "Is the question: '{query}' answered by the document: '{passage}'?"


class OutputParseError(ExplainrankError):
    pass


class ExportError(ExplainrankError):
    pass


def parse_llm_output(text: str, vocabulary: tuple[str, str]) -> tuple[bool, str]:
    """Split model output into (label, explanation).

    The label is the first vocabulary token matched case-insensitively at
    the start of the trimmed text (word-boundary required); the explanation
    is the remainder after a leading separator and an optional
    "Explanation:" marker. Raises OutputParseError when no token matches.
    """
    trimmed = text.strip()
    lower = trimmed.lower()
    # Longest token first so one vocabulary word being a prefix of the
    # other can't shadow it.
    for word in sorted(vocabulary, key=len, reverse=True):
        w = word.lower()
        if lower.startswith(w) and (len(trimmed) == len(w) or not trimmed[len(w)].isalnum()):
            rest = trimmed[len(w):].lstrip(" \t\r\n.,:;!?—–-")
            rest_lower = rest.lower()
            if rest_lower.startswith("explanation"):
                rest = rest[len("explanation"):].lstrip(" \t:—–-")
            return word == vocabulary[0], rest.strip()
    raise OutputParseError(f"no label token at start of output: {trimmed[:80]!r}")


@dataclass(frozen=True)
class ExplainedExample:
    pair: LabeledPair
    explanation: str
    llm_model: str
    prompt_digest: str
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == STATUS_OK and not self.explanation:
            raise ValueError("status=ok requires a non-empty explanation")
        if self.status == STATUS_FALLBACK and self.explanation:
            raise ValueError("status=fallback_label_only requires an empty explanation")


@dataclass(frozen=True)
class FinetuneRecord:
    source: str
    target: str


@dataclass
class AugmentStats:
    ok: int = 0
    fallback_label_only: int = 0
    failed: int = 0
    retry_total: int = 0
    # attempt-level failure tallies, keyed by the pair's gold label
    parse_failures: dict[str, int] = field(
        default_factory=lambda: {"relevant": 0, "non_relevant": 0}
    )
    label_contradictions: dict[str, int] = field(
        default_factory=lambda: {"relevant": 0, "non_relevant": 0}
    )
    request_errors: int = 0

    def total(self) -> int:
        return self.ok + self.fallback_label_only + self.failed

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "fallback_label_only": self.fallback_label_only,
            "failed": self.failed,
            "retry_total": self.retry_total,
            "parse_failures": dict(self.parse_failures),
            "label_contradictions": dict(self.label_contradictions),
            "request_errors": self.request_errors,
        }


@dataclass(frozen=True)
class AugmentPolicy:
    max_retries: int = 2
    fallback_label_only: bool = True  # False marks exhausted items as failed

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def _label_key(pair: LabeledPair) -> str:
    return "relevant" if pair.label else "non_relevant"


def _retry_suffix(template: PromptTemplate, pair: LabeledPair) -> str:
    word = template.label_word(pair.label)
    return (
        f"\n\nThe correct answer is {word}. "
        f"Answer {word} and give an explanation consistent with that answer."
    )


def augment(
    pairs: Sequence[LabeledPair],
    template: PromptTemplate,
    shots: Sequence[FewShotExample],
    client: LlmClient,
    gen_config: GenerationConfig,
    policy: AugmentPolicy = AugmentPolicy(),
    max_in_flight: int = 8,
) -> tuple[list[ExplainedExample], AugmentStats]:
    """Generate one ExplainedExample per pair, preserving input order."""
    stats = AugmentStats()
    examples: list[ExplainedExample | None] = [None] * len(pairs)
    base_prompts = [render_prompt(template, shots, p) for p in pairs]

    pending = list(range(len(pairs)))
    attempt = 0
    while pending:
        requests = []
        for idx in pending:
            prompt = base_prompts[idx]
            salt = ""
            if attempt > 0:
                prompt = prompt + _retry_suffix(template, pairs[idx])
                salt = f"retry={attempt}"
            requests.append(CompletionRequest(config=gen_config, user=prompt, cache_salt=salt))
        results = client.batch_generate(requests, max_in_flight=max_in_flight)

        still_failing: list[int] = []
        for idx, request, result in zip(pending, requests, results):
            pair = pairs[idx]
            ok = False
            if result.finish_reason == "error":
                stats.request_errors += 1
            else:
                try:
                    label, explanation = parse_llm_output(
                        result.text, template.label_vocabulary
                    )
                except OutputParseError:
                    stats.parse_failures[_label_key(pair)] += 1
                else:
                    if label != pair.label:
                        stats.label_contradictions[_label_key(pair)] += 1
                    elif explanation:
                        examples[idx] = ExplainedExample(
                            pair=pair,
                            explanation=explanation,
                            llm_model=gen_config.model_id,
                            prompt_digest=request_cache_key(request),
                            status=STATUS_OK,
                        )
                        ok = True
                    else:
                        stats.parse_failures[_label_key(pair)] += 1
            if ok:
                stats.ok += 1
            elif attempt < policy.max_retries:
                still_failing.append(idx)
            else:
                status = STATUS_FALLBACK if policy.fallback_label_only else STATUS_FAILED
                examples[idx] = ExplainedExample(
                    pair=pair,
                    explanation="",
                    llm_model=gen_config.model_id,
                    prompt_digest=request_cache_key(
                        CompletionRequest(config=gen_config, user=base_prompts[idx])
                    ),
                    status=status,
                )
                if status == STATUS_FALLBACK:
                    stats.fallback_label_only += 1
                else:
                    stats.failed += 1
        stats.retry_total += len(still_failing)
        pending = still_failing
        attempt += 1

    assert stats.total() == len(pairs)
    return [e for e in examples if e is not None], stats


def _validate_input_format(input_format: str) -> None:
    import string

    names = {name for _, name, _, _ in string.Formatter().parse(input_format) if name is not None}
    unknown = names - {"query", "passage"}
    if unknown:
        raise ExportError(f"unknown placeholder(s) in input format: {sorted(unknown)}")


def render_source(pair: LabeledPair, input_format: str = DEFAULT_INPUT_FORMAT) -> str:
    return input_format.format(query=pair.query_text, passage=pair.passage_text)


def export_finetune(
    examples: Iterable[ExplainedExample],
    with_explanations: bool,
    stream: IO[str],
    input_format: str = DEFAULT_INPUT_FORMAT,
    vocabulary: tuple[str, str] = ("true", "false"),
) -> dict[str, int]:
    """Write FinetuneRecord JSONL; returns {"exported": n, "skipped": n}.

    Truncation is deliberately NOT applied here; the trainer owns the
    512-token budget.
    """
    _validate_input_format(input_format)
    exported = skipped = 0
    for ex in examples:
        if ex.status == STATUS_FAILED:
            skipped += 1
            continue
        label_word = vocabulary[0] if ex.pair.label else vocabulary[1]
        if with_explanations and ex.status == STATUS_OK:
            target = f"{label_word}. Explanation: {ex.explanation}"
        else:
            target = label_word
        record = {"source": render_source(ex.pair, input_format), "target": target}
        stream.write(json.dumps(record, ensure_ascii=False) + "\n")
        exported += 1
    if skipped:
        logger.warning("export skipped %d failed example(s)", skipped)
    return {"exported": exported, "skipped": skipped}


def write_examples_jsonl(examples: Iterable[ExplainedExample], stream: IO[str]) -> None:
    for ex in examples:
        stream.write(
            json.dumps(
                {
                    "qid": ex.pair.qid,
                    "docid": ex.pair.docid,
                    "query": ex.pair.query_text,
                    "passage": ex.pair.passage_text,
                    "label": ex.pair.label,
                    "explanation": ex.explanation,
                    "llm_model": ex.llm_model,
                    "prompt_digest": ex.prompt_digest,
                    "status": ex.status,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


def read_examples_jsonl(stream: IO[str] | Iterable[str]) -> list[ExplainedExample]:
    examples = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            examples.append(
                ExplainedExample(
                    pair=LabeledPair(
                        qid=obj["qid"],
                        docid=obj["docid"],
                        query_text=obj["query"],
                        passage_text=obj["passage"],
                        label=bool(obj["label"]),
                    ),
                    explanation=obj["explanation"],
                    llm_model=obj["llm_model"],
                    prompt_digest=obj["prompt_digest"],
                    status=obj["status"],
                )
            )
        except (json.JSONDecodeError, KeyError) as exc:
            raise ExportError(f"augmented file line {line_no}: {exc}") from None
    return examples


def read_finetune_jsonl(stream: IO[str] | Iterable[str]) -> list[FinetuneRecord]:
    records = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            records.append(FinetuneRecord(source=obj["source"], target=obj["target"]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ExportError(f"finetune file line {line_no}: {exc}") from None
    return records
