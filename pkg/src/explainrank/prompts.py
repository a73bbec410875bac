"""Few-shot prompt templates for explanation generation.

Templates are validated at load time (unknown placeholders fail fast,
never at render time) and render deterministically: byte-identical
prompts for identical inputs. The bundled default template and shot file
are reconstructions of a monoT5-style relevance prompt, marked as such
in the data files, and are meant to be overridden by config.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import string
from dataclasses import dataclass
from importlib import resources
from typing import IO, Any, Mapping, Sequence

from .errors import ExplainrankError
from .sampler import LabeledPair


class TemplateError(ExplainrankError):
    pass


_SHOT_PLACEHOLDERS = frozenset({"query", "passage", "label", "explanation"})
_QUERY_PLACEHOLDERS = frozenset({"query", "passage"})


def _placeholders(fmt: str) -> set[str]:
    try:
        return {name for _, name, _, _ in string.Formatter().parse(fmt) if name is not None}
    except ValueError as exc:
        raise TemplateError(f"malformed format string: {exc}") from exc


@dataclass(frozen=True)
class PromptTemplate:
    shot_format: str
    query_format: str
    system_text: str | None = None
    label_vocabulary: tuple[str, str] = ("true", "false")  # (relevant, non-relevant)

    def __post_init__(self):
        rel, nonrel = self.label_vocabulary
        if not rel or not nonrel or rel == nonrel:
            raise TemplateError("label_vocabulary must be two distinct non-empty strings")
        unknown = _placeholders(self.shot_format) - _SHOT_PLACEHOLDERS
        if unknown:
            raise TemplateError(f"unknown placeholder(s) in shot_format: {sorted(unknown)}")
        unknown = _placeholders(self.query_format) - _QUERY_PLACEHOLDERS
        if unknown:
            raise TemplateError(f"unknown placeholder(s) in query_format: {sorted(unknown)}")

    def label_word(self, relevant: bool) -> str:
        return self.label_vocabulary[0] if relevant else self.label_vocabulary[1]


@dataclass(frozen=True)
class FewShotExample:
    query: str
    passage: str
    label: str
    explanation: str

    def __post_init__(self):
        if not self.explanation:
            raise TemplateError("shot explanation must be non-empty")


def render_prompt(
    template: PromptTemplate, shots: Sequence[FewShotExample], pair: LabeledPair
) -> str:
    """System text, each shot in order, then the target pair's query block.

    The pair's label is never substituted into the final block.
    """
    blocks: list[str] = []
    if template.system_text:
        blocks.append(template.system_text)
    for shot in shots:
        if shot.label not in template.label_vocabulary:
            raise TemplateError(
                f"shot label {shot.label!r} not in vocabulary {template.label_vocabulary}"
            )
        blocks.append(
            template.shot_format.format(
                query=shot.query,
                passage=shot.passage,
                label=shot.label,
                explanation=shot.explanation,
            )
        )
    blocks.append(template.query_format.format(query=pair.query_text, passage=pair.passage_text))
    return "\n\n".join(blocks).rstrip()


def prompt_digest(prompt: str, model_id: str, config: Mapping[str, Any] | Any) -> str:
    """256-bit hex digest over (model id, canonical config, prompt bytes).

    Any config change (temperature, token limit, stops) changes the key.
    """
    if dataclasses.is_dataclass(config) and not isinstance(config, type):
        config = dataclasses.asdict(config)
    canonical = json.dumps(
        {"config": config, "model": model_id, "prompt": prompt},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _template_from_obj(obj: dict) -> PromptTemplate:
    if not isinstance(obj, dict):
        raise TemplateError("template file must contain a JSON object")
    for key in ("shot_format", "query_format"):
        if key not in obj:
            raise TemplateError(f"template file missing {key!r}")
    vocab = obj.get("label_vocabulary", ["true", "false"])
    if not (isinstance(vocab, (list, tuple)) and len(vocab) == 2):
        raise TemplateError("label_vocabulary must be a 2-element array")
    return PromptTemplate(
        shot_format=obj["shot_format"],
        query_format=obj["query_format"],
        system_text=obj.get("system_text"),
        label_vocabulary=(str(vocab[0]), str(vocab[1])),
    )


def load_template(stream: IO[str]) -> PromptTemplate:
    try:
        obj = json.load(stream)
    except json.JSONDecodeError as exc:
        raise TemplateError(f"template file is not valid JSON: {exc.msg}") from exc
    return _template_from_obj(obj)


def load_shots(stream: IO[str], template: PromptTemplate | None = None) -> list[FewShotExample]:
    """Load a versioned shots file: {"version": ..., "shots": [...]}."""
    try:
        obj = json.load(stream)
    except json.JSONDecodeError as exc:
        raise TemplateError(f"shots file is not valid JSON: {exc.msg}") from exc
    if isinstance(obj, list):  # bare array accepted
        raw_shots = obj
    elif isinstance(obj, dict) and "shots" in obj:
        raw_shots = obj["shots"]
    else:
        raise TemplateError('shots file must be an array or an object with a "shots" key')
    shots = []
    for i, item in enumerate(raw_shots):
        try:
            shot = FewShotExample(
                query=item["query"],
                passage=item["passage"],
                label=item["label"],
                explanation=item["explanation"],
            )
        except (KeyError, TypeError):
            raise TemplateError(f"shot #{i} is missing required fields") from None
        if template is not None and shot.label not in template.label_vocabulary:
            raise TemplateError(
                f"shot #{i} label {shot.label!r} not in vocabulary {template.label_vocabulary}"
            )
        shots.append(shot)
    return shots


def default_template() -> PromptTemplate:
    with resources.files("explainrank.data").joinpath("default_template.json").open(
        "r", encoding="utf-8"
    ) as f:
        return load_template(f)


def default_shots(template: PromptTemplate | None = None) -> list[FewShotExample]:
    with resources.files("explainrank.data").joinpath("default_shots.json").open(
        "r", encoding="utf-8"
    ) as f:
        return load_shots(f, template)
