"""Command-line entry point: sample, augment, export, rerank, eval, report.

Every command resolves its settings as defaults < --config file < explicit
flags, and drops a `<output>.manifest.json` recording the resolved
configuration plus SHA-256 digests of every input and output file, so any
artifact can be traced back to exactly what produced it.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .augmenter import (
    DEFAULT_INPUT_FORMAT,
    AugmentPolicy,
    augment,
    export_finetune,
    read_examples_jsonl,
    write_examples_jsonl,
)
from .corpus_io import (
    Passage,
    parse_beir_corpus,
    parse_collection_tsv,
    parse_qrels,
    parse_queries_tsv,
    parse_run,
    candidate_sets_from_run,
    write_run,
)
from .errors import ExplainrankError, UsageError
from .evaluator import (
    ComparisonRow,
    EvalConfig,
    avg_zero_shot,
    format_comparison_table,
    improvement_report,
    ndcg_at_k,
    round_display,
    rows_to_json,
    write_report_csv,
)
from .llm_client import GenerationConfig, LlmClient, ResponseCache, RetryPolicy
from .prompts import default_shots, default_template, load_shots, load_template, render_prompt
from .reranker import ScorerEndpoint, rerank_candidates
from .sampler import SamplePlan, read_pairs_jsonl, sample_pairs, write_pairs_jsonl


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_file(path: str | None, flag: str) -> Path:
    if not path:
        raise UsageError(f"missing required input: {flag}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: file not found: {p}")
    return p


def _load_config_file(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"--config: file not found: {p}")
    try:
        with p.open("r", encoding="utf-8") as f:
            obj = json.load(f)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise UsageError("--config: top level must be a JSON object")
    return obj


class _Resolver:
    """defaults < config file (flat keys, or per-command section) < flags."""

    def __init__(self, args: argparse.Namespace, command: str):
        config = _load_config_file(getattr(args, "config", None))
        section = config.get(command, {})
        self._layers = [section if isinstance(section, dict) else {}, config]
        self._args = args
        self.resolved: dict[str, Any] = {}

    def get(self, key: str, default: Any = None) -> Any:
        value = getattr(self._args, key, None)
        if value is None:
            for layer in self._layers:
                if key in layer:
                    value = layer[key]
                    break
        if value is None:
            value = default
        self.resolved[key] = value
        return value


def _write_manifest(
    out_path: Path, command: str, resolved: dict[str, Any], inputs: dict[str, str],
    outputs: dict[str, str],
) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "created_unix": time.time(),
        "resolved_config": {k: v for k, v in sorted(resolved.items())},
        "inputs": inputs,
        "outputs": outputs,
    }
    manifest_path = out_path.with_name(out_path.name + ".manifest.json")
    with manifest_path.open("w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, ensure_ascii=False)
        f.write("\n")


def _load_collection(path: Path, fmt: str) -> dict[str, Passage]:
    with path.open("r", encoding="utf-8") as f:
        if fmt == "beir":
            passages = parse_beir_corpus(f)
        elif fmt == "tsv":
            passages = parse_collection_tsv(f)
        else:
            raise UsageError(f"--collection-format must be tsv or beir, got {fmt!r}")
        return {p.docid: p for p in passages}


def _resolve_api_key(res: _Resolver) -> str | None:
    env_name = res.get("api_key_env")
    if not env_name:
        return None
    return os.environ.get(env_name)


def _load_template_and_shots(res: _Resolver):
    template_path = res.get("template")
    if template_path:
        with _require_file(template_path, "--template").open("r", encoding="utf-8") as f:
            template = load_template(f)
    else:
        template = default_template()
    shots_path = res.get("shots")
    if shots_path:
        with _require_file(shots_path, "--shots").open("r", encoding="utf-8") as f:
            shots = load_shots(f, template)
    else:
        shots = default_shots(template)
    return template, shots


def cmd_sample(args: argparse.Namespace) -> int:
    res = _Resolver(args, "sample")
    queries_path = _require_file(res.get("queries"), "--queries")
    collection_path = _require_file(res.get("collection"), "--collection")
    qrels_path = _require_file(res.get("qrels"), "--qrels")
    out_path = Path(res.get("out") or "pairs.jsonl")
    res.resolved["out"] = str(out_path)

    plan = SamplePlan(
        n_pos=int(res.get("n_pos", 0)),
        n_neg=int(res.get("n_neg", 0)),
        seed=int(res.get("seed", 0)),
        negative_source=res.get("negative_source", "random_collection"),
    )
    candidate_run = None
    inputs = {
        str(queries_path): sha256_file(queries_path),
        str(collection_path): sha256_file(collection_path),
        str(qrels_path): sha256_file(qrels_path),
    }
    candidate_path = res.get("candidate_run")
    if plan.negative_source == "candidate_run":
        candidate_file = _require_file(candidate_path, "--candidate-run")
        with candidate_file.open("r", encoding="utf-8") as f:
            candidate_run = parse_run(f, strict=False)
        inputs[str(candidate_file)] = sha256_file(candidate_file)

    with queries_path.open("r", encoding="utf-8") as f:
        queries = parse_queries_tsv(f)
    collection = _load_collection(collection_path, res.get("collection_format", "tsv"))
    with qrels_path.open("r", encoding="utf-8") as f:
        qrels = parse_qrels(f)

    depth = res.get("candidate_depth")
    pairs = sample_pairs(
        queries,
        collection,
        qrels,
        candidate_run,
        plan,
        positive_threshold=int(res.get("positive_threshold", 1)),
        candidate_depth=int(depth) if depth is not None else None,
        include_title=bool(res.get("include_title", False)),
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as f:
        write_pairs_jsonl(pairs, f)
    _write_manifest(out_path, "sample", res.resolved, inputs, {str(out_path): sha256_file(out_path)})
    print(f"sampled {sum(p.label for p in pairs)} positives + "
          f"{sum(not p.label for p in pairs)} negatives -> {out_path}")
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    res = _Resolver(args, "augment")
    pairs_path = _require_file(res.get("pairs"), "--pairs")
    with pairs_path.open("r", encoding="utf-8") as f:
        pairs = read_pairs_jsonl(f)
    template, shots = _load_template_and_shots(res)

    if bool(res.get("dry_run", False)):
        for pair in pairs[:3]:
            print(render_prompt(template, shots, pair))
            print("=" * 40)
        return 0

    base_url = res.get("base_url")
    if not base_url:
        raise UsageError("missing required setting: --base-url")
    out_path = Path(res.get("out") or "augmented.jsonl")
    res.resolved["out"] = str(out_path)
    stats_path = Path(res.get("stats") or str(out_path) + ".stats.json")
    res.resolved["stats"] = str(stats_path)

    gen_config = GenerationConfig(
        model_id=res.get("model", "default-model"),
        temperature=float(res.get("temperature", 0.0)),
        max_output_tokens=int(res.get("max_output_tokens", 256)),
        stop_sequences=tuple(res.get("stop", ()) or ()),
    )
    cache_dir = Path(res.get("cache_dir") or "cache")
    cache = ResponseCache(cache_dir / "generations.jsonl")
    retry = RetryPolicy(
        max_retries=int(res.get("http_retries", 5)),
        backoff_base=float(res.get("backoff_base", 0.5)),
    )
    policy = AugmentPolicy(
        max_retries=int(res.get("max_retries", 2)),
        fallback_label_only=not bool(res.get("no_fallback", False)),
    )
    client = LlmClient(
        base_url=base_url,
        api_key=_resolve_api_key(res),
        cache=cache,
        retry=retry,
        timeout=float(res.get("timeout", 120.0)),
    )
    try:
        examples, stats = augment(
            pairs,
            template,
            shots,
            client,
            gen_config,
            policy=policy,
            max_in_flight=int(res.get("max_in_flight", 8)),
        )
    finally:
        client.close()
        cache.close()

    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as f:
        write_examples_jsonl(examples, f)
    payload = {"statuses": stats.as_dict(), "client": client.stats.snapshot()}
    with stats_path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    _write_manifest(
        out_path,
        "augment",
        res.resolved,
        {str(pairs_path): sha256_file(pairs_path)},
        {str(out_path): sha256_file(out_path), str(stats_path): sha256_file(stats_path)},
    )
    print(
        f"augmented {stats.ok} ok, {stats.fallback_label_only} fallback, "
        f"{stats.failed} failed ({stats.retry_total} retries) -> {out_path}"
    )
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    res = _Resolver(args, "export")
    augmented_path = _require_file(res.get("augmented"), "--augmented")
    with_expl = res.get("with_explanations")
    if with_expl is None:
        raise UsageError("choose one of --with-explanations / --labels-only")
    out_path = Path(res.get("out") or "finetune.jsonl")
    res.resolved["out"] = str(out_path)
    vocab_raw = res.get("label_vocabulary", "true,false")
    vocab = tuple(v.strip() for v in str(vocab_raw).split(","))
    if len(vocab) != 2 or not all(vocab):
        raise UsageError("--label-vocabulary must be two comma-separated tokens")

    with augmented_path.open("r", encoding="utf-8") as f:
        examples = read_examples_jsonl(f)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as f:
        counts = export_finetune(
            examples,
            with_explanations=bool(with_expl),
            stream=f,
            input_format=res.get("input_format", DEFAULT_INPUT_FORMAT),
            vocabulary=vocab,  # type: ignore[arg-type]
        )
    _write_manifest(
        out_path,
        "export",
        res.resolved,
        {str(augmented_path): sha256_file(augmented_path)},
        {str(out_path): sha256_file(out_path)},
    )
    print(f"exported {counts['exported']} records ({counts['skipped']} skipped) -> {out_path}")
    return 0


def cmd_rerank(args: argparse.Namespace) -> int:
    res = _Resolver(args, "rerank")
    candidates_path = _require_file(res.get("candidates"), "--candidates")
    queries_path = _require_file(res.get("queries"), "--queries")
    collection_path = _require_file(res.get("collection"), "--collection")
    base_url = res.get("base_url")
    if not base_url:
        raise UsageError("missing required setting: --base-url")
    out_path = Path(res.get("out") or "reranked.run")
    res.resolved["out"] = str(out_path)

    with candidates_path.open("r", encoding="utf-8") as f:
        candidate_entries = parse_run(f, strict=False)
    depth = res.get("depth", 100)
    candidate_sets = candidate_sets_from_run(
        candidate_entries, depth=int(depth) if depth is not None else None
    )
    with queries_path.open("r", encoding="utf-8") as f:
        queries = {q.qid: q for q in parse_queries_tsv(f)}

    needed = {d for cs in candidate_sets for d in cs.docids()}
    fmt = res.get("collection_format", "tsv")
    passages: dict[str, Passage] = {}
    with collection_path.open("r", encoding="utf-8") as f:
        parser = parse_beir_corpus(f) if fmt == "beir" else parse_collection_tsv(f)
        for p in parser:
            if p.docid in needed:
                passages[p.docid] = p

    endpoint = ScorerEndpoint(
        base_url=base_url,
        timeout=float(res.get("timeout", 60.0)),
        max_in_flight=int(res.get("max_in_flight", 4)),
    )
    entries = rerank_candidates(
        endpoint,
        candidate_sets,
        queries,
        passages,
        tag=res.get("tag", "explainrank"),
        include_title=bool(res.get("include_title", False)),
        retry=RetryPolicy(
            max_retries=int(res.get("http_retries", 5)),
            backoff_base=float(res.get("backoff_base", 0.5)),
        ),
        on_error=res.get("on_error", "abort"),
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as f:
        write_run(entries, f)
    _write_manifest(
        out_path,
        "rerank",
        res.resolved,
        {
            str(candidates_path): sha256_file(candidates_path),
            str(queries_path): sha256_file(queries_path),
            str(collection_path): sha256_file(collection_path),
        },
        {str(out_path): sha256_file(out_path)},
    )
    print(f"reranked {len(candidate_sets)} queries -> {out_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    res = _Resolver(args, "eval")
    run_path = _require_file(res.get("run"), "--run")
    qrels_path = _require_file(res.get("qrels"), "--qrels")
    k = int(res.get("k", 10))
    dataset_id = res.get("dataset_id", "")

    with run_path.open("r", encoding="utf-8") as f:
        run = parse_run(f, strict=False)
    with qrels_path.open("r", encoding="utf-8") as f:
        qrels = parse_qrels(f)
    report = ndcg_at_k(run, qrels, k=k, dataset_id=dataset_id)

    out = res.get("out")
    outputs = {}
    if out:
        out_path = Path(out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with out_path.open("w", encoding="utf-8") as f:
            json.dump(report.as_dict(), f, indent=2)
            f.write("\n")
        outputs[str(out_path)] = sha256_file(out_path)
        _write_manifest(
            out_path,
            "eval",
            res.resolved,
            {str(run_path): sha256_file(run_path), str(qrels_path): sha256_file(qrels_path)},
            outputs,
        )
    label = f" [{dataset_id}]" if dataset_id else ""
    print(f"nDCG@{k}{label}: {round_display(report.mean):.3f} over {report.n_queries} queries")
    return 0


def _rows_from_spec(path: Path, config: EvalConfig) -> list[ComparisonRow]:
    with path.open("r", encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise UsageError("--rows: expected a JSON array of row objects")
    rows = []
    for i, item in enumerate(raw):
        try:
            means = {str(k): float(v) for k, v in item.get("dataset_means", {}).items()}
            avg = item.get("avg_zs")
            row = ComparisonRow(
                model_name=item["model"],
                ft_pos=int(item["ft_pos"]),
                dataset_means=means,
                avg_zs=float(avg) if avg is not None else avg_zero_shot(means, config),
                llm=item.get("llm"),
                validation_mean=means.get(config.validation_dataset_id),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"--rows: row #{i} invalid: {exc}") from None
        rows.append(row)
    return rows


def cmd_report(args: argparse.Namespace) -> int:
    res = _Resolver(args, "report")
    rows_path = _require_file(res.get("rows"), "--rows")
    config = EvalConfig(
        k=int(res.get("k", 10)),
        validation_dataset_id=res.get("validation_dataset", "dl20"),
        zero_shot_dataset_ids=tuple(
            res.get("zero_shot_datasets", ",".join(EvalConfig().zero_shot_dataset_ids)).split(",")
        ),
    )
    rows = _rows_from_spec(rows_path, config)
    table = format_comparison_table(rows, config)
    print(table)

    compare = res.get("compare")
    if compare:
        name_a, name_b = compare
        rows_a = [r for r in rows if r.model_name == name_a]
        rows_b = [r for r in rows if r.model_name == name_b]
        if not rows_a or not rows_b:
            raise UsageError(f"--compare: no rows named {name_a!r} and/or {name_b!r}")
        imp = improvement_report(rows_a, rows_b)
        print()
        print(f"avg_zs deltas ({name_a} - {name_b}), in nDCG points:")
        for size, pts in imp.as_points():
            print(f"  ft_pos {size:>7}: {pts:+.1f}")
        print(f"  mean: {round_display(imp.mean_delta * 100, 1):+.1f}")

    outputs = {}
    out_table = res.get("out_table")
    if out_table:
        Path(out_table).write_text(table + "\n", encoding="utf-8")
        outputs[out_table] = sha256_file(out_table)
    out_csv = res.get("out_csv")
    if out_csv:
        with Path(out_csv).open("w", encoding="utf-8", newline="") as f:
            write_report_csv(rows, f, config)
        outputs[out_csv] = sha256_file(out_csv)
    out_json = res.get("out_json")
    if out_json:
        Path(out_json).write_text(rows_to_json(rows) + "\n", encoding="utf-8")
        outputs[out_json] = sha256_file(out_json)
    if outputs:
        _write_manifest(
            Path(next(iter(outputs))),
            "report",
            res.resolved,
            {str(rows_path): sha256_file(rows_path)},
            outputs,
        )
    return 0


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--cache-dir", dest="cache_dir", help="directory for the response cache")
    p.add_argument("--base-url", dest="base_url", help="HTTP endpoint base URL")
    p.add_argument("--api-key-env", dest="api_key_env",
                   help="name of the env var holding the API key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="explainrank",
        description="Explanation-augmented reranking pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a balanced labeled pair set")
    _add_common_flags(p)
    p.add_argument("--queries", help="queries TSV (qid<TAB>text)")
    p.add_argument("--collection", help="collection file")
    p.add_argument("--collection-format", dest="collection_format", choices=("tsv", "beir"))
    p.add_argument("--qrels", help="TREC qrels file")
    p.add_argument("--candidate-run", dest="candidate_run", help="TREC run for negatives")
    p.add_argument("--n-pos", dest="n_pos", type=int, help="number of relevant pairs")
    p.add_argument("--n-neg", dest="n_neg", type=int, help="number of non-relevant pairs")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--negative-source", dest="negative_source",
                   choices=("candidate_run", "random_collection"))
    p.add_argument("--positive-threshold", dest="positive_threshold", type=int,
                   help="min grade counted as relevant (default 1)")
    p.add_argument("--candidate-depth", dest="candidate_depth", type=int,
                   help="use only the top-k of each candidate list")
    p.add_argument("--include-title", dest="include_title", action="store_const", const=True,
                   help="prepend BEIR titles to passage text")
    p.add_argument("--out", help="output pairs JSONL")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("augment", help="generate explanations for sampled pairs")
    _add_common_flags(p)
    p.add_argument("--pairs", help="sampled pairs JSONL")
    p.add_argument("--template", help="prompt template JSON (default: bundled)")
    p.add_argument("--shots", help="few-shot examples JSON (default: bundled)")
    p.add_argument("--model", help="model id sent to the endpoint")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-output-tokens", dest="max_output_tokens", type=int)
    p.add_argument("--stop", action="append", help="stop sequence (repeatable)")
    p.add_argument("--max-retries", dest="max_retries", type=int,
                   help="label-contradiction retry budget (default 2)")
    p.add_argument("--no-fallback", dest="no_fallback", action="store_const", const=True,
                   help="mark exhausted items failed instead of label-only")
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    p.add_argument("--http-retries", dest="http_retries", type=int)
    p.add_argument("--backoff-base", dest="backoff_base", type=float)
    p.add_argument("--timeout", type=float)
    p.add_argument("--dry-run", dest="dry_run", action="store_const", const=True,
                   help="print the first 3 rendered prompts and exit")
    p.add_argument("--out", help="output augmented JSONL")
    p.add_argument("--stats", help="output stats JSON")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("export", help="write a fine-tuning dataset")
    _add_common_flags(p)
    p.add_argument("--augmented", help="augmented JSONL from `augment`")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--with-explanations", dest="with_explanations",
                       action="store_const", const=True)
    group.add_argument("--labels-only", dest="with_explanations",
                       action="store_const", const=False)
    p.add_argument("--input-format", dest="input_format",
                   help="source template with {query} and {passage}")
    p.add_argument("--label-vocabulary", dest="label_vocabulary",
                   help='comma-separated label tokens (default "true,false")')
    p.add_argument("--out", help="output finetune JSONL")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("rerank", help="rerank candidates via a scorer endpoint")
    _add_common_flags(p)
    p.add_argument("--candidates", help="first-stage TREC run file")
    p.add_argument("--queries", help="queries TSV")
    p.add_argument("--collection", help="collection file")
    p.add_argument("--collection-format", dest="collection_format", choices=("tsv", "beir"))
    p.add_argument("--include-title", dest="include_title", action="store_const", const=True)
    p.add_argument("--depth", type=int, help="candidates per query to rerank (default 100)")
    p.add_argument("--tag", help="run tag written to the output")
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    p.add_argument("--http-retries", dest="http_retries", type=int)
    p.add_argument("--backoff-base", dest="backoff_base", type=float)
    p.add_argument("--on-error", dest="on_error", choices=("abort", "zero"),
                   help="per-query failure policy after retries")
    p.add_argument("--out", help="output TREC run file")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("eval", help="score a run against qrels (nDCG@k)")
    _add_common_flags(p)
    p.add_argument("--run", help="TREC run file")
    p.add_argument("--qrels", help="TREC qrels file")
    p.add_argument("-k", type=int, help="cutoff (default 10)")
    p.add_argument("--dataset-id", dest="dataset_id", help="label recorded in the report")
    p.add_argument("--out", help="output report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="comparison tables from eval reports")
    _add_common_flags(p)
    p.add_argument("--rows", help="JSON array of row objects")
    p.add_argument("-k", type=int)
    p.add_argument("--validation-dataset", dest="validation_dataset")
    p.add_argument("--zero-shot-datasets", dest="zero_shot_datasets",
                   help="comma-separated dataset ids")
    p.add_argument("--compare", nargs=2, metavar=("TREATMENT", "BASELINE"),
                   help="two model names to diff on avg_zs, matched by ft_pos")
    p.add_argument("--out-table", dest="out_table")
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExplainrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
