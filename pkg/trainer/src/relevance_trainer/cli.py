"""Command line: train a relevance model, serve a checkpoint, or run the
validation loop over saved checkpoints."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import TrainConfig
from .eval_loop import evaluate_checkpoints
from .train import CheckpointRecord, train


def cmd_train(args: argparse.Namespace) -> int:
    config = TrainConfig(
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        max_input_tokens=args.max_input_tokens,
        max_output_tokens=args.max_output_tokens,
        base_model_id=args.base_model,
        seed=args.seed,
    )
    checkpoints = train(args.dataset, config, args.output_dir)
    print(f"trained {len(checkpoints)} epoch(s); checkpoints under {args.output_dir}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .serve import serve

    serve(args.checkpoint, host=args.host, port=args.port)
    return 0


def cmd_eval_loop(args: argparse.Namespace) -> int:
    ckpt_dir = Path(args.checkpoint_dir)
    paths = sorted(ckpt_dir.glob("epoch_*.pt"))
    if not paths:
        print(f"error: no epoch_*.pt checkpoints under {ckpt_dir}", file=sys.stderr)
        return 2
    checkpoints = [
        CheckpointRecord(epoch=int(p.stem.split("_")[1]), path=str(p)) for p in paths
    ]
    result = evaluate_checkpoints(
        checkpoints,
        candidates_path=args.candidates,
        queries_path=args.queries,
        collection_path=args.collection,
        qrels_path=args.qrels,
        work_dir=args.work_dir,
        primary_cli=args.primary_cli.split(),
        k=args.k,
        dataset_id=args.dataset_id,
    )
    for c in result.checkpoints:
        print(f"epoch {c.epoch}: validation nDCG@{args.k} = {c.validation_ndcg:.4f}")
    print(f"best epoch: {result.best_epoch}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relevance-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune on a finetune JSONL")
    p.add_argument("--dataset", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--learning-rate", type=float, default=3e-5)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-epochs", type=int, default=30)
    p.add_argument("--max-input-tokens", type=int, default=512)
    p.add_argument("--max-output-tokens", type=int, default=512)
    p.add_argument("--base-model", default="small-transformer")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve /score for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8040)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval-loop", help="validate every checkpoint via the primary CLI")
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--collection", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--work-dir", required=True)
    p.add_argument("--primary-cli", default="explainrank")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--dataset-id", default="dl20")
    p.set_defaults(func=cmd_eval_loop)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
