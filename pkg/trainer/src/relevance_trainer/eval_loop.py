"""Per-checkpoint validation: serve each checkpoint, drive the primary
CLI's `rerank` and `eval` commands against it, and pick the epoch with
the best validation nDCG@k (ties go to the earliest epoch).

The primary pipeline is consumed strictly through its command-line
interface and file formats.
"""

from __future__ import annotations

import json
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .serve import BackgroundServer
from .train import CheckpointRecord


@dataclass
class EvalLoopResult:
    checkpoints: list[CheckpointRecord]
    best_epoch: int


def _run_cli(args: list[str]) -> None:
    proc = subprocess.run(args, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(
            f"command failed ({proc.returncode}): {' '.join(args)}\n{proc.stderr}"
        )


def evaluate_checkpoints(
    checkpoints: Sequence[CheckpointRecord],
    *,
    candidates_path: str | Path,
    queries_path: str | Path,
    collection_path: str | Path,
    qrels_path: str | Path,
    work_dir: str | Path,
    primary_cli: Sequence[str] = ("explainrank",),
    k: int = 10,
    dataset_id: str = "dl20",
    health_retries: int = 3,
) -> EvalLoopResult:
    """Fill validation_ndcg for every checkpoint and select the best epoch."""
    if not checkpoints:
        raise ValueError("no checkpoints to evaluate")
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    filled: list[CheckpointRecord] = []
    for ckpt in checkpoints:
        server = None
        for attempt in range(health_retries):
            try:
                server = BackgroundServer(ckpt.path).start()
                break
            except RuntimeError:
                if attempt == health_retries - 1:
                    raise
                time.sleep(0.5)
        run_path = work_dir / f"epoch_{ckpt.epoch:03d}.run"
        report_path = work_dir / f"epoch_{ckpt.epoch:03d}.report.json"
        try:
            _run_cli(
                list(primary_cli)
                + [
                    "rerank",
                    "--candidates", str(candidates_path),
                    "--queries", str(queries_path),
                    "--collection", str(collection_path),
                    "--base-url", server.base_url,
                    "--tag", f"epoch{ckpt.epoch}",
                    "--out", str(run_path),
                ]
            )
            _run_cli(
                list(primary_cli)
                + [
                    "eval",
                    "--run", str(run_path),
                    "--qrels", str(qrels_path),
                    "-k", str(k),
                    "--dataset-id", dataset_id,
                    "--out", str(report_path),
                ]
            )
        finally:
            server.stop()
        mean = json.loads(report_path.read_text(encoding="utf-8"))["mean"]
        filled.append(
            CheckpointRecord(epoch=ckpt.epoch, path=ckpt.path, validation_ndcg=mean)
        )

    best_epoch, best_score = None, float("-inf")
    for record in sorted(filled, key=lambda c: c.epoch):
        if record.validation_ndcg > best_score:
            best_epoch, best_score = record.epoch, record.validation_ndcg
    result = EvalLoopResult(checkpoints=filled, best_epoch=best_epoch)
    with (work_dir / "validation_manifest.json").open("w", encoding="utf-8") as f:
        json.dump(
            {
                "k": k,
                "dataset_id": dataset_id,
                "per_epoch": [
                    {"epoch": c.epoch, "path": c.path, "validation_ndcg": c.validation_ndcg}
                    for c in filled
                ],
                "best_epoch": best_epoch,
            },
            f,
            indent=2,
        )
        f.write("\n")
    return result
