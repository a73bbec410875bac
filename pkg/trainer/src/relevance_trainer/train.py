"""Training loop: per-epoch checkpoints, token-level cross-entropy over
the full target (label + explanation tokens, uniformly weighted),
constant learning rate, AdamW."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from .config import TrainConfig
from .data import Record, balanced_batches, load_records
from .model import build_model
from .vocab import BOS, PAD, Vocab


@dataclass
class CheckpointRecord:
    epoch: int
    path: str
    validation_ndcg: Optional[float] = None


def _sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _pad_to(rows: list[list[int]], width: int) -> torch.Tensor:
    return torch.tensor(
        [row + [PAD] * (width - len(row)) for row in rows], dtype=torch.long
    )


def encode_batch(
    batch: list[Record], vocab: Vocab, config: TrainConfig
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(src, tgt_in, tgt_out): teacher forcing with BOS-shifted inputs."""
    src_rows = [vocab.encode(r.source, config.max_input_tokens) for r in batch]
    tgt_rows = [vocab.encode(r.target, config.max_output_tokens) for r in batch]
    src = _pad_to(src_rows, max(len(r) for r in src_rows))
    tgt_width = max(len(r) for r in tgt_rows)
    tgt_in = _pad_to([[BOS] + row[:-1] for row in tgt_rows], tgt_width)
    tgt_out = _pad_to(tgt_rows, tgt_width)
    return src, tgt_in, tgt_out


def train(
    dataset_path: str | Path,
    config: TrainConfig,
    output_dir: str | Path,
) -> list[CheckpointRecord]:
    """Fine-tune on a FinetuneRecord JSONL; one checkpoint per epoch."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    records = load_records(dataset_path, config.label_vocabulary)
    if not records:
        raise ValueError(f"dataset {dataset_path} is empty")

    torch.manual_seed(config.seed)
    vocab = Vocab.build([r.source for r in records] + [r.target for r in records])
    model = build_model(len(vocab), config.preset())
    model.train()
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    loss_fn = nn.CrossEntropyLoss(ignore_index=PAD)

    checkpoints: list[CheckpointRecord] = []
    epoch_losses: list[float] = []
    for epoch in range(1, config.max_epochs + 1):
        total, steps = 0.0, 0
        for batch in balanced_batches(records, config.batch_size, config.seed, epoch):
            src, tgt_in, tgt_out = encode_batch(batch, vocab, config)
            logits = model(src, tgt_in)
            loss = loss_fn(logits.reshape(-1, logits.size(-1)), tgt_out.reshape(-1))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item()
            steps += 1
        mean_loss = total / steps
        epoch_losses.append(mean_loss)
        ckpt_path = output_dir / f"epoch_{epoch:03d}.pt"
        torch.save(
            {
                "model_state": model.state_dict(),
                "vocab": vocab.to_list(),
                "config": config.as_dict(),
                "epoch": epoch,
            },
            ckpt_path,
        )
        checkpoints.append(CheckpointRecord(epoch=epoch, path=str(ckpt_path)))

    manifest = {
        "created_unix": time.time(),
        "dataset": str(dataset_path),
        "dataset_sha256": _sha256_file(dataset_path),
        "n_records": len(records),
        "config": config.as_dict(),
        "lr_schedule": "constant",
        "epoch_losses": epoch_losses,
        "checkpoints": [c.path for c in checkpoints],
    }
    with (output_dir / "training_manifest.json").open("w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return checkpoints
