#!/usr/bin/env python3
"""End-to-end desk-scale pipeline.

Generates a toy judged corpus, then drives the full loop:
sample 20 pairs -> augment via an inline mock LLM -> export both dataset
variants -> train 2 epochs -> serve each checkpoint -> rerank a 5-query
candidate set -> eval -> select the best checkpoint.

Writes pipeline_manifest.json recording a SHA-256 digest per stage
output. Exits 0 only if every stage succeeded.

Usage: python scripts/run_desk_pipeline.py --work-dir desk_run
"""

import argparse
import hashlib
import json
import random
import re
import subprocess
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

TRAINER_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(TRAINER_ROOT / "src"))

from relevance_trainer.config import TrainConfig  # noqa: E402
from relevance_trainer.eval_loop import evaluate_checkpoints  # noqa: E402
from relevance_trainer.train import train  # noqa: E402

TOPICS = [
    ("how tall is mount everest", "Mount Everest rises 8849 metres above sea level."),
    ("who wrote pride and prejudice", "Pride and Prejudice was written by Jane Austen."),
    ("boiling point of water at sea level", "Water boils at 100 degrees Celsius at sea level."),
    ("largest planet in the solar system", "Jupiter is the largest planet in the solar system."),
    ("capital of australia", "Canberra is the capital city of Australia."),
    ("speed of light in vacuum", "Light travels at 299792458 metres per second in vacuum."),
    ("inventor of the telephone", "Alexander Graham Bell patented the telephone in 1876."),
    ("chemical symbol for gold", "Gold is a chemical element with the symbol Au."),
    ("longest river in the world", "The Nile is commonly cited as the longest river on Earth."),
    ("author of the origin of species", "On the Origin of Species was written by Charles Darwin."),
]

DISTRACTORS = [
    "K2 is the second highest mountain and is notorious for storms.",
    "The Great Barrier Reef is the world's largest coral reef system.",
    "Photosynthesis converts carbon dioxide and water into glucose.",
    "Penguins are flightless birds found mostly in the Southern Hemisphere.",
]

QP_BLOCK = re.compile(r"Question: (.*)\nPassage: (.*)\n", re.MULTILINE)


class MarkerChatHandler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        prompt = next(
            (m["content"] for m in body.get("messages", []) if m.get("role") == "user"), ""
        )
        blocks = QP_BLOCK.findall(prompt)
        query, passage = blocks[-1] if blocks else ("", "")
        if f"[ANSWERS: {query}]" in passage:
            text = "true. Explanation: the passage directly answers the question."
        else:
            text = "false. Explanation: the passage does not address the question."
        data = json.dumps(
            {"choices": [{"message": {"content": text}, "finish_reason": "stop"}]}
        ).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def make_toy_data(data_dir: Path, n_candidate_queries: int = 5) -> None:
    rnd = random.Random(17)
    data_dir.mkdir(parents=True, exist_ok=True)
    queries, collection, qrels, run = [], [], [], []
    doc_no = 0
    for qi, (query, answer_text) in enumerate(TOPICS):
        qid = f"q{qi + 1}"
        queries.append(f"{qid}\t{query}")
        docids = []
        doc_no += 1
        rel_id = f"d{doc_no:04d}"
        collection.append(f"{rel_id}\t{answer_text} [ANSWERS: {query}]")
        qrels.append(f"{qid} 0 {rel_id} 1")
        docids.append(rel_id)
        for _ in range(3):
            doc_no += 1
            docid = f"d{doc_no:04d}"
            collection.append(f"{docid}\t{rnd.choice(DISTRACTORS)}")
            qrels.append(f"{qid} 0 {docid} 0")
            docids.append(docid)
        if qi < n_candidate_queries:
            rnd.shuffle(docids)
            for rank, docid in enumerate(docids, start=1):
                run.append(f"{qid} Q0 {docid} {rank} {1.0 - rank / 100:.6f} firststage")
    (data_dir / "queries.tsv").write_text("\n".join(queries) + "\n", encoding="utf-8")
    (data_dir / "collection.tsv").write_text("\n".join(collection) + "\n", encoding="utf-8")
    (data_dir / "qrels.txt").write_text("\n".join(qrels) + "\n", encoding="utf-8")
    (data_dir / "candidates.run").write_text("\n".join(run) + "\n", encoding="utf-8")


def run_primary(args: list[str], primary_cli: list[str]) -> None:
    cmd = primary_cli + args
    print("+ " + " ".join(cmd))
    subprocess.run(cmd, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work-dir", default="desk_run")
    parser.add_argument("--primary-cli", default="explainrank")
    parser.add_argument("--epochs", type=int, default=2)
    args = parser.parse_args()

    work = Path(args.work_dir)
    work.mkdir(parents=True, exist_ok=True)
    data = work / "data"
    primary = args.primary_cli.split()
    manifest: dict[str, dict[str, str]] = {}

    def record(stage: str, *paths: Path) -> None:
        manifest[stage] = {str(p): sha256_file(p) for p in paths}

    make_toy_data(data)
    record("toy_data", data / "queries.tsv", data / "collection.tsv",
           data / "qrels.txt", data / "candidates.run")

    httpd = ThreadingHTTPServer(("127.0.0.1", 0), MarkerChatHandler)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    llm_url = f"http://127.0.0.1:{httpd.server_address[1]}"
    try:
        pairs = work / "pairs.jsonl"
        run_primary(
            [
                "sample",
                "--queries", str(data / "queries.tsv"),
                "--collection", str(data / "collection.tsv"),
                "--qrels", str(data / "qrels.txt"),
                "--n-pos", "10", "--n-neg", "10", "--seed", "42",
                "--out", str(pairs),
            ],
            primary,
        )
        record("sample", pairs)

        augmented = work / "augmented.jsonl"
        run_primary(
            [
                "augment",
                "--pairs", str(pairs),
                "--base-url", llm_url,
                "--model", "mock-model",
                "--cache-dir", str(work / "cache"),
                "--out", str(augmented),
            ],
            primary,
        )
        record("augment", augmented)

        ft_expl = work / "finetune_expl.jsonl"
        ft_labels = work / "finetune_labels.jsonl"
        run_primary(
            ["export", "--augmented", str(augmented), "--with-explanations",
             "--out", str(ft_expl)],
            primary,
        )
        run_primary(
            ["export", "--augmented", str(augmented), "--labels-only",
             "--out", str(ft_labels)],
            primary,
        )
        record("export", ft_expl, ft_labels)
    finally:
        httpd.shutdown()

    config = TrainConfig(
        learning_rate=3e-3,
        batch_size=4,
        max_epochs=args.epochs,
        base_model_id="tiny-transformer",
        seed=7,
    )
    ckpt_dir = work / "checkpoints"
    checkpoints = train(ft_expl, config, ckpt_dir)
    record("train", ckpt_dir / "training_manifest.json",
           *[Path(c.path) for c in checkpoints])

    result = evaluate_checkpoints(
        checkpoints,
        candidates_path=data / "candidates.run",
        queries_path=data / "queries.tsv",
        collection_path=data / "collection.tsv",
        qrels_path=data / "qrels.txt",
        work_dir=work / "validation",
        primary_cli=primary,
    )
    record(
        "validate",
        work / "validation" / "validation_manifest.json",
        *[work / "validation" / f"epoch_{c.epoch:03d}.run" for c in result.checkpoints],
        *[work / "validation" / f"epoch_{c.epoch:03d}.report.json" for c in result.checkpoints],
    )

    manifest["selected_epoch"] = {"best_epoch": str(result.best_epoch)}
    with (work / "pipeline_manifest.json").open("w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    for c in result.checkpoints:
        print(f"epoch {c.epoch}: validation nDCG@10 = {c.validation_ndcg:.4f}")
    print(f"best epoch: {result.best_epoch}")
    print(f"pipeline complete; manifest at {work / 'pipeline_manifest.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
