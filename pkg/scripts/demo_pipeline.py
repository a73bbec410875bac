#!/usr/bin/env python3
"""Run the whole primary pipeline offline against local mock endpoints.

Stages: toy data -> sample -> augment (mock LLM) -> export both dataset
variants -> rerank (oracle mock scorer) -> eval. Everything lands in
--work-dir with per-stage manifests.
"""

import argparse
import json
import re
import subprocess
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

SCRIPTS_DIR = Path(__file__).parent


class OracleScorer(BaseHTTPRequestHandler):
    """Scorer mock: p_relevant 0.9 when the ground-truth marker matches."""

    def log_message(self, fmt, *args):
        pass

    def do_GET(self):
        self.send_response(200 if self.path == "/healthz" else 404)
        self.end_headers()

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        query = body.get("query", "")
        probs = [
            0.9 if f"[ANSWERS: {query}]" in passage else 0.2
            for passage in body.get("passages", [])
        ]
        data = json.dumps({"p_relevant": probs}).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def run(cmd: list[str]) -> None:
    print("+ " + " ".join(cmd))
    subprocess.run(cmd, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work-dir", default="demo_run")
    parser.add_argument("--llm-port", type=int, default=8030)
    parser.add_argument("--scorer-port", type=int, default=8031)
    args = parser.parse_args()

    work = Path(args.work_dir)
    work.mkdir(parents=True, exist_ok=True)
    data = work / "data"

    run([sys.executable, str(SCRIPTS_DIR / "make_toy_data.py"), "--out-dir", str(data)])

    llm = subprocess.Popen(
        [sys.executable, str(SCRIPTS_DIR / "mock_llm_server.py"), "--port", str(args.llm_port)]
    )
    scorer_httpd = ThreadingHTTPServer(("127.0.0.1", args.scorer_port), OracleScorer)
    scorer_thread = threading.Thread(target=scorer_httpd.serve_forever, daemon=True)
    scorer_thread.start()
    try:
        pairs = work / "pairs.jsonl"
        run([
            "explainrank", "sample",
            "--queries", str(data / "queries.tsv"),
            "--collection", str(data / "collection.tsv"),
            "--qrels", str(data / "qrels.txt"),
            "--n-pos", "8", "--n-neg", "8", "--seed", "42",
            "--out", str(pairs),
        ])

        augmented = work / "augmented.jsonl"
        run([
            "explainrank", "augment",
            "--pairs", str(pairs),
            "--base-url", f"http://127.0.0.1:{args.llm_port}",
            "--model", "mock-model",
            "--cache-dir", str(work / "cache"),
            "--out", str(augmented),
        ])

        run([
            "explainrank", "export", "--augmented", str(augmented),
            "--with-explanations", "--out", str(work / "finetune_expl.jsonl"),
        ])
        run([
            "explainrank", "export", "--augmented", str(augmented),
            "--labels-only", "--out", str(work / "finetune_labels.jsonl"),
        ])

        reranked = work / "reranked.run"
        run([
            "explainrank", "rerank",
            "--candidates", str(data / "candidates.run"),
            "--queries", str(data / "queries.tsv"),
            "--collection", str(data / "collection.tsv"),
            "--base-url", f"http://127.0.0.1:{args.scorer_port}",
            "--tag", "demo",
            "--out", str(reranked),
        ])

        run([
            "explainrank", "eval",
            "--run", str(reranked),
            "--qrels", str(data / "qrels.txt"),
            "-k", "10",
            "--dataset-id", "toy",
            "--out", str(work / "report.json"),
        ])
        print(f"\nall stages complete; artifacts under {work}/")
    finally:
        llm.terminate()
        scorer_httpd.shutdown()


if __name__ == "__main__":
    main()
