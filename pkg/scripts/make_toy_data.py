#!/usr/bin/env python3
"""Synthesize a small self-consistent corpus for desk-scale runs.

Writes queries.tsv, collection.tsv, qrels.txt and candidates.run into
--out-dir. Each query gets one relevant passage carrying an
"[ANSWERS: <query>]" marker (which scripts/mock_llm_server.py treats as
ground truth) plus distractor passages; the candidate run lists every
query's passages in arbitrary first-stage order.
"""

import argparse
import random
from pathlib import Path

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
    "The Roman Empire reached its greatest extent under Trajan.",
    "Penguins are flightless birds found mostly in the Southern Hemisphere.",
    "The stock market saw mixed results in quarterly trading.",
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="toy_data")
    parser.add_argument("--queries", type=int, default=10, help="number of queries (<= 10)")
    parser.add_argument("--distractors-per-query", type=int, default=3)
    parser.add_argument("--seed", type=int, default=13)
    args = parser.parse_args()

    rnd = random.Random(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    topics = TOPICS[: args.queries]
    queries_lines, collection_lines, qrels_lines, run_lines = [], [], [], []
    doc_no = 0
    for qi, (query, answer_text) in enumerate(topics):
        qid = f"q{qi + 1}"
        queries_lines.append(f"{qid}\t{query}")
        docids = []

        doc_no += 1
        relevant_id = f"d{doc_no:04d}"
        collection_lines.append(f"{relevant_id}\t{answer_text} [ANSWERS: {query}]")
        qrels_lines.append(f"{qid} 0 {relevant_id} 1")
        docids.append(relevant_id)

        for _ in range(args.distractors_per_query):
            doc_no += 1
            docid = f"d{doc_no:04d}"
            collection_lines.append(f"{docid}\t{rnd.choice(DISTRACTORS)}")
            qrels_lines.append(f"{qid} 0 {docid} 0")
            docids.append(docid)

        rnd.shuffle(docids)
        for rank, docid in enumerate(docids, start=1):
            run_lines.append(f"{qid} Q0 {docid} {rank} {1.0 - rank / 100:.6f} firststage")

    (out / "queries.tsv").write_text("\n".join(queries_lines) + "\n", encoding="utf-8")
    (out / "collection.tsv").write_text("\n".join(collection_lines) + "\n", encoding="utf-8")
    (out / "qrels.txt").write_text("\n".join(qrels_lines) + "\n", encoding="utf-8")
    (out / "candidates.run").write_text("\n".join(run_lines) + "\n", encoding="utf-8")
    print(f"wrote {len(topics)} queries / {doc_no} passages under {out}/")


if __name__ == "__main__":
    main()
