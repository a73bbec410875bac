#!/usr/bin/env python3
"""Standalone offline stand-in for a chat-completions endpoint.

Serves /v1/chat/completions and answers relevance prompts with a
deterministic heuristic: "true" when the final passage block shares
enough words with the final question block, else "false", each with a
templated explanation. Good enough to exercise the pipeline end to end
without any real LLM.

Usage: python scripts/mock_llm_server.py [--port 8030]
"""

import argparse
import json
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

QP_BLOCK = re.compile(r"Question: (.*)\nPassage: (.*)\n", re.MULTILINE)
STOPWORDS = {"the", "a", "an", "of", "is", "to", "in", "and", "what", "who", "how"}


def answer(prompt: str) -> str:
    blocks = QP_BLOCK.findall(prompt)
    if not blocks:
        return "false. Explanation: the request contained no question/passage block."
    query, passage = blocks[-1]
    if f"[ANSWERS: {query}]" in passage:  # toy-corpus ground-truth marker
        return "true. Explanation: the passage directly answers the question."
    q_words = {w for w in re.findall(r"\w+", query.lower()) if w not in STOPWORDS}
    p_words = {w for w in re.findall(r"\w+", passage.lower()) if w not in STOPWORDS}
    overlap = len(q_words & p_words)
    if q_words and overlap / len(q_words) >= 0.5:
        shared = ", ".join(sorted(q_words & p_words)[:4])
        return f"true. Explanation: the passage covers {shared}, answering the question."
    return "false. Explanation: the passage does not address the question's topic."


class Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass

    def do_POST(self):
        if self.path != "/v1/chat/completions":
            self.send_response(404)
            self.end_headers()
            return
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        prompt = ""
        for message in body.get("messages", []):
            if message.get("role") == "user":
                prompt = message.get("content", "")
        payload = {
            "choices": [
                {
                    "message": {"role": "assistant", "content": answer(prompt)},
                    "finish_reason": "stop",
                }
            ]
        }
        data = json.dumps(payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=8030)
    args = parser.parse_args()
    server = ThreadingHTTPServer(("127.0.0.1", args.port), Handler)
    print(f"mock chat-completions endpoint on http://127.0.0.1:{args.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
