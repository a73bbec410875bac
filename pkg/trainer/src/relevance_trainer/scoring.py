"""Checkpoint loading and relevance scoring.

p_relevant is the softmax over exactly the two label tokens' logits at
the first decoding position (probabilities for the pair sum to 1).
Inference runs in eval mode with no sampling, so repeated calls on the
same input return identical values.
"""

from __future__ import annotations

from pathlib import Path

import torch

from .config import TrainConfig
from .model import build_model
from .vocab import BOS, UNK, Vocab


class Scorer:
    def __init__(self, checkpoint_path: str | Path):
        payload = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
        self.config = TrainConfig.from_dict(payload["config"])
        self.vocab = Vocab.from_list(payload["vocab"])
        self.epoch = payload.get("epoch")
        self.model = build_model(len(self.vocab), self.config.preset())
        self.model.load_state_dict(payload["model_state"])
        self.model.eval()
        rel_word, nonrel_word = self.config.label_vocabulary
        self.rel_id = self.vocab.token_id(rel_word)
        self.nonrel_id = self.vocab.token_id(nonrel_word)
        if UNK in (self.rel_id, self.nonrel_id):
            raise ValueError(
                f"label tokens {self.config.label_vocabulary} missing from the "
                "checkpoint vocabulary"
            )

    def render_source(self, query: str, passage: str) -> str:
        return self.config.input_format.format(query=query, passage=passage)

    @torch.no_grad()
    def score(self, query: str, passages: list[str]) -> list[float]:
        """Probability of the relevant-label token per passage, input order.

        Overlength inputs are tail-truncated to the token budget, never
        rejected.
        """
        if not passages:
            return []
        probs: list[float] = []
        for passage in passages:
            source = self.render_source(query, passage)
            ids = self.vocab.encode(source, self.config.max_input_tokens)
            src = torch.tensor([ids], dtype=torch.long)
            logits = self.model.first_step_logits(src, BOS)[0]
            pair = torch.stack([logits[self.rel_id], logits[self.nonrel_id]])
            p_rel = torch.softmax(pair, dim=0)[0].item()
            probs.append(float(p_rel))
        return probs
