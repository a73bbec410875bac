"""Word-level tokenizer and vocabulary.

Deterministic and dependency-free: lowercase, split into word/punctuation
tokens, map through a sorted vocabulary built from the training data.
Label words ("true"/"false") are ordinary single tokens, which is what
lets the scorer read relevance off one decoder step.
"""

from __future__ import annotations

import re

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class Vocab:
    def __init__(self, tokens: list[str]):
        # tokens: the non-special vocabulary, order-preserving
        self.itos = list(SPECIALS) + tokens
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def build(cls, texts: list[str]) -> "Vocab":
        seen = set()
        for text in texts:
            seen.update(tokenize(text))
        return cls(sorted(seen))

    def __len__(self) -> int:
        return len(self.itos)

    def token_id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def encode(self, text: str, max_len: int, add_eos: bool = True) -> list[int]:
        """Token ids, tail-truncated to max_len (EOS included in budget)."""
        ids = [self.token_id(t) for t in tokenize(text)]
        budget = max_len - (1 if add_eos else 0)
        ids = ids[:budget]
        if add_eos:
            ids.append(EOS)
        return ids

    def to_list(self) -> list[str]:
        return self.itos[len(SPECIALS):]

    @classmethod
    def from_list(cls, tokens: list[str]) -> "Vocab":
        return cls(list(tokens))
