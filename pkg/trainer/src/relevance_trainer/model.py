"""Small encoder-decoder transformer for label-first seq2seq targets."""

from __future__ import annotations

import torch
from torch import nn

from .vocab import PAD

MAX_POSITIONS = 512


class Seq2SeqRanker(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        d_model: int = 128,
        nhead: int = 4,
        enc_layers: int = 2,
        dec_layers: int = 2,
        ff_dim: int = 256,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.d_model = d_model
        self.tok_embed = nn.Embedding(vocab_size, d_model, padding_idx=PAD)
        self.pos_embed = nn.Embedding(MAX_POSITIONS, d_model)
        self.encoder = nn.TransformerEncoder(
            nn.TransformerEncoderLayer(
                d_model, nhead, ff_dim, dropout=dropout, batch_first=True
            ),
            enc_layers,
            enable_nested_tensor=False,
        )
        self.decoder = nn.TransformerDecoder(
            nn.TransformerDecoderLayer(
                d_model, nhead, ff_dim, dropout=dropout, batch_first=True
            ),
            dec_layers,
        )
        self.lm_head = nn.Linear(d_model, vocab_size)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.size(1), device=ids.device).unsqueeze(0)
        return self.tok_embed(ids) + self.pos_embed(positions)

    def encode(self, src_ids: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        src_pad = src_ids.eq(PAD)
        memory = self.encoder(self._embed(src_ids), src_key_padding_mask=src_pad)
        return memory, src_pad

    def forward(self, src_ids: torch.Tensor, tgt_in_ids: torch.Tensor) -> torch.Tensor:
        """Teacher-forced logits, shape (batch, tgt_len, vocab)."""
        memory, src_pad = self.encode(src_ids)
        tgt_len = tgt_in_ids.size(1)
        causal = torch.triu(
            torch.ones(tgt_len, tgt_len, dtype=torch.bool, device=tgt_in_ids.device),
            diagonal=1,
        )
        hidden = self.decoder(
            self._embed(tgt_in_ids),
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=tgt_in_ids.eq(PAD),
            memory_key_padding_mask=src_pad,
        )
        return self.lm_head(hidden)

    @torch.no_grad()
    def first_step_logits(self, src_ids: torch.Tensor, bos_id: int) -> torch.Tensor:
        """Logits for the first generated token (decoder fed only BOS)."""
        memory, src_pad = self.encode(src_ids)
        bos = torch.full((src_ids.size(0), 1), bos_id, dtype=torch.long, device=src_ids.device)
        hidden = self.decoder(self._embed(bos), memory, memory_key_padding_mask=src_pad)
        return self.lm_head(hidden[:, 0, :])


def build_model(vocab_size: int, preset: dict) -> Seq2SeqRanker:
    return Seq2SeqRanker(vocab_size=vocab_size, **preset)
