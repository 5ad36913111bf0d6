"""Activity-log encoder: embedding lookup, stacked self-attention, mean/max pooling.

A player's last ``n`` events (left-padded with id 0) are embedded, passed
through ``blocks`` scaled dot-product self-attention blocks each followed by a
fully connected map, and the non-pad rows of the result are mean- and
max-pooled.  The concatenation is the player's node feature ``x`` of width
``2 * d``.  No positional encoding is used, so ``x`` does not depend on event
order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .layers import Linear, RowBatchNorm, dropout, init_uniform_
from .synth_data import PAD


@dataclass
class AttentionBlockParams:
    """Weights for one block; ``None`` projections mean identity (Q = K = V = S')."""

    w_fc: torch.Tensor
    b_fc: torch.Tensor
    w_q: Optional[torch.Tensor] = None
    w_k: Optional[torch.Tensor] = None
    w_v: Optional[torch.Tensor] = None

    @classmethod
    def identity(cls, d: int, dtype=torch.float64) -> "AttentionBlockParams":
        return cls(w_fc=torch.eye(d, dtype=dtype), b_fc=torch.zeros(d, dtype=dtype))


def embed(sequence, table: torch.Tensor) -> torch.Tensor:
    """Row ``t`` of the result is ``table[sequence[t]]``."""
    idx = torch.as_tensor(sequence, dtype=torch.long)
    if idx.numel() and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"event id out of range [0, {table.shape[0]})")
    return table[idx]


def attention_weights(s: torch.Tensor, params: AttentionBlockParams, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Row-stochastic ``softmax(Q K^T / sqrt(d))`` with pad keys masked out.

    ``s`` is (n, d) or (batch, n, d); ``mask`` marks valid (non-pad) positions.
    Sequences with no valid position attend uniformly; their output is unused.
    """
    if s.shape[-2] == 0:
        raise ValueError("empty sequence")
    d = s.shape[-1]
    q = s if params.w_q is None else s @ params.w_q
    k = s if params.w_k is None else s @ params.w_k
    logits = q @ k.transpose(-1, -2) / math.sqrt(d)
    if mask is not None:
        mask = mask | ~mask.any(dim=-1, keepdim=True)
        logits = logits.masked_fill(~mask.unsqueeze(-2), float("-inf"))
    return torch.softmax(logits, dim=-1)


def attention_block(s: torch.Tensor, params: AttentionBlockParams, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """``H = FC(softmax(Q K^T / sqrt(d)) V)``."""
    v = s if params.w_v is None else s @ params.w_v
    attended = attention_weights(s, params, mask) @ v
    return attended @ params.w_fc + params.b_fc


def pool(h: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean over valid rows concatenated with elementwise max; all-pad gives 0."""
    m = mask.unsqueeze(-1).to(h.dtype)
    count = m.sum(dim=-2)
    mean = (h * m).sum(dim=-2) / count.clamp(min=1.0)
    mx = h.masked_fill(~mask.unsqueeze(-1), float("-inf")).amax(dim=-2)
    mx = torch.where(count > 0, mx, torch.zeros_like(mx))
    return torch.cat([mean, mx], dim=-1)


class AttentionBlock(nn.Module):
    def __init__(self, d: int, project: bool = True, generator=None):
        super().__init__()
        self.project = project
        if project:
            self.w_q = nn.Parameter(init_uniform_(torch.empty(d, d), d, generator))
            self.w_k = nn.Parameter(init_uniform_(torch.empty(d, d), d, generator))
            self.w_v = nn.Parameter(init_uniform_(torch.empty(d, d), d, generator))
        self.fc = Linear(d, d, generator=generator)

    @property
    def params(self) -> AttentionBlockParams:
        if self.project:
            return AttentionBlockParams(self.fc.weight, self.fc.bias, self.w_q, self.w_k, self.w_v)
        return AttentionBlockParams(self.fc.weight, self.fc.bias)

    def forward(self, s, mask=None):
        return attention_block(s, self.params, mask)


class BehaviorEncoder(nn.Module):
    """Maps (batch, n) event-id sequences to (batch, 2d) behaviour embeddings."""

    def __init__(
        self,
        vocab_size: int,
        d: int = 64,
        blocks: int = 5,
        dropout: float = 0.1,
        project: bool = True,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        if blocks < 1:
            raise ValueError("need at least one attention block")
        self.d = d
        self.p_drop = dropout
        self.generator = generator
        self.embedding = nn.Embedding(vocab_size, d, padding_idx=PAD)
        with torch.no_grad():
            self.embedding.weight.copy_(torch.randn(vocab_size, d, generator=generator))
            self.embedding.weight[PAD].zero_()
        self.blocks = nn.ModuleList(AttentionBlock(d, project, generator) for _ in range(blocks))
        self.norms = nn.ModuleList(RowBatchNorm(d) for _ in range(blocks - 1))

    @property
    def out_dim(self) -> int:
        return 2 * self.d

    def attend(self, seqs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Final attended sequence H (batch, n, d) and the valid-position mask."""
        mask = seqs != PAD
        h = self.embedding(seqs)
        for i, block in enumerate(self.blocks):
            h = block(h, mask)
            if i < len(self.norms):
                flat = self.norms[i](h.reshape(-1, self.d), mask.reshape(-1))
                h = torch.relu(flat.reshape(h.shape))
                h = dropout(h, self.p_drop, self.training, self.generator)
        return h, mask

    def forward(self, seqs: torch.Tensor) -> torch.Tensor:
        if seqs.dim() == 1:
            return self.forward(seqs.unsqueeze(0))[0]
        h, mask = self.attend(seqs)
        return pool(h, mask)


def encode_player(sequence, encoder: BehaviorEncoder) -> torch.Tensor:
    return encoder(torch.as_tensor(sequence, dtype=torch.long))
