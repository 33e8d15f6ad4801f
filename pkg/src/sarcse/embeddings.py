"""Trainable token-embedding table standing in for a pretrained encoder."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, dropout, embedding_lookup
from .corpus import PAD_ID, SentenceBatch, Vocab, pretrained_vectors


@dataclass
class EmbeddingTable:
    """V x d lookup table; row 0 (PAD) is pinned at zero."""

    weights: Tensor
    trainable: bool = True

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def frozen_view(self) -> "EmbeddingTable":
        """Same weights outside the differentiation graph (inference)."""
        return EmbeddingTable(Tensor(self.weights.data), trainable=False)


def init_table(
    vocab: Vocab,
    dim: int,
    init_scale: float,
    rng: np.random.Generator,
    pretrained_path: str | Path | None = None,
    dtype=np.float32,
) -> EmbeddingTable:
    """Uniform(-init_scale, +init_scale) table, optionally overlaid with
    vectors from a pretrained file for the tokens it covers."""
    if dim < 1:
        raise ValueError(f"init_table: dim must be >= 1, got {dim}")
    weights = rng.uniform(-init_scale, init_scale, size=(len(vocab), dim))
    if pretrained_path is not None:
        for token, vec in pretrained_vectors(pretrained_path):
            if vec.shape[0] != dim:
                raise ValueError(
                    f"init_table: pretrained width {vec.shape[0]} does not match dim {dim}"
                )
            idx = vocab.id_of(token)
            if idx != PAD_ID:
                weights[idx] = vec
    weights[PAD_ID] = 0.0
    return EmbeddingTable(Tensor(weights.astype(dtype), requires_grad=True))


def embed(
    batch: SentenceBatch,
    table: EmbeddingTable,
    dropout_rate: float,
    rng: np.random.Generator,
) -> Tensor:
    """Look up a batch as a B x L x d tensor, then apply inverted dropout.

    Two calls with independent rng draws give the two dropout views of the
    same batch; rate 0 is a pure lookup. PAD rows stay zero either way.
    """
    out = embedding_lookup(table.weights, batch.ids)
    if dropout_rate > 0.0:
        out = dropout(out, dropout_rate, rng)
    return out
