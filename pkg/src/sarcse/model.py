"""Multi-scale convolutional sentence autoencoder.

The encoder convolves a sentence with kernels of width 3, 4, and 5, max-pools
each feature map over positions, stacks the three pooled vectors into a
3 x enc_channels plane, and mixes the plane with a (3 x 2)-kernel 2-d
convolution. The flattened mix is the sentence embedding, of length
mix_channels * (enc_channels - 1). The decoder runs the same pipeline
backwards: transposed 2-d convolution, unpooling at the recorded argmax
positions, transposed 1-d convolutions, and an elementwise mean over scales.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .autodiff import (
    ShapeError,
    Tensor,
    conv1d_valid,
    conv2d_valid,
    max_pool_time,
    max_unpool_time,
    stack_rows,
    transposed_conv1d,
    transposed_conv2d,
)
from .corpus import MIN_SENTENCE_LEN, SentenceBatch
from .embeddings import EmbeddingTable, embed

KERNEL_SIZES = (3, 4, 5)
MIX_KERNEL = (3, 2)     # consumes all three scales per adjacent channel pair


@dataclass
class ModelParams:
    """All convolution parameters, keyed by kernel width where per-scale."""

    embed_dim: int
    enc_channels: int
    mix_channels: int
    enc_kernels: dict[int, Tensor]
    enc_bias: dict[int, Tensor]
    mix_kernels: Tensor
    mix_bias: Tensor
    demix_kernels: Tensor
    demix_bias: Tensor
    dec_kernels: dict[int, Tensor]
    dec_bias: dict[int, Tensor]

    @property
    def embedding_size(self) -> int:
        return self.mix_channels * (self.enc_channels - 1)

    def named(self) -> Iterator[tuple[str, Tensor]]:
        for ks in KERNEL_SIZES:
            yield f"enc.k{ks}.kernels", self.enc_kernels[ks]
            yield f"enc.k{ks}.bias", self.enc_bias[ks]
        yield "mix.kernels", self.mix_kernels
        yield "mix.bias", self.mix_bias
        yield "demix.kernels", self.demix_kernels
        yield "demix.bias", self.demix_bias
        for ks in KERNEL_SIZES:
            yield f"dec.k{ks}.kernels", self.dec_kernels[ks]
            yield f"dec.k{ks}.bias", self.dec_bias[ks]


def init_params(
    embed_dim: int,
    enc_channels: int,
    mix_channels: int,
    rng: np.random.Generator,
    dtype=np.float32,
) -> ModelParams:
    """Uniform fan-in-scaled kernels, zero biases."""
    if enc_channels < 2:
        raise ValueError(f"init_params: enc_channels must be >= 2, got {enc_channels}")
    if mix_channels < 1:
        raise ValueError(f"init_params: mix_channels must be >= 1, got {mix_channels}")

    def uniform(shape, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-s, s, size=shape).astype(dtype), requires_grad=True)

    def zeros(shape):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    kh, kw = MIX_KERNEL
    enc_kernels = {ks: uniform((enc_channels, ks, embed_dim), ks * embed_dim) for ks in KERNEL_SIZES}
    enc_bias = {ks: zeros((enc_channels,)) for ks in KERNEL_SIZES}
    dec_kernels = {ks: uniform((enc_channels, ks, embed_dim), enc_channels) for ks in KERNEL_SIZES}
    dec_bias = {ks: zeros((embed_dim,)) for ks in KERNEL_SIZES}
    return ModelParams(
        embed_dim=embed_dim,
        enc_channels=enc_channels,
        mix_channels=mix_channels,
        enc_kernels=enc_kernels,
        enc_bias=enc_bias,
        mix_kernels=uniform((mix_channels, kh, kw), kh * kw),
        mix_bias=zeros((mix_channels,)),
        demix_kernels=uniform((mix_channels, kh, kw), mix_channels),
        demix_bias=zeros((1,)),
        dec_kernels=dec_kernels,
        dec_bias=dec_bias,
    )


@dataclass
class EncodeState:
    """Everything the decoder needs to mirror one encoded sentence."""

    length: int                                 # effective token count fed to the convs
    pool_indices: dict[int, np.ndarray] = field(default_factory=dict)


def encode(x: Tensor, params: ModelParams) -> tuple[Tensor, EncodeState]:
    """Encode an N x d sentence into its embedding vector.

    N must be at least the largest kernel width (batching pads to 5).
    """
    n = x.shape[0]
    if n < max(KERNEL_SIZES):
        raise ShapeError(f"encode: sentence length {n} is below the minimum {max(KERNEL_SIZES)}")
    state = EncodeState(length=n)
    pooled = []
    for ks in KERNEL_SIZES:
        feature_map = conv1d_valid(x, params.enc_kernels[ks], params.enc_bias[ks])
        values, indices = max_pool_time(feature_map)
        state.pool_indices[ks] = indices
        pooled.append(values)
    plane = stack_rows(pooled)                                  # 3 x enc_channels
    mixed = conv2d_valid(plane, params.mix_kernels, params.mix_bias)
    return mixed.reshape(-1), state


def decode(z: Tensor, state: EncodeState, params: ModelParams) -> Tensor:
    """Reconstruct N x d token representations from an embedding vector."""
    if z.size != params.embedding_size:
        raise ShapeError(
            f"decode: embedding length {z.size} does not match "
            f"mix_channels*(enc_channels-1) = {params.embedding_size}"
        )
    planes = z.reshape(params.mix_channels, 1, params.enc_channels - 1)
    restored = transposed_conv2d(planes, params.demix_kernels, params.demix_bias)
    scales: Optional[Tensor] = None
    for row, ks in enumerate(KERNEL_SIZES):
        unpooled = max_unpool_time(
            restored.index0(row), state.pool_indices[ks], state.length - ks + 1
        )
        tokens = transposed_conv1d(unpooled, params.dec_kernels[ks], params.dec_bias[ks])
        scales = tokens if scales is None else scales + tokens
    return scales * (1.0 / len(KERNEL_SIZES))


@dataclass
class SentenceViews:
    """Per-sentence tensors for one dropout view."""

    inputs: list[Tensor]                    # effective-length x d slices of X
    embeddings: Tensor                      # B x embedding_size
    states: list[EncodeState]
    recons: Optional[list[Tensor]]          # None when the decoder is disabled


@dataclass
class PairForward:
    """Both dropout views of a batch plus their effective lengths and masks."""

    view: SentenceViews
    view_aug: SentenceViews
    eff_lengths: list[int]
    eff_masks: list[np.ndarray]


def _run_view(
    batch: SentenceBatch,
    table: EmbeddingTable,
    params: ModelParams,
    dropout_rate: float,
    rng: np.random.Generator,
    eff_lengths: list[int],
    run_decoder: bool,
) -> SentenceViews:
    x_full = embed(batch, table, dropout_rate, rng)
    inputs, states, zs = [], [], []
    recons: Optional[list[Tensor]] = [] if run_decoder else None
    for i in range(batch.batch_size):
        x = x_full.index0(i).head_rows(eff_lengths[i])
        z, st = encode(x, params)
        inputs.append(x)
        states.append(st)
        zs.append(z)
        if recons is not None:
            recons.append(decode(z, st, params))
    return SentenceViews(inputs=inputs, embeddings=stack_rows(zs), states=states, recons=recons)


def forward_pair(
    batch: SentenceBatch,
    table: EmbeddingTable,
    params: ModelParams,
    dropout_rate: float,
    rng: np.random.Generator,
    run_decoder: bool = True,
) -> PairForward:
    """Run the autoencoder over a batch under two independent dropout draws.

    Sentences shorter than the largest kernel keep their first zero-pad rows
    up to length 5; the per-sentence masks exclude those rows downstream.
    """
    eff_lengths = [max(int(n), MIN_SENTENCE_LEN) for n in batch.lengths]
    eff_masks = [batch.mask[i, :n] for i, n in enumerate(eff_lengths)]
    view = _run_view(batch, table, params, dropout_rate, rng, eff_lengths, run_decoder)
    view_aug = _run_view(batch, table, params, dropout_rate, rng, eff_lengths, run_decoder)
    return PairForward(view=view, view_aug=view_aug, eff_lengths=eff_lengths, eff_masks=eff_masks)
