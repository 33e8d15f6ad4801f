"""Versioned binary checkpoint format.

Layout, all integers little-endian:

    magic  b"SARC"
    u16    format version
    u32    header length, then header JSON (config, vocab tokens, corpus
           checksum, optimizer step, best dev score)
    u32    directory length, then directory JSON: per tensor the name,
           shape, dtype, and byte offset into the payload
    payload: raw tensor bytes, concatenated in directory order
    8-byte blake2b checksum of every preceding byte
"""

from __future__ import annotations

import json
import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .autodiff import Tensor
from .corpus import FrequencyTable, Vocab
from .embeddings import EmbeddingTable
from .model import KERNEL_SIZES, ModelParams

MAGIC = b"SARC"
VERSION = 1

_FREQ_KEY = "corpus.freq"
_MOMENT_M = "opt.m."
_MOMENT_V = "opt.v."


class CheckpointError(Exception):
    """Base class for unreadable checkpoints."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedError(CheckpointError):
    pass


class ChecksumMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    """Everything needed to resume training or run inference."""

    config: dict
    vocab: Vocab
    freq: FrequencyTable
    tensors: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray]
    opt_v: dict[str, np.ndarray]
    step: int = 0
    best_dev: Optional[float] = None


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    header = {
        "config": ckpt.config,
        "vocab": ckpt.vocab.tokens,
        "corpus_sha256": ckpt.vocab.corpus_sha256,
        "step": ckpt.step,
        "best_dev": ckpt.best_dev,
    }
    entries: list[tuple[str, np.ndarray]] = [(_FREQ_KEY, ckpt.freq.freq)]
    entries += sorted(ckpt.tensors.items())
    entries += sorted((_MOMENT_M + k, v) for k, v in ckpt.opt_m.items())
    entries += sorted((_MOMENT_V + k, v) for k, v in ckpt.opt_v.items())

    directory = []
    payload = bytearray()
    for name, arr in entries:
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        directory.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": le.dtype.str,
            "offset": len(payload),
        })
        payload += le.tobytes()

    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<H", VERSION)
    header_bytes = json.dumps(header).encode("utf-8")
    blob += struct.pack("<I", len(header_bytes)) + header_bytes
    dir_bytes = json.dumps(directory).encode("utf-8")
    blob += struct.pack("<I", len(dir_bytes)) + dir_bytes
    blob += payload
    blob += hashlib.blake2b(bytes(blob), digest_size=8).digest()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 2 + 8:
        raise TruncatedError(f"{path}: file too short to be a checkpoint")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    body, digest = blob[:-8], blob[-8:]
    if hashlib.blake2b(body, digest_size=8).digest() != digest:
        raise ChecksumMismatchError(f"{path}: checksum mismatch (corrupt or truncated payload)")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {VERSION}")

    pos = 6

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(body):
            raise TruncatedError(f"{path}: truncated at byte {pos}")
        chunk = body[pos:pos + n]
        pos += n
        return chunk

    (header_len,) = struct.unpack("<I", take(4))
    header = json.loads(take(header_len).decode("utf-8"))
    (dir_len,) = struct.unpack("<I", take(4))
    directory = json.loads(take(dir_len).decode("utf-8"))
    payload = body[pos:]

    tensors: dict[str, np.ndarray] = {}
    opt_m: dict[str, np.ndarray] = {}
    opt_v: dict[str, np.ndarray] = {}
    freq_arr: Optional[np.ndarray] = None
    for entry in directory:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        start = entry["offset"]
        if start + nbytes > len(payload):
            raise TruncatedError(f"{path}: tensor {entry['name']} extends past end of payload")
        arr = np.frombuffer(payload[start:start + nbytes], dtype=dtype).reshape(shape).copy()
        name = entry["name"]
        if name == _FREQ_KEY:
            freq_arr = arr
        elif name.startswith(_MOMENT_M):
            opt_m[name[len(_MOMENT_M):]] = arr
        elif name.startswith(_MOMENT_V):
            opt_v[name[len(_MOMENT_V):]] = arr
        else:
            tensors[name] = arr
    if freq_arr is None:
        raise CheckpointError(f"{path}: missing {_FREQ_KEY} tensor")

    vocab = Vocab(header["vocab"], corpus_sha256=header.get("corpus_sha256"))
    return Checkpoint(
        config=header["config"],
        vocab=vocab,
        freq=FrequencyTable(freq_arr),
        tensors=tensors,
        opt_m=opt_m,
        opt_v=opt_v,
        step=header.get("step", 0),
        best_dev=header.get("best_dev"),
    )


# -- model <-> tensor-dict plumbing ------------------------------------------


def pack_model(table: EmbeddingTable, params: ModelParams) -> dict[str, np.ndarray]:
    tensors = {"embedding.weights": table.weights.data}
    for name, t in params.named():
        tensors[name] = t.data
    return tensors


def unpack_model(
    ckpt: Checkpoint,
    requires_grad: bool = False,
) -> tuple[EmbeddingTable, ModelParams]:
    """Rebuild the embedding table and conv parameters from stored tensors."""
    cfg = ckpt.config

    def tensor(name: str) -> Tensor:
        if name not in ckpt.tensors:
            raise CheckpointError(f"checkpoint missing tensor {name}")
        return Tensor(ckpt.tensors[name].copy(), requires_grad=requires_grad)

    table = EmbeddingTable(tensor("embedding.weights"), trainable=not cfg.get("freeze_table", False))
    params = ModelParams(
        embed_dim=int(cfg["embed_dim"]),
        enc_channels=int(cfg["enc_channels"]),
        mix_channels=int(cfg["mix_channels"]),
        enc_kernels={ks: tensor(f"enc.k{ks}.kernels") for ks in KERNEL_SIZES},
        enc_bias={ks: tensor(f"enc.k{ks}.bias") for ks in KERNEL_SIZES},
        mix_kernels=tensor("mix.kernels"),
        mix_bias=tensor("mix.bias"),
        demix_kernels=tensor("demix.kernels"),
        demix_bias=tensor("demix.bias"),
        dec_kernels={ks: tensor(f"dec.k{ks}.kernels") for ks in KERNEL_SIZES},
        dec_bias={ks: tensor(f"dec.k{ks}.bias") for ks in KERNEL_SIZES},
    )
    return table, params
