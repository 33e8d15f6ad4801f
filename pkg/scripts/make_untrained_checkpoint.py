#!/usr/bin/env python3
"""Write the bundled untrained (random-init) checkpoint for the toy corpus.

Useful as an evaluation baseline: metrics run fine on it, with Spearman
expected near zero.
"""

import argparse

import numpy as np

from sarcse.checkpoint import Checkpoint, pack_model, save_checkpoint
from sarcse.corpus import build_vocab, token_frequency
from sarcse.embeddings import init_table
from sarcse.model import init_params
from sarcse.trainer import TrainConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", default="data/toy_corpus.txt")
    parser.add_argument("--out", default="data/toy_untrained.ckpt")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    cfg = TrainConfig(embed_dim=32, enc_channels=64, mix_channels=3, batch_size=16, seed=args.seed)
    vocab = build_vocab(args.corpus)
    freq = token_frequency(args.corpus, vocab)
    rng = np.random.default_rng(cfg.seed)
    table = init_table(vocab, cfg.embed_dim, cfg.init_scale, rng)
    params = init_params(cfg.embed_dim, cfg.enc_channels, cfg.mix_channels, rng)
    ckpt = Checkpoint(
        config=cfg.to_flat(),
        vocab=vocab,
        freq=freq,
        tensors=pack_model(table, params),
        opt_m={},
        opt_v={},
        step=0,
        best_dev=None,
    )
    save_checkpoint(ckpt, args.out)
    print(f"untrained checkpoint ({len(vocab)} vocab ids) -> {args.out}")


if __name__ == "__main__":
    main()
