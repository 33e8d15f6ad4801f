#!/usr/bin/env python3
"""Regenerate the bundled toy corpus and scored sentence pairs.

Deterministic for a fixed seed; the committed files under data/ are the
output of running this script as-is. Gold pair scores are 5x the token-set
Jaccard overlap, so lexical similarity is the learnable signal.
"""

import argparse
from pathlib import Path

import numpy as np

DETS = ["the", "a"]
ADJS = ["small", "big", "old", "young", "red", "quiet", "happy", "hungry",
        "tired", "busy", "cold", "warm", "bright", "little"]
SUBJECTS = ["man", "woman", "dog", "cat", "chef", "runner", "child", "bird",
            "farmer", "teacher", "student", "painter", "doctor", "singer",
            "writer", "driver", "baker", "sailor"]
VERBS_T = ["eats", "carries", "watches", "finds", "likes", "draws", "holds",
           "cleans", "throws", "catches", "paints", "lifts", "drops", "washes"]
OBJECTS = ["food", "rice", "bread", "ball", "stick", "book", "cup", "stone",
           "guitar", "basket", "apple", "fish", "box", "rope", "chair",
           "flower", "bottle", "ladder"]
VERBS_I = ["runs", "walks", "sleeps", "sings", "jumps", "waits", "rests",
           "smiles", "dances", "naps", "swims"]
PLACES = ["in the park", "near the river", "at the market", "on the hill",
          "by the lake", "in the garden", "at the school", "near the bridge"]
ADVERBS = ["slowly", "quickly", "quietly", "happily", "carefully", "early",
           "today", "often"]
ENDS = [".", ".", ".", "!"]


def sentence(rng: np.random.Generator) -> str:
    def pick(pool):
        return pool[rng.integers(0, len(pool))]

    if rng.random() < 0.55:
        words = [pick(DETS)]
        if rng.random() < 0.5:
            words.append(pick(ADJS))
        words += [pick(SUBJECTS), pick(VERBS_T), pick(DETS)]
        if rng.random() < 0.4:
            words.append(pick(ADJS))
        words.append(pick(OBJECTS))
        if rng.random() < 0.5:
            words.append(pick(PLACES))
    else:
        words = [pick(DETS), pick(SUBJECTS), pick(VERBS_I)]
        if rng.random() < 0.7:
            words.append(pick(PLACES))
        if rng.random() < 0.5:
            words.append(pick(ADVERBS))
    return " ".join(words) + " " + pick(ENDS)


def mutate(text: str, rng: np.random.Generator, k: int) -> str:
    pools = [ADJS, SUBJECTS, VERBS_T, OBJECTS, VERBS_I, ADVERBS]
    words = text.split()
    for _ in range(k):
        pos = int(rng.integers(0, len(words)))
        for pool in pools:
            if words[pos] in pool:
                words[pos] = pool[rng.integers(0, len(pool))]
                break
    return " ".join(words)


def jaccard(a: str, b: str) -> float:
    sa, sb = set(a.lower().split()), set(b.lower().split())
    return len(sa & sb) / len(sa | sb)


def make_pairs(rng: np.random.Generator, count: int) -> list[str]:
    lines = []
    for i in range(count):
        a = sentence(rng)
        kind = i % 8
        if kind == 0:
            b = a
        elif kind < 6:
            b = mutate(a, rng, k=kind)
        else:
            b = sentence(rng)
        score = round(5.0 * jaccard(a, b), 2)
        lines.append(f"{score}\t{a}\t{b}")
    return lines


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--seed", type=int, default=20240815)
    parser.add_argument("--sentences", type=int, default=200)
    parser.add_argument("--dev-pairs", type=int, default=40)
    parser.add_argument("--test-pairs", type=int, default=60)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    corpus = [sentence(rng) for _ in range(args.sentences)]
    (out / "toy_corpus.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")
    dev = make_pairs(rng, args.dev_pairs)
    (out / "toy_sts_dev.tsv").write_text("\n".join(dev) + "\n", encoding="utf-8")
    test = make_pairs(rng, args.test_pairs)
    (out / "toy_sts_test.tsv").write_text("\n".join(test) + "\n", encoding="utf-8")

    vocab = sorted({w for line in corpus for w in line.lower().split()})
    print(f"{len(corpus)} sentences, {len(vocab)} distinct tokens -> {out}")


if __name__ == "__main__":
    main()
