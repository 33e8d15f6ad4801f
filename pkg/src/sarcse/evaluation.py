"""Evaluation metrics: Spearman correlation, alignment/uniformity of the
embedding space, and grouped similarity densities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import MIN_SENTENCE_LEN, ScoredPair, Vocab, make_batch_tokens
from .embeddings import EmbeddingTable, embed
from .losses import LossConfig, token_weights
from .model import ModelParams, decode, encode

GROUP_LABELS = ("0-1", "1-2", "2-3", "3-4", "4-5")


class UndefinedCorrelationError(ValueError):
    """Spearman correlation is undefined for constant inputs."""


def fractional_ranks(values: Sequence[float]) -> np.ndarray:
    """Average ranks (1-based), ties sharing their mean rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of fractional ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"spearman: expected equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError("spearman: need at least 2 observations")
    rx = fractional_ranks(x)
    ry = fractional_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    if denom == 0.0:
        raise UndefinedCorrelationError("spearman: undefined for constant input")
    return float((dx * dy).sum()) / denom


def _normalize(v: np.ndarray, what: str) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError(f"{what}: zero-norm embedding")
    return v / n


def alignment(pos_pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Mean squared distance between L2-normalized positive-pair embeddings."""
    if not pos_pairs:
        raise ValueError("alignment: no positive pairs")
    total = 0.0
    for a, b in pos_pairs:
        diff = _normalize(np.asarray(a, np.float64), "alignment") - _normalize(np.asarray(b, np.float64), "alignment")
        total += float(diff @ diff)
    return total / len(pos_pairs)


def uniformity(embeddings: Sequence[np.ndarray]) -> float:
    """log of the mean Gaussian-kernel value over all unordered distinct pairs."""
    if len(embeddings) < 2:
        raise ValueError("uniformity: need at least 2 embeddings")
    unit = np.stack([_normalize(np.asarray(e, np.float64), "uniformity") for e in embeddings])
    total = 0.0
    count = 0
    for i in range(len(unit) - 1):
        diff = unit[i + 1:] - unit[i]          # exact zeros for identical embeddings
        sq_dist = (diff * diff).sum(axis=1)
        total += float(np.exp(-2.0 * sq_dist).sum())
        count += diff.shape[0]
    return float(np.log(total / count))


def group_of(score: float) -> str:
    """Rating group of a gold score; 5.0 belongs to the top group."""
    return GROUP_LABELS[min(int(math.floor(score)), len(GROUP_LABELS) - 1)]


def similarity_density(
    gold_scores: Sequence[float],
    predicted: Sequence[float],
) -> dict[str, list[float]]:
    """Partition predicted cosines into the five gold-rating groups."""
    groups: dict[str, list[float]] = {g: [] for g in GROUP_LABELS}
    for score, sim in zip(gold_scores, predicted):
        groups[group_of(score)].append(float(sim))
    return groups


def group_stats(values: Sequence[float]) -> tuple[Optional[float], Optional[float]]:
    """(mean, population variance) by the two-pass formula; None when empty."""
    if not values:
        return None, None
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, var


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; bitwise-identical vectors score exactly 1."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine: zero-norm embedding")
    if a.shape == b.shape and np.array_equal(a, b):
        return 1.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


# -- model-driven evaluation -------------------------------------------------


def encode_tokens(
    token_lists: Sequence[list[str]],
    vocab: Vocab,
    table: EmbeddingTable,
    params: ModelParams,
    batch_size: int = 64,
) -> np.ndarray:
    """Embed tokenized sentences with dropout off; returns an n x |z| matrix.

    Repeated sentences are computed once, so duplicates are bitwise equal.
    """
    frozen = table.frozen_view()
    cache: dict[tuple[str, ...], np.ndarray] = {}
    unique = [list(k) for k in dict.fromkeys(tuple(t) for t in token_lists)]
    rng = np.random.default_rng(0)  # unused at rate 0, embed() wants one
    for start in range(0, len(unique), batch_size):
        chunk = unique[start:start + batch_size]
        batch = make_batch_tokens(chunk, vocab)
        x_full = embed(batch, frozen, 0.0, rng)
        for i, toks in enumerate(chunk):
            n_eff = max(int(batch.lengths[i]), MIN_SENTENCE_LEN)
            x = x_full.index0(i).head_rows(n_eff)
            z, _ = encode(x, params)
            cache[tuple(toks)] = z.data
    return np.stack([cache[tuple(t)] for t in token_lists])


@dataclass
class EvalReport:
    """Composite metric report over one scored-pair dataset."""

    spearman_rho: Optional[float]
    alignment: Optional[float]
    uniformity: Optional[float]
    group_histograms: dict[str, list[float]] = field(default_factory=dict)
    pair_count: int = 0

    def metric_rows(self) -> list[tuple[str, str]]:
        rows = [
            ("spearman_rho", "undefined" if self.spearman_rho is None else repr(self.spearman_rho)),
            ("alignment", "n/a" if self.alignment is None else repr(self.alignment)),
            ("uniformity", "n/a" if self.uniformity is None else repr(self.uniformity)),
            ("pair_count", str(self.pair_count)),
        ]
        for label in GROUP_LABELS:
            values = self.group_histograms.get(label, [])
            mean, var = group_stats(values)
            rows.append((f"group_{label}_count", str(len(values))))
            rows.append((f"group_{label}_mean", "n/a" if mean is None else repr(mean)))
            rows.append((f"group_{label}_variance", "n/a" if var is None else repr(var)))
        return rows


def evaluate_pairs(
    pairs: Sequence[ScoredPair],
    vocab: Vocab,
    table: EmbeddingTable,
    params: ModelParams,
    pos_threshold: float = 4.0,
) -> EvalReport:
    """Embed both sides of every pair (no dropout) and compute all metrics."""
    if not pairs:
        return EvalReport(None, None, None, {g: [] for g in GROUP_LABELS}, 0)
    all_tokens = [p.sentence_a for p in pairs] + [p.sentence_b for p in pairs]
    embs = encode_tokens(all_tokens, vocab, table, params)
    emb_a, emb_b = embs[: len(pairs)], embs[len(pairs):]

    predicted = [cosine(emb_a[i], emb_b[i]) for i in range(len(pairs))]
    gold = [p.gold_score for p in pairs]
    try:
        rho = spearman(gold, predicted)
    except (UndefinedCorrelationError, ValueError):
        rho = None

    positives = [(emb_a[i], emb_b[i]) for i in range(len(pairs)) if gold[i] >= pos_threshold]
    align = alignment(positives) if positives else None
    uniform = uniformity(list(embs)) if len(embs) >= 2 else None
    return EvalReport(
        spearman_rho=rho,
        alignment=align,
        uniformity=uniform,
        group_histograms=similarity_density(gold, predicted),
        pair_count=len(pairs),
    )


def evaluate_checkpoint(checkpoint, pairs_path, pos_threshold: float = 4.0) -> EvalReport:
    """`evaluate_pairs` over a loaded checkpoint and a pairs file."""
    from .checkpoint import unpack_model
    from .corpus import load_sts_pairs

    table, params = unpack_model(checkpoint)
    pairs = load_sts_pairs(pairs_path)
    return evaluate_pairs(pairs, checkpoint.vocab, table, params, pos_threshold=pos_threshold)


def token_report(
    pairs: Sequence[ScoredPair],
    vocab: Vocab,
    table: EmbeddingTable,
    params: ModelParams,
    loss_cfg: LossConfig,
    freq,
) -> list[tuple[int, str, int, str, float, float]]:
    """Per-token reconstruction MSE rows: (pair, side, position, token, mse, weight).

    Lower loss marks the tokens the embedding preserves best.
    """
    frozen = table.frozen_view()
    rng = np.random.default_rng(0)
    rows = []
    for pi, pair in enumerate(pairs):
        for side, toks in (("a", pair.sentence_a), ("b", pair.sentence_b)):
            batch = make_batch_tokens([toks], vocab)
            x_full = embed(batch, frozen, 0.0, rng)
            n_eff = max(int(batch.lengths[0]), MIN_SENTENCE_LEN)
            x = x_full.index0(0).head_rows(n_eff)
            z, state = encode(x, params)
            recon = decode(z, state, params)
            diff = x.data - recon.data
            mse = (diff * diff).mean(axis=1)
            ids = batch.ids[0, : len(toks)]
            weights = token_weights(ids, freq, loss_cfg.theta, loss_cfg.lam)
            for pos, tok in enumerate(toks):
                rows.append((pi, side, pos, tok, float(mse[pos]), float(weights[pos])))
    return rows


def write_metrics_csv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        for name, value in report.metric_rows():
            fh.write(f"{name},{value}\n")


def write_density_csv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("group,cosine\n")
        for label in GROUP_LABELS:
            for sim in report.group_histograms.get(label, []):
                fh.write(f"{label},{sim!r}\n")


def write_summary(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        rho = "undefined" if report.spearman_rho is None else f"{report.spearman_rho:.6f}"
        align = "n/a" if report.alignment is None else f"{report.alignment:.6f}"
        uni = "n/a" if report.uniformity is None else f"{report.uniformity:.6f}"
        fh.write(f"pairs evaluated: {report.pair_count}\n")
        fh.write(f"spearman rho:    {rho}\n")
        fh.write(f"alignment:       {align}\n")
        fh.write(f"uniformity:      {uni}\n")
        fh.write("similarity by gold-rating group (count / mean / variance):\n")
        for label in GROUP_LABELS:
            values = report.group_histograms.get(label, [])
            mean, var = group_stats(values)
            mean_s = "n/a" if mean is None else f"{mean:.6f}"
            var_s = "n/a" if var is None else f"{var:.6f}"
            fh.write(f"  {label}: {len(values)} / {mean_s} / {var_s}\n")
