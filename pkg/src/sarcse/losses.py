"""Frequency-weighted reconstruction loss, contrastive InfoNCE, and the
combined objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, l2_norm, logsumexp
from .corpus import FrequencyTable


@dataclass
class LossConfig:
    """Objective hyperparameters.

    theta is the floor of the per-token reconstruction weight, lam the slope
    of the frequency penalty, tau the InfoNCE temperature, and alpha / beta /
    gamma the mixing weights of the contrastive term and the two
    reconstruction terms. With detach_targets the reconstruction targets are
    treated as constants, which closes the collapse-to-zero shortcut a
    trainable embedding table would otherwise have.
    """

    theta: float = 0.1
    lam: float = 50.0
    tau: float = 0.05
    alpha: float = 1.0
    beta: float = 2.5e-4
    gamma: float = 2.5e-4
    detach_targets: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if min(self.alpha, self.beta, self.gamma) < 0.0:
            raise ValueError("alpha, beta, gamma must be >= 0")


def token_weight(freq: float, theta: float, lam: float) -> float:
    """Reconstruction weight max(theta, 1 - lam * freq); frequent tokens hit the floor."""
    return max(theta, 1.0 - lam * freq)


def token_weights(ids: np.ndarray, table: FrequencyTable, theta: float, lam: float) -> np.ndarray:
    """Vectorized `token_weight` over an id array."""
    return np.maximum(theta, 1.0 - lam * table.freq[ids])


def reconstruction_loss(
    x: Tensor,
    x_recon: Tensor,
    weights: np.ndarray,
    mask: np.ndarray,
    detach_target: bool = False,
) -> Tensor:
    """Weighted mean of per-token MSE over the masked-true rows.

    Per token the MSE averages over the embedding width; the sentence loss
    averages the weighted token losses over the N real tokens.
    """
    if x.shape != x_recon.shape:
        raise ValueError(f"reconstruction_loss: shapes differ, {x.shape} vs {x_recon.shape}")
    mask = np.asarray(mask, dtype=bool)
    n_real = int(mask.sum())
    if n_real == 0:
        raise ValueError("reconstruction_loss: mask selects no tokens")
    if detach_target:
        x = x.detach()
    d = x.shape[1]
    diff = x - x_recon
    per_token = (diff * diff).sum(axis=1) * (1.0 / d)
    w = np.where(mask, np.asarray(weights, dtype=np.float64), 0.0).astype(x.dtype)
    return (per_token * Tensor(w)).sum() * (1.0 / n_real)


def info_nce(z: Tensor, z_aug: Tensor, tau: float) -> Tensor:
    """Contrastive loss over in-batch candidates.

    Anchors are the rows of `z`; for anchor i the positive is row i of
    `z_aug` and the candidates are all rows of `z_aug`. Cosine logits are
    scaled by 1/tau and reduced with a log-sum-exp, so the value is the mean
    negative log-probability of the positive.
    """
    if z.shape != z_aug.shape or z.data.ndim != 2:
        raise ValueError(f"info_nce: expected matching B x k matrices, got {z.shape} and {z_aug.shape}")
    for name, t in (("first view", z), ("second view", z_aug)):
        norms = np.sqrt((t.data * t.data).sum(axis=1))
        bad = np.nonzero(norms == 0.0)[0]
        if bad.size:
            raise ValueError(f"info_nce: zero-norm embedding at sentence index {int(bad[0])} ({name})")
    b = z.shape[0]
    zn = z / l2_norm(z, axis=1, keepdims=True)
    zan = z_aug / l2_norm(z_aug, axis=1, keepdims=True)
    logits = (zn @ zan.T) * (1.0 / tau)
    pos = (logits * Tensor(np.eye(b, dtype=logits.dtype))).sum(axis=1)
    return (logsumexp(logits, axis=1) - pos).mean()


def total_loss(l_contrastive: Tensor, l_recon: Tensor, l_recon_aug: Tensor, cfg: LossConfig) -> Tensor:
    """alpha * contrastive + beta * reconstruction + gamma * augmented reconstruction."""
    return l_contrastive * cfg.alpha + l_recon * cfg.beta + l_recon_aug * cfg.gamma
