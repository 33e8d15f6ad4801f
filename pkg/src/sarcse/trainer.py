"""AdamW training loop with seeded shuffling, dev-set model selection, and
checkpoint snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import GradientMap, Tensor, backward
from .checkpoint import Checkpoint, pack_model, unpack_model
from .corpus import PAD_ID, FrequencyTable, ScoredPair, Vocab, make_batch
from .embeddings import EmbeddingTable, init_table
from .evaluation import UndefinedCorrelationError, cosine, encode_tokens, spearman
from .losses import LossConfig, info_nce, reconstruction_loss, token_weights, total_loss
from .model import ModelParams, forward_pair, init_params

ABLATIONS = ("full", "no_sal", "no_sal_no_decoder")


@dataclass
class TrainConfig:
    """Model dimensions, optimization settings, and the loss configuration."""

    embed_dim: int = 32
    enc_channels: int = 64
    mix_channels: int = 3
    init_scale: float = 0.1
    pretrained_path: str = ""
    freeze_table: bool = False
    batch_size: int = 64
    epochs: int = 1
    max_steps: int = 0          # 0 = run the full epoch budget
    seed: int = 0
    eval_every: int = 50
    dropout: float = 0.1
    lr: float = 1e-3            # desk-scale default; 1e-5 suits fine-tuning regimes
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    ablation: str = "full"
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")

    def to_flat(self) -> dict:
        """Flat scalar dict, loss fields inlined; round-trips via `from_flat`."""
        out = {}
        for f in fields(self):
            if f.name == "loss":
                continue
            out[f.name] = getattr(self, f.name)
        for f in fields(self.loss):
            out[f.name] = getattr(self.loss, f.name)
        return out

    @classmethod
    def from_flat(cls, flat: dict) -> "TrainConfig":
        loss_names = {f.name for f in fields(LossConfig)}
        own_names = {f.name for f in fields(cls)} - {"loss"}
        loss = LossConfig(**{k: v for k, v in flat.items() if k in loss_names})
        own = {k: v for k, v in flat.items() if k in own_names}
        return cls(loss=loss, **own)


@dataclass
class AdamW:
    """Decoupled-weight-decay Adam over named parameter tensors."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0

    def step(
        self,
        named_params: Sequence[tuple[str, Tensor]],
        grads: GradientMap,
    ) -> None:
        """One bias-corrected update; weight decay is applied to the
        parameters directly, not through the gradients."""
        self.step_count += 1
        t = self.step_count
        for name, param in named_params:
            g = grads.wrt(param)
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"adamw: non-finite gradient for parameter {name!r}")
            if name == "embedding.weights":
                g = g.copy()
                g[PAD_ID] = 0.0     # PAD row stays pinned at zero
            m = self.m.setdefault(name, np.zeros_like(param.data))
            v = self.v.setdefault(name, np.zeros_like(param.data))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            if self.weight_decay:
                param.data -= self.lr * self.weight_decay * param.data
            param.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class LogRow:
    step: int
    infonce: float
    recon: float
    recon_aug: float
    total: float
    token_weight_mean: float
    dev_spearman: Optional[float] = None

    CSV_HEADER = "step,infonce,recon,recon_aug,total,token_weight_mean,dev_spearman"

    def to_csv(self) -> str:
        dev = "" if self.dev_spearman is None else repr(self.dev_spearman)
        return (
            f"{self.step},{self.infonce!r},{self.recon!r},{self.recon_aug!r},"
            f"{self.total!r},{self.token_weight_mean!r},{dev}"
        )


@dataclass
class TrainResult:
    best: Checkpoint
    last: Checkpoint
    log_rows: list[LogRow]
    best_dev: Optional[float]


def dev_spearman(
    pairs: Sequence[ScoredPair],
    vocab: Vocab,
    table: EmbeddingTable,
    params: ModelParams,
) -> Optional[float]:
    """Spearman of predicted vs gold similarity; None when undefined."""
    all_tokens = [p.sentence_a for p in pairs] + [p.sentence_b for p in pairs]
    embs = encode_tokens(all_tokens, vocab, table, params)
    predicted = [cosine(embs[i], embs[len(pairs) + i]) for i in range(len(pairs))]
    try:
        return spearman([p.gold_score for p in pairs], predicted)
    except UndefinedCorrelationError:
        return None


def _snapshot(
    cfg: TrainConfig,
    vocab: Vocab,
    freq: FrequencyTable,
    table: EmbeddingTable,
    params: ModelParams,
    opt: AdamW,
    best_dev: Optional[float],
) -> Checkpoint:
    return Checkpoint(
        config=cfg.to_flat(),
        vocab=vocab,
        freq=freq,
        tensors={k: v.copy() for k, v in pack_model(table, params).items()},
        opt_m={k: v.copy() for k, v in opt.m.items()},
        opt_v={k: v.copy() for k, v in opt.v.items()},
        step=opt.step_count,
        best_dev=best_dev,
    )


def train(
    cfg: TrainConfig,
    sentences: Sequence[str],
    dev_pairs: Sequence[ScoredPair],
    vocab: Vocab,
    freq: FrequencyTable,
    resume: Optional[Checkpoint] = None,
    on_log: Optional[Callable[[LogRow], None]] = None,
) -> TrainResult:
    """Optimize the combined objective over shuffled batches.

    Every `eval_every` steps (and at the end of the run) the dev Spearman is
    computed with dropout off, and the best-scoring parameters are retained.
    Single-threaded and bitwise-reproducible for a fixed seed.
    """
    if not sentences:
        raise ValueError("train: empty corpus")
    if len(dev_pairs) < 2 or len({p.gold_score for p in dev_pairs}) < 2:
        raise ValueError("train: dev set needs >= 2 pairs with non-constant gold scores (Spearman undefined)")

    rng = np.random.default_rng(cfg.seed)
    if resume is not None:
        table, params = unpack_model(resume, requires_grad=True)
    else:
        table = init_table(
            vocab, cfg.embed_dim, cfg.init_scale, rng,
            pretrained_path=cfg.pretrained_path or None,
        )
        params = init_params(cfg.embed_dim, cfg.enc_channels, cfg.mix_channels, rng)
    opt = AdamW(
        lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2,
        eps=cfg.adam_eps, weight_decay=cfg.weight_decay,
    )
    if resume is not None:
        opt.m = {k: v.copy() for k, v in resume.opt_m.items()}
        opt.v = {k: v.copy() for k, v in resume.opt_v.items()}
        opt.step_count = resume.step

    named = list(params.named())
    if table.trainable and not cfg.freeze_table:
        named = [("embedding.weights", table.weights)] + named

    run_decoder = cfg.ablation != "no_sal_no_decoder"
    force_unit_weights = cfg.ablation in ("no_sal", "no_sal_no_decoder")
    loss_cfg = cfg.loss
    if not run_decoder:
        loss_cfg = LossConfig(
            theta=cfg.loss.theta, lam=cfg.loss.lam, tau=cfg.loss.tau,
            alpha=cfg.loss.alpha, beta=0.0, gamma=0.0,
            detach_targets=cfg.loss.detach_targets,
        )

    steps_per_epoch = math.ceil(len(sentences) / cfg.batch_size)
    budget = cfg.max_steps if cfg.max_steps > 0 else cfg.epochs * steps_per_epoch

    log_rows: list[LogRow] = []
    best: Optional[Checkpoint] = None
    best_dev: Optional[float] = None
    step = 0
    last_eval_step = -1

    def maybe_eval() -> Optional[float]:
        nonlocal best, best_dev, last_eval_step
        last_eval_step = step
        rho = dev_spearman(dev_pairs, vocab, table, params)
        if rho is not None and (best_dev is None or rho > best_dev):
            best_dev = rho
            best = _snapshot(cfg, vocab, freq, table, params, opt, best_dev)
        return rho

    while step < budget:
        order = rng.permutation(len(sentences))
        for start in range(0, len(sentences), cfg.batch_size):
            if step >= budget:
                break
            chosen = [sentences[i] for i in order[start:start + cfg.batch_size]]
            batch = make_batch(chosen, vocab)
            pf = forward_pair(batch, table, params, cfg.dropout, rng, run_decoder=run_decoder)

            l_info = info_nce(pf.view.embeddings, pf.view_aug.embeddings, loss_cfg.tau)
            weight_sum, weight_n = 0.0, 0
            if run_decoder:
                l_recon_acc = None
                l_recon_aug_acc = None
                for i in range(batch.batch_size):
                    n_eff = pf.eff_lengths[i]
                    mask = pf.eff_masks[i]
                    if force_unit_weights:
                        w = np.ones(n_eff)
                    else:
                        w = token_weights(batch.ids[i, :n_eff], freq, loss_cfg.theta, loss_cfg.lam)
                    weight_sum += float(w[mask].sum())
                    weight_n += int(mask.sum())
                    li = reconstruction_loss(
                        pf.view.inputs[i], pf.view.recons[i], w, mask, loss_cfg.detach_targets
                    )
                    lai = reconstruction_loss(
                        pf.view_aug.inputs[i], pf.view_aug.recons[i], w, mask, loss_cfg.detach_targets
                    )
                    l_recon_acc = li if l_recon_acc is None else l_recon_acc + li
                    l_recon_aug_acc = lai if l_recon_aug_acc is None else l_recon_aug_acc + lai
                l_recon = l_recon_acc * (1.0 / batch.batch_size)
                l_recon_aug = l_recon_aug_acc * (1.0 / batch.batch_size)
            else:
                l_recon = Tensor(np.zeros(()))
                l_recon_aug = Tensor(np.zeros(()))

            loss = total_loss(l_info, l_recon, l_recon_aug, loss_cfg)
            grads = backward(loss)
            opt.step(named, grads)
            step += 1

            row = LogRow(
                step=step,
                infonce=float(l_info.data),
                recon=float(l_recon.data),
                recon_aug=float(l_recon_aug.data),
                total=float(loss.data),
                token_weight_mean=weight_sum / weight_n if weight_n else 1.0,
            )
            if cfg.eval_every > 0 and step % cfg.eval_every == 0:
                row.dev_spearman = maybe_eval()
            log_rows.append(row)
            if on_log is not None:
                on_log(row)

    if last_eval_step != step:
        rho = maybe_eval()
        if log_rows:
            log_rows[-1].dev_spearman = rho

    last = _snapshot(cfg, vocab, freq, table, params, opt, best_dev)
    if best is None:
        best = last
    return TrainResult(best=best, last=last, log_rows=log_rows, best_dev=best_dev)


def write_log(rows: Sequence[LogRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LogRow.CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv() + "\n")
