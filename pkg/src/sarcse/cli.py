"""Command-line surface: vocabulary building, training, evaluation,
embedding export, and the ablation / theta-sweep harnesses.

Exit codes: 0 success, 2 usage or configuration errors, 3 I/O and data-format
errors, 4 numeric failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import checkpoint as ckpt_io
from . import corpus as corpus_io
from .evaluation import (
    encode_tokens,
    evaluate_pairs,
    token_report,
    write_density_csv,
    write_metrics_csv,
    write_summary,
)
from .losses import LossConfig
from .trainer import ABLATIONS, TrainConfig, train, write_log

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

DEFAULTS: dict = {
    **TrainConfig().to_flat(),
    "min_count": 1,
    "pos_threshold": 4.0,
}


class ConfigError(ValueError):
    """Bad configuration key, value, or file."""


def _parse_value(key: str, raw: str):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}") from exc
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected a number, got {raw!r}") from exc
    return raw


def read_config_file(path: str | Path) -> dict[str, str]:
    """`key = value` lines with `#` comments."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip()
    return raw


def resolve_config(
    config_path: Optional[str],
    overrides: Sequence[str],
    seed: Optional[int],
) -> dict:
    """Merge defaults, an optional config file, and --set overrides."""
    cfg = dict(DEFAULTS)

    def apply(key: str, raw: str, source: str):
        if key not in DEFAULTS:
            known = ", ".join(sorted(DEFAULTS))
            raise ConfigError(f"{source}: unknown config key {key!r} (known keys: {known})")
        cfg[key] = _parse_value(key, raw)

    if config_path:
        for key, raw in read_config_file(config_path).items():
            apply(key, raw, str(config_path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        apply(key.strip(), raw.strip(), "--set")
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_resolved_config(cfg: dict, out_dir: Path) -> None:
    with open(out_dir / "config.txt", "w", encoding="utf-8") as fh:
        for key in sorted(cfg):
            fh.write(f"{key} = {_format_value(cfg[key])}\n")


def write_input_checksums(paths: Sequence[str | Path], out_dir: Path) -> None:
    with open(out_dir / "inputs.sha256", "w", encoding="utf-8") as fh:
        for p in paths:
            fh.write(f"{corpus_io.file_sha256(p)}  {Path(p).name}\n")


def _prepare_out(cfg: dict, out: str, inputs: Sequence[str | Path]) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)
    write_input_checksums(inputs, out_dir)
    return out_dir


def _build_vocab_and_freq(corpus_path: str, cfg: dict):
    vocab = corpus_io.build_vocab(corpus_path, min_count=int(cfg["min_count"]))
    freq = corpus_io.token_frequency(corpus_path, vocab)
    return vocab, freq


# -- subcommands --------------------------------------------------------------


def cmd_build_vocab(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    out_dir = _prepare_out(cfg, args.out, [args.corpus])
    vocab, freq = _build_vocab_and_freq(args.corpus, cfg)
    corpus_io.save_vocab(vocab, out_dir / "vocab.txt")
    corpus_io.save_frequency(freq, vocab, out_dir / "freq.tsv")
    (out_dir / "corpus.sha256").write_text(
        f"{vocab.corpus_sha256}  {Path(args.corpus).name}\n", encoding="utf-8"
    )
    print(f"vocabulary: {len(vocab)} ids ({len(vocab.tokens)} tokens + reserved) -> {out_dir}")
    return EXIT_OK


def _train_once(cfg: dict, corpus_path: str, dev_path: str):
    vocab, freq = _build_vocab_and_freq(corpus_path, cfg)
    sentences = corpus_io.load_corpus(corpus_path)
    dev_pairs = corpus_io.load_sts_pairs(dev_path)
    tc = TrainConfig.from_flat({k: v for k, v in cfg.items() if k not in ("min_count", "pos_threshold")})
    result = train(tc, sentences, dev_pairs, vocab, freq)
    return result


def _write_train_outputs(result, out_dir: Path) -> None:
    ckpt_io.save_checkpoint(result.best, out_dir / "best.ckpt")
    ckpt_io.save_checkpoint(result.last, out_dir / "last.ckpt")
    write_log(result.log_rows, out_dir / "train_log.csv")


def cmd_train(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    out_dir = _prepare_out(cfg, args.out, [args.corpus, args.dev])
    result = _train_once(cfg, args.corpus, args.dev)
    _write_train_outputs(result, out_dir)
    dev = "undefined" if result.best_dev is None else f"{result.best_dev:.4f}"
    print(f"trained {result.last.step} steps; best dev spearman {dev} -> {out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    out_dir = _prepare_out(cfg, args.out, [args.checkpoint, args.pairs])
    ckpt = ckpt_io.load_checkpoint(args.checkpoint)
    table, params = ckpt_io.unpack_model(ckpt)
    pairs = corpus_io.load_sts_pairs(args.pairs)
    report = evaluate_pairs(pairs, ckpt.vocab, table, params, pos_threshold=float(cfg["pos_threshold"]))
    write_metrics_csv(report, out_dir / "metrics.csv")
    write_density_csv(report, out_dir / "density.csv")
    write_summary(report, out_dir / "summary.txt")
    if args.token_report:
        loss_cfg = LossConfig(theta=float(ckpt.config["theta"]), lam=float(ckpt.config["lam"]))
        rows = token_report(pairs, ckpt.vocab, table, params, loss_cfg, ckpt.freq)
        with open(out_dir / "token_report.csv", "w", encoding="utf-8") as fh:
            fh.write("pair,side,position,token,recon_mse,weight\n")
            for pi, side, pos, tok, mse, w in rows:
                fh.write(f"{pi},{side},{pos},{tok},{mse!r},{w!r}\n")
    rho = "undefined" if report.spearman_rho is None else f"{report.spearman_rho:.4f}"
    print(f"evaluated {report.pair_count} pairs; spearman {rho} -> {out_dir}")
    return EXIT_OK


def cmd_embed(args) -> int:
    resolve_config(args.config, args.set, args.seed)
    ckpt = ckpt_io.load_checkpoint(args.checkpoint)
    table, params = ckpt_io.unpack_model(ckpt)
    with open(args.sentences, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    token_lists = []
    for lineno, line in enumerate(lines, start=1):
        toks = corpus_io.tokenize(line)
        if not toks:
            raise ValueError(f"{args.sentences}:{lineno}: empty sentence")
        token_lists.append(toks)
    embs = encode_tokens(token_lists, ckpt.vocab, table, params)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in embs:
            fh.write("\t".join(repr(float(v)) for v in row) + "\n")
    print(f"embedded {len(token_lists)} sentences -> {out_path}")
    return EXIT_OK


def _test_spearman(result, test_path: str) -> tuple[Optional[float], Optional[float]]:
    """(dev-best, test) Spearman of a finished run's best checkpoint."""
    table, params = ckpt_io.unpack_model(result.best)
    pairs = corpus_io.load_sts_pairs(test_path)
    report = evaluate_pairs(pairs, result.best.vocab, table, params)
    return result.best_dev, report.spearman_rho


def _fmt_rho(value: Optional[float]) -> str:
    return "undefined" if value is None else repr(value)


def cmd_ablate(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    out_dir = _prepare_out(cfg, args.out, [args.corpus, args.dev, args.test])
    rows = []
    for mode in ABLATIONS:
        run_cfg = dict(cfg)
        run_cfg["ablation"] = mode
        result = _train_once(run_cfg, args.corpus, args.dev)
        sub = out_dir / mode
        sub.mkdir(exist_ok=True)
        _write_train_outputs(result, sub)
        dev, test = _test_spearman(result, args.test)
        rows.append((mode, dev, test))
    with open(out_dir / "ablation.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg['seed']}\n")
        fh.write("ablation,dev_spearman,test_spearman\n")
        for mode, dev, test in rows:
            fh.write(f"{mode},{_fmt_rho(dev)},{_fmt_rho(test)}\n")
    print(f"ablation table ({len(rows)} rows) -> {out_dir / 'ablation.csv'}")
    return EXIT_OK


def cmd_sweep_theta(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    out_dir = _prepare_out(cfg, args.out, [args.corpus, args.dev, args.test])
    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"--values: expected comma-separated numbers, got {args.values!r}") from exc
    if not values:
        raise ConfigError("--values: no theta values given")
    rows = []
    for theta in values:
        run_cfg = dict(cfg)
        run_cfg["theta"] = theta
        result = _train_once(run_cfg, args.corpus, args.dev)
        sub = out_dir / f"theta_{theta:g}"
        sub.mkdir(exist_ok=True)
        _write_train_outputs(result, sub)
        dev, test = _test_spearman(result, args.test)
        rows.append((theta, dev, test))
    with open(out_dir / "theta_sweep.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg['seed']}\n")
        fh.write("theta,dev_spearman,test_spearman\n")
        for theta, dev, test in rows:
            fh.write(f"{theta:g},{_fmt_rho(dev)},{_fmt_rho(test)}\n")
    print(f"theta sweep ({len(rows)} rows) -> {out_dir / 'theta_sweep.csv'}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(sub_parser: argparse.ArgumentParser) -> None:
    sub_parser.add_argument("--config", default=None, help="config file of 'key = value' lines")
    sub_parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                            help="override one config key (repeatable)")
    sub_parser.add_argument("--seed", type=int, default=None, help="override the seed config key")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sarcse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build vocabulary and token-frequency files")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_build_vocab)

    p = sub.add_parser("train", help="train a model and keep the best dev checkpoint")
    p.add_argument("corpus")
    p.add_argument("dev")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on scored pairs")
    p.add_argument("checkpoint")
    p.add_argument("pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--token-report", action="store_true",
                   help="also write per-token reconstruction losses")
    _add_common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("embed", help="write one embedding line per input sentence")
    p.add_argument("checkpoint")
    p.add_argument("sentences")
    p.add_argument("--out", required=True, help="output file")
    _add_common(p)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("ablate", help="train full / no_sal / no_sal_no_decoder under a shared seed")
    p.add_argument("corpus")
    p.add_argument("dev")
    p.add_argument("test")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("sweep-theta", help="train once per theta value under a shared seed")
    p.add_argument("corpus")
    p.add_argument("dev")
    p.add_argument("test")
    p.add_argument("--values", default="0,0.1,0.2,0.3,0.4,0.5,0.6",
                   help="comma-separated theta values")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_sweep_theta)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"sarcse: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(f"sarcse: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, ckpt_io.CheckpointError) as exc:
        print(f"sarcse: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
