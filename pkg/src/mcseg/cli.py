"""Command-line interface.

One executable with subcommands covering the full workflow: corpus
preprocessing, multi-corpus training, evaluation, raw-text segmentation,
few-shot criterion transfer, and embedding inspection. Runs are described
by a JSON config file; results go to stdout as TSV (or to --out), progress
and diagnostics go to stderr. Failures print a single ``error: ...`` line
on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

from .analysis import criterion_map, nearest_bigrams
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (RawCorpus, build_vocab, corpus_stats, load_corpus,
                     preprocess_corpus, save_corpus, split_train_dev,
                     training_word_set)
from .metrics import format_report
from .model import ModelConfig
from .trainer import TrainConfig, evaluate_corpus, segment, train, transfer

log = logging.getLogger(__name__)


class CliError(Exception):
    """User-facing failure; rendered as one 'error:' line, exit code 2."""


def _dataclass_from(section: dict, cls, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(section) - known)
    if unknown:
        raise CliError(f"{where}: unknown keys {unknown}; known keys are "
                       f"{sorted(known)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise CliError(f"{where}: {exc}") from exc


def load_config(path: str) -> dict:
    if not path:
        raise CliError("this command needs --config")
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from None

    problems = []
    corpora = cfg.get("corpora")
    if not isinstance(corpora, list) or not corpora:
        problems.append("'corpora' must be a non-empty list")
    else:
        for i, entry in enumerate(corpora):
            for key in ("name", "criterion", "train"):
                if not isinstance(entry.get(key), str) or not entry.get(key):
                    problems.append(f"corpora[{i}] needs a string '{key}'")
    for section in ("model", "training"):
        if section in cfg and not isinstance(cfg[section], dict):
            problems.append(f"'{section}' must be an object")
    if problems:
        raise CliError(f"config {path}: " + "; ".join(problems))
    return cfg


def model_config_from(cfg: dict, args) -> ModelConfig:
    section = dict(cfg.get("model", {}))
    if getattr(args, "decoder", None):
        section["decoder"] = args.decoder
    if getattr(args, "no_bigram", False):
        section["use_bigrams"] = False
    return _dataclass_from(section, ModelConfig, "config section 'model'")


def train_config_from(cfg: dict, args) -> TrainConfig:
    section = dict(cfg.get("training", {}))
    if getattr(args, "seed", None) is not None:
        section["seed"] = args.seed
    if getattr(args, "embeddings", None):
        section["pretrained_unigrams"] = args.embeddings
    return _dataclass_from(section, TrainConfig, "config section 'training'")


def corpora_from(cfg: dict, which: str, criterion: str | None = None,
                 require: bool = True) -> list[RawCorpus]:
    out = []
    for entry in cfg["corpora"]:
        if criterion and entry["criterion"] != criterion:
            continue
        path = entry.get(which)
        if not path:
            if require:
                raise CliError(f"corpus '{entry['name']}' has no '{which}' file")
            continue
        if not os.path.exists(path):
            raise CliError(f"corpus file not found: {path}")
        out.append(load_corpus(path, entry["name"], entry["criterion"]))
    if not out:
        detail = f" for criterion '{criterion}'" if criterion else ""
        raise CliError(f"no corpora with a '{which}' file{detail} in config")
    return out


def workdir_from(cfg: dict, args) -> str:
    path = getattr(args, "out", None) or cfg.get("workdir") or "out"
    os.makedirs(path, exist_ok=True)
    return path


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# subcommands ----------------------------------------------------------------


def cmd_preprocess(args) -> int:
    cfg = load_config(args.config)
    tc = train_config_from(cfg, args)
    outdir = workdir_from(cfg, args)

    lines = ["split\tcorpus\tsentences\tpath"]
    stats_rows = []
    train_splits = []
    for raw in corpora_from(cfg, "train"):
        prepped = preprocess_corpus(raw, clause_split=True)
        tr, dv = split_train_dev(prepped, tc.dev_ratio, tc.seed)
        train_splits.append(tr)
        words = training_word_set([tr])
        for split, corpus in (("train", tr), ("dev", dv)):
            path = os.path.join(outdir, f"{corpus.name}.{split}.txt")
            save_corpus(corpus, path)
            lines.append(f"{split}\t{corpus.name}\t{len(corpus)}\t{path}")
            stats_rows.append((corpus.name, split, len(corpus),
                               corpus_stats(corpus,
                                            None if split == "train" else words)))
    for raw in corpora_from(cfg, "test", require=False):
        prepped = preprocess_corpus(raw, clause_split=False)
        path = os.path.join(outdir, f"{prepped.name}.test.txt")
        save_corpus(prepped, path)
        lines.append(f"test\t{prepped.name}\t{len(prepped)}\t{path}")
        words = training_word_set(
            [tr for tr in train_splits if tr.name == prepped.name] or train_splits)
        stats_rows.append((prepped.name, "test", len(prepped),
                           corpus_stats(prepped, words)))

    vocab = build_vocab(train_splits, tc.min_count_unigram, tc.min_count_bigram)
    vocab.export_tsv(outdir)
    for kind in ("unigrams", "bigrams", "criteria"):
        lines.append(f"vocab\t{kind}\t{getattr(vocab, 'n_' + kind)}\t"
                     f"{os.path.join(outdir, f'vocab.{kind}.tsv')}")

    stats_path = os.path.join(outdir, "stats.tsv")
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write("corpus\tsplit\tsentences\twords\tchars\tword_types"
                 "\tchar_types\toov_rate\n")
        for name, split, n_sent, st in stats_rows:
            oov = f"{st['oov_rate']:.4f}" if "oov_rate" in st else ""
            fh.write(f"{name}\t{split}\t{n_sent}\t{st['words']}\t{st['chars']}"
                     f"\t{st['word_types']}\t{st['char_types']}\t{oov}\n")
    lines.append(f"stats\tall\t{len(stats_rows)}\t{stats_path}")
    emit("\n".join(lines) + "\n", None)
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    mc = model_config_from(cfg, args)
    tc = train_config_from(cfg, args)
    corpora = corpora_from(cfg, "train")

    result = train(corpora, mc, tc)
    ckpt = args.checkpoint or os.path.join(workdir_from(cfg, args), "model.mseg")
    os.makedirs(os.path.dirname(ckpt) or ".", exist_ok=True)
    save_checkpoint(ckpt, result.segmenter, extra={
        "train_config": tc.to_dict(),
        "best_epoch": result.best_epoch,
        "best_macro_dev_f1": result.best_macro_f1,
    })
    log.info("checkpoint written to %s", ckpt)

    best = result.history[result.best_epoch - 1] if result.history else {}
    lines = ["corpus\tbest_dev_f1"]
    for name, score in best.get("dev_f1", {}).items():
        lines.append(f"{name}\t{100.0 * score:.2f}")
    lines.append(f"macro\t{100.0 * result.best_macro_f1:.2f}")
    emit("\n".join(lines) + "\n", None)
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    segmenter, _ = load_checkpoint(args.checkpoint)
    rows = []
    for raw in corpora_from(cfg, "test", criterion=args.criterion):
        train_corpus = load_corpus(
            next(e["train"] for e in cfg["corpora"] if e["name"] == raw.name),
            raw.name, raw.criterion)
        words = training_word_set(
            [preprocess_corpus(train_corpus, clause_split=True)])
        scores = evaluate_corpus(segmenter, raw, training_words=words)
        rows.append((raw.name, scores))
    emit(format_report(rows), args.out)
    return 0


def cmd_segment(args) -> int:
    segmenter, _ = load_checkpoint(args.checkpoint)
    if not args.criterion:
        raise CliError("segment needs --criterion")
    if args.input == "-":
        source = sys.stdin
    else:
        if not os.path.exists(args.input):
            raise CliError(f"input file not found: {args.input}")
        source = open(args.input, encoding="utf-8")
    try:
        out_lines = []
        for line in source:
            words = segment(segmenter, line.rstrip("\n"), args.criterion)
            out_lines.append(" ".join(words))
        emit("\n".join(out_lines) + "\n", args.out)
    finally:
        if source is not sys.stdin:
            source.close()
    return 0


def cmd_transfer(args) -> int:
    cfg = load_config(args.config)
    tc = train_config_from(cfg, args)
    if not args.criterion:
        raise CliError("transfer needs --criterion naming a config corpus")
    base, _ = load_checkpoint(args.checkpoint)
    corpus = corpora_from(cfg, "train", criterion=args.criterion)[0]
    if args.shots is not None:
        if args.shots < 2:
            raise CliError("--shots must be at least 2 (train and dev)")
        corpus = RawCorpus(corpus.name, corpus.criterion,
                           corpus.sentences[: args.shots])

    result = transfer(base, corpus, tc)
    ckpt = args.out or os.path.join(workdir_from(cfg, argparse.Namespace(out=None)),
                                    f"model+{corpus.criterion}.mseg")
    os.makedirs(os.path.dirname(ckpt) or ".", exist_ok=True)
    save_checkpoint(ckpt, result.segmenter, extra={
        "train_config": tc.to_dict(),
        "transferred_criterion": corpus.criterion,
        "shots": len(corpus),
        "best_epoch": result.best_epoch,
        "best_macro_dev_f1": result.best_macro_f1,
    })
    log.info("checkpoint written to %s", ckpt)
    emit(f"criterion\tdev_f1\n{corpus.criterion}\t"
         f"{100.0 * result.best_macro_f1:.2f}\n", None)
    return 0


def cmd_analyze_criteria(args) -> int:
    segmenter, _ = load_checkpoint(args.checkpoint)
    lines = ["criterion\tx\ty"]
    for name, x, y in criterion_map(segmenter):
        lines.append(f"{name}\t{x:.6f}\t{y:.6f}")
    emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_nearest_bigrams(args) -> int:
    segmenter, _ = load_checkpoint(args.checkpoint)
    hits = nearest_bigrams(segmenter, args.bigram, args.k)
    lines = ["bigram\tcosine"]
    for symbol, sim in hits:
        lines.append(f"{symbol}\t{sim:.6f}")
    emit("\n".join(lines) + "\n", args.out)
    return 0


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcseg",
        description="Multi-criteria Chinese word segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=False, checkpoint=False, out=True):
        if config:
            p.add_argument("--config", help="JSON run configuration")
        if checkpoint:
            p.add_argument("--checkpoint", required=True,
                           help="model checkpoint path")
        if out:
            p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("preprocess",
                       help="normalize corpora, split train/dev, build vocab")
    common(p, config=True)
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one model over all corpora")
    common(p, config=True, out=False)
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--checkpoint", help="where to write the trained model")
    p.add_argument("--decoder", choices=["crf", "mlp"],
                   help="override the configured decoder")
    p.add_argument("--no-bigram", action="store_true",
                   help="train without bigram features")
    p.add_argument("--embeddings", help="pretrained unigram embedding file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score test corpora with a checkpoint")
    common(p, config=True, checkpoint=True)
    p.add_argument("--criterion", help="only evaluate this criterion")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("segment", help="segment raw text, one line at a time")
    common(p, checkpoint=True)
    p.add_argument("--criterion", required=True,
                   help="criterion to segment under")
    p.add_argument("input", nargs="?", default="-",
                   help="text file, or - for stdin")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("transfer",
                       help="adapt a checkpoint to one new criterion")
    common(p, config=True, checkpoint=True, out=False)
    p.add_argument("--out", help="where to write the adapted checkpoint")
    p.add_argument("--criterion", required=True,
                   help="config corpus to transfer to")
    p.add_argument("--shots", type=int,
                   help="use only the first N sentences")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("analyze-criteria",
                       help="2-D layout of the criterion embeddings")
    common(p, checkpoint=True)
    p.set_defaults(func=cmd_analyze_criteria)

    p = sub.add_parser("nearest-bigrams",
                       help="closest bigrams in the learned table")
    common(p, checkpoint=True)
    p.add_argument("bigram", help="query bigram, e.g. 天气")
    p.add_argument("--k", type=int, default=10, help="neighbors to list")
    p.set_defaults(func=cmd_nearest_bigrams)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
