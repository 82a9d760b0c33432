"""Command-line entry point: ``treelstm {train,eval,gradcheck,count-params,nn}``.

Exit codes: 0 success, 1 configuration or usage error, 2 data, IO or
checkpoint error, 3 numeric failure (non-finite values, gradient check).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from . import gradcheck as gc
from .config import VARIANTS, ConfigError, RunConfig, from_text, parse_config_text
from .data import TOY, load_relatedness, load_sentiment, prepare_run, read_lines, toy_path
from .embeddings import EmbeddingFormatError, EmbeddingTable, Vocab
from .evaluation import (CorrelationUndefined, MetricReport, accuracy, binned_tsv, cosine, length_binned,
                         mean_vector_scorer, nearest_neighbors, pearson, regression_metrics)
from .model import Model
from .trees import TreeError, index_by_sentence, read_constituency, read_dependency
from .train import (CheckpointError, NumericError, count_params,
                    restore_model, train, training_examples)

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3
DATA_ERRORS = (OSError, TreeError, EmbeddingFormatError, CheckpointError, UnicodeDecodeError)

log = logging.getLogger("treelstm")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- helpers -----------------------------------------------------------------

def parse_seeds(text: str) -> List[int]:
    """``"3"``, ``"1,2,5"`` or ``"1..5"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def add_config_flags(p: argparse.ArgumentParser) -> None:
    """One ``--flag`` per config field; unset flags leave lower layers alone."""
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if "bool" in f.type:
            p.add_argument(flag, dest=f.name, default=None, action=argparse.BooleanOptionalAction,
                           help=f"(default {f.default})")
        else:
            default = "task-dependent" if f.name in ("emb_lr", "dropout") else f.default
            p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper(), help=f"(default {default})")


def build_config(args) -> RunConfig:
    """Defaults < ``--config`` file < command-line flags."""
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            values.update(parse_config_text(f.read()))
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is None:
            continue
        values[f.name] = v if isinstance(v, bool) else parse_config_text(f"{f.name} = {v}")[f.name]
    return RunConfig(**values)


def load_run(run_dir: str, parses: Optional[str] = None) -> Model:
    """Rebuild a trained model from a run directory written by ``train``."""
    with open(os.path.join(run_dir, "config.txt"), encoding="utf-8") as f:
        config = from_text(f.read()).resolved()
    if parses:
        config = dataclasses.replace(config, parses=parses)
    vocab = Vocab.load(os.path.join(run_dir, "vocab.txt"))
    emb = EmbeddingTable(vocab, np.zeros((len(vocab), config.e)), trainable=False)
    model = Model(config, emb)
    restore_model(model, os.path.join(run_dir, "model.ckpt"))
    return model


def run_dirs(base: str, seeds: Optional[List[int]]) -> List[str]:
    return [base] if seeds is None else [os.path.join(base, f"seed{s}") for s in seeds]


def _predict_chunk(payload):
    model, items, is_sentiment = payload
    if is_sentiment:
        return [model.predict_label(t) for t in items]
    return [model.predict_score(ex.left, ex.right) for ex in items]


def predict(model: Model, items: Sequence, workers: int = 1) -> list:
    """Predictions in input order; ``workers > 1`` splits the work across processes."""
    sent = model.config.is_sentiment
    if workers <= 1 or len(items) < 2:
        return _predict_chunk((model, items, sent))
    chunks = [list(items[k::workers]) for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_predict_chunk, [(model, c, sent) for c in chunks]))
    out = [None] * len(items)
    for k, part in enumerate(parts):
        out[k::workers] = part
    return out


def item_length(item) -> float:
    if hasattr(item, "left"):
        return 0.5 * (_n_tokens(item.left) + _n_tokens(item.right))
    return _n_tokens(item)


def _n_tokens(item) -> int:
    return item.n_tokens if hasattr(item, "n_tokens") else len(item)


# -- subcommands -----------------------------------------------------------

def cmd_train(args) -> int:
    base = build_config(args)
    seeds = args.seeds or [base.seed]
    for seed in seeds:
        cfg, model, train_split, dev_split = prepare_run(dataclasses.replace(base, seed=seed))
        out = cfg.out or os.path.join("runs", f"{cfg.variant}-{cfg.task}")
        if args.seeds:
            out = os.path.join(out, f"seed{seed}")
        cfg = dataclasses.replace(cfg, out=out)
        sys.stderr.write(cfg.to_text())
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as f:
            f.write(cfg.to_text())
        model.emb.vocab.save(os.path.join(out, "vocab.txt"))
        result = train(model, training_examples(cfg, train_split), dev_split, cfg, out)
        print(f"seed\t{seed}\tbest_epoch\t{result.best_epoch}\tdev_metric\t{result.best_metric:.6f}\t"
              f"checkpoint\t{result.checkpoint}")
        if result.skipped:
            log.warning("skipped %d examples without labeled nodes", result.skipped)
    return 0


def evaluate(model: Model, test_path: Optional[str], test_labels: Optional[str], workers: int = 1):
    """``(MetricReport, items, predictions, golds)`` on a test split (default: the training data)."""
    cfg = model.config
    path = test_path or cfg.train
    if cfg.is_sentiment:
        items = load_sentiment(cfg, path, test_labels or (None if test_path else cfg.train_labels))
        golds = [t.nodes[t.root].label for t in items]
        preds = predict(model, items, workers)
        metrics = {"accuracy": accuracy(preds, golds)}
    else:
        items = load_relatedness(cfg, path, cfg.parses)
        golds = [ex.score for ex in items]
        preds = predict(model, items, workers)
        try:
            r, rho, err = regression_metrics(preds, golds)
        except CorrelationUndefined as exc:
            r, rho, err = math.nan, math.nan, exc.mse
        metrics = {"pearson": r, "spearman": rho, "mse": err}
    return MetricReport(cfg.task, metrics, preds, cfg.seed), items, preds, golds


def cmd_eval(args) -> int:
    reports = []
    for d in run_dirs(args.checkpoint, args.seeds):
        model = load_run(d, args.parses)
        report, items, preds, golds = evaluate(model, args.test, args.test_labels, args.workers)
        reports.append(report)
        if args.lengths:
            metric = accuracy if model.config.is_sentiment else pearson
            series = length_binned([item_length(x) for x in items], preds, golds, metric)
            target = args.lengths if len(reports) == 1 and not args.seeds else f"{args.lengths}.seed{report.seed}"
            with open(target, "w", encoding="utf-8") as f:
                f.write(binned_tsv(series))
    if len(reports) == 1:
        sys.stdout.write(reports[0].to_tsv())
        return 0
    print("metric\tmean\tstd\tn")
    for key in reports[0].metrics:
        vals = np.array([r.metrics[key] for r in reports])
        print(f"{key}\t{vals.mean():.6f}\t{vals.std(ddof=1):.6f}\t{len(vals)}")
    return 0


def cmd_gradcheck(args) -> int:
    variants = list(VARIANTS) if args.variant == "all" else [args.variant]
    heads = list(gc.HEADS) if args.head == "all" else [args.head]
    failed = []
    print("variant\thead\tseed\tgroup\trel_error")
    for v in variants:
        for h in heads:
            for seed in args.seeds or [args.seed]:
                rep = gc.gradcheck(v, h, d=args.d, e=args.e, seed=seed, corrupt=args.corrupt)
                for group, err in rep.errors.items():
                    print(f"{v}\t{h}\t{seed}\t{group}\t{err:.3e}")
                failed += [f"{v}/{h}/seed{seed}: {g} ({rep.errors[g]:.3e})" for g in rep.failures(args.tol)]
    if failed:
        sys.stderr.write("gradient check failed for " + "; ".join(failed) + "\n")
        return EXIT_NUMERIC
    return 0


def cmd_count_params(args) -> int:
    print(count_params(args.variant, args.d, args.e, args.arity, args.offdiag))
    return 0


def _nn_items(sentences: List[str], model: Optional[Model], parses: Optional[str]):
    if model is None or model.config.tree_kind is None:
        return [s.split() for s in sentences]
    path = parses or model.config.parses
    if path is None:
        raise TreeError("tree models need --parses covering the corpus and query")
    reader = read_dependency if model.config.tree_kind == "dependency" else read_constituency
    index = index_by_sentence(reader(path))
    out = []
    for s in sentences:
        tree = index.get(" ".join(s.split()))
        if tree is None:
            raise TreeError(f"{path}: no parse for sentence {s!r}")
        out.append(tree)
    return out


def cmd_nn(args) -> int:
    corpus = read_lines(args.corpus or toy_path(TOY["corpus"]))
    if args.baseline == "mean":
        if args.checkpoint:
            model = load_run(args.checkpoint)
            emb = model.emb
        elif args.embeddings:
            from .embeddings import build_vocab, load_embeddings
            from .tensor import Rng
            vocab = build_vocab(s.split() for s in corpus + [args.query])
            emb, _ = load_embeddings(args.embeddings, vocab, Rng(args.seed))
        else:
            raise UsageError("--baseline mean needs --checkpoint or --embeddings")
        score = mean_vector_scorer(emb)
        model = None
    else:
        if not args.checkpoint:
            raise UsageError("nn needs --checkpoint (or --baseline mean)")
        model = load_run(args.checkpoint)
        if model.config.is_sentiment:
            score = lambda a, b: cosine(model.encode(a).rep, model.encode(b).rep)  # noqa: E731
        else:
            score = lambda a, b: model.predict_score(a, b)  # noqa: E731
    items = _nn_items(corpus + [args.query], model, args.parses)
    by_id = {id(it): s for it, s in zip(items, corpus)}
    for item, value in nearest_neighbors(items[:-1], items[-1], args.k, score):
        print(f"{value:.6f}\t{by_id[id(item)]}")
    return 0


# -- parser --------------------------------------------------------------

def build_parser() -> Parser:
    p = Parser(prog="treelstm", description="Tree-LSTM and LSTM sentence models.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    t = sub.add_parser("train", help="train a model and write a run directory")
    t.add_argument("--config", help="flat 'key = value' config file")
    t.add_argument("--seeds", type=parse_seeds, help="train once per seed, e.g. 1..5; runs go to OUT/seedN")
    add_config_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a trained run on a test split")
    e.add_argument("--checkpoint", required=True, help="run directory written by train")
    e.add_argument("--seeds", type=parse_seeds, help="evaluate CHECKPOINT/seedN for each seed; print mean and std")
    e.add_argument("--test", help="test file (default: the run's training file)")
    e.add_argument("--test-labels", help="span-label file for dependency sentiment test data")
    e.add_argument("--parses", help="parse file for relatedness tree models")
    e.add_argument("--lengths", metavar="PATH", help="also write length-binned metric TSV to PATH")
    e.add_argument("--workers", type=int, default=1, help="evaluation processes (default 1)")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    g.add_argument("--variant", default="all", choices=["all", *VARIANTS])
    g.add_argument("--head", default="all", choices=["all", *gc.HEADS])
    g.add_argument("--d", type=int, default=8)
    g.add_argument("--e", type=int, default=12)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--seeds", type=parse_seeds, help="several seeds, e.g. 1..3")
    g.add_argument("--tol", type=float, default=gc.TOLERANCE)
    g.add_argument("--corrupt", metavar="GROUP", help="perturb one analytic gradient group (harness self-test)")
    g.set_defaults(func=cmd_gradcheck)

    c = sub.add_parser("count-params", help="print the composition-function parameter count")
    c.add_argument("--variant", required=True, choices=list(VARIANTS))
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--e", type=int, default=300)
    c.add_argument("--arity", type=int, default=2)
    c.add_argument("--offdiag", default=True, action=argparse.BooleanOptionalAction)
    c.set_defaults(func=cmd_count_params)

    n = sub.add_parser("nn", help="nearest-neighbor sentences for a query")
    n.add_argument("--query", required=True)
    n.add_argument("--corpus", help="one sentence per line (default: bundled toy corpus)")
    n.add_argument("--checkpoint", help="run directory written by train")
    n.add_argument("--baseline", choices=["mean"], help="rank by cosine of mean word vectors")
    n.add_argument("--embeddings", help="word vector file for --baseline mean without a checkpoint")
    n.add_argument("--parses", help="parses for corpus and query (tree models)")
    n.add_argument("--k", type=int, default=5)
    n.add_argument("--seed", type=int, default=1, help="seed for vectors of words missing from --embeddings")
    n.set_defaults(func=cmd_nn)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        sys.stderr.write(f"treelstm: config error: {exc}\n")
        return EXIT_CONFIG
    except DATA_ERRORS as exc:
        sys.stderr.write(f"treelstm: data error: {exc}\n")
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        sys.stderr.write(f"treelstm: numeric error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
