"""Turn dataset files into model-ready examples."""

from __future__ import annotations

import dataclasses
import os
from importlib import resources
from typing import Iterable, List, Optional, Sequence

from .config import RunConfig
from .embeddings import EmbeddingTable, Vocab, build_vocab, load_embeddings, random_embeddings
from .model import Model, PairExample, prepare_sentiment_tree
from .tensor import Rng
from .trees import (TreeError, index_by_sentence, project_labels, read_constituency, read_dependency,
                    read_pairs, read_span_labels)


def toy_path(name: str) -> str:
    """Path of a bundled toy dataset file (see ``demos/make_toy_data.py``)."""
    return str(resources.files("treelstm") / "data" / name)


TOY = {
    "sentiment": "toy_sentiment.txt",
    "sentiment-dep": "toy_sentiment.conll",
    "sentiment-spans": "toy_sentiment_spans.txt",
    "pairs": "toy_pairs.tsv",
    "parses": "toy_parses.conll",
    "corpus": "toy_corpus.txt",
}


def load_sentiment(config: RunConfig, path: str, labels_path: Optional[str] = None):
    """Labeled trees for the sentiment tasks.

    Dependency variants read CoNLL-style parses and take node labels from a
    span-label file; everything else reads labeled constituency trees. For the
    binary task neutral sentences are dropped and neutral nodes unlabeled.
    """
    if config.tree_kind == "dependency":
        if labels_path is None:
            raise TreeError("dependency sentiment data needs a span-label file")
        trees = read_dependency(path)
        spans = read_span_labels(labels_path)
        if len(spans) != len(trees):
            raise TreeError(f"{labels_path}: {len(spans)} label blocks for {len(trees)} sentences")
        trees = [project_labels(t, s)[0] for t, s in zip(trees, spans)]
    else:
        trees = read_constituency(path)
    out = []
    for t in trees:
        t = prepare_sentiment_tree(t, config.task)
        if t is not None and t.nodes[t.root].label is not None:
            out.append(t)
    return out


def load_relatedness(config: RunConfig, pairs_path: str, parses_path: Optional[str] = None) -> List[PairExample]:
    """Scored sentence pairs; tree variants look each sentence up in ``parses_path``."""
    pairs = read_pairs(pairs_path)
    if config.tree_kind is None:
        return [PairExample(p.sentence_a.split(), p.sentence_b.split(), p.score) for p in pairs]
    if parses_path is None:
        raise TreeError("tree variants need a parse file for the pair sentences")
    reader = read_dependency if config.tree_kind == "dependency" else read_constituency
    index = index_by_sentence(reader(parses_path))
    out = []
    for p in pairs:
        sides = []
        for sent in (p.sentence_a, p.sentence_b):
            tree = index.get(" ".join(sent.split()))
            if tree is None:
                raise TreeError(f"{parses_path}: no parse for sentence {sent!r} (pair {p.pair_id})")
            sides.append(tree)
        out.append(PairExample(sides[0], sides[1], p.score))
    return out


def example_tokens(examples: Iterable) -> Iterable[List[str]]:
    for ex in examples:
        if isinstance(ex, PairExample):
            yield list(_toks(ex.left))
            yield list(_toks(ex.right))
        else:
            yield list(_toks(ex))


def _toks(item):
    return item.tokens if hasattr(item, "tokens") else item


def make_embeddings(config: RunConfig, datasets: Sequence[Sequence], rng: Rng) -> EmbeddingTable:
    """Vocabulary over every dataset given, then pretrained or random vectors."""
    vocab = build_vocab(tok for ds in datasets for tok in example_tokens(ds))
    trainable = config.emb_lr > 0
    if config.embeddings:
        table, _ = load_embeddings(config.embeddings, vocab, rng, dim=config.e, trainable=trainable,
                                   scale=config.emb_init_scale)
        return table
    return random_embeddings(vocab, config.e, rng, config.emb_init_scale, trainable)


def load_split(config: RunConfig, path: str, labels_path: Optional[str] = None):
    if config.is_sentiment:
        return load_sentiment(config, path, labels_path)
    return load_relatedness(config, path, config.parses)


def default_paths(config: RunConfig) -> dict:
    """Bundled toy data for the configured task and variant."""
    if config.is_sentiment:
        if config.tree_kind == "dependency":
            return {"train": toy_path(TOY["sentiment-dep"]), "train_labels": toy_path(TOY["sentiment-spans"])}
        return {"train": toy_path(TOY["sentiment"])}
    if config.tree_kind == "constituency":
        return {"train": toy_path(TOY["pairs"])}  # no bundled constituency parses
    return {"train": toy_path(TOY["pairs"]), "parses": toy_path(TOY["parses"])}


def read_lines(path: str) -> List[str]:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def prepare_run(config: RunConfig):
    """Resolve data paths, load train/dev splits and build a fresh model.

    Unset ``train`` falls back to the bundled toy data, which then doubles as
    the dev set. Everything random derives from ``config.seed``: embedding
    rows are drawn first, then model parameters. Returns
    ``(config, model, train_split, dev_split)``.
    """
    if config.train is None:
        config = dataclasses.replace(config, **{k: v for k, v in default_paths(config).items()
                                                if getattr(config, k) is None})
    config = config.resolved()
    if config.is_sentiment:
        train_split = load_sentiment(config, config.train, config.train_labels)
        dev_split = load_sentiment(config, config.dev, config.dev_labels) if config.dev else train_split
    else:
        train_split = load_relatedness(config, config.train, config.parses)
        dev_split = load_relatedness(config, config.dev, config.parses) if config.dev else train_split
    rng = Rng(config.seed)
    emb = make_embeddings(config, [train_split, dev_split], rng)
    model = Model(config, emb, rng=rng)
    return config, model, train_split, dev_split
