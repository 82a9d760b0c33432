"""AdaGrad training: minibatch gradients, L2, dropout, early stopping, checkpoints."""

from __future__ import annotations

import logging
import math
import os
import struct
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig, VARIANTS
from .embeddings import EmbeddingTable
from .evaluation import CorrelationUndefined, accuracy, regression_metrics
from .model import Model, span_sequences
from .params import ParamSet
from .tensor import Rng, dropout_mask

log = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-10
MAGIC = b"TLSTM\x01"

# Composition-function sizes published alongside the memory dimensions used in
# the reference experiments: variant -> (relatedness d, |theta|, sentiment d, |theta|).
# They do not follow the single-bias convention used by count_params.
PUBLISHED_COUNTS = {
    "lstm": (150, 203_400, 168, 315_840),
    "bilstm": (150, 203_400, 168, 315_840),
    "lstm-2layer": (108, 203_472, 120, 318_720),
    "bilstm-2layer": (108, 203_472, 120, 318_720),
    "nary-const": (142, 205_190, 150, 316_800),
    "childsum-dep": (150, 203_400, 168, 315_840),
}


class NumericError(ArithmeticError):
    pass


class CheckpointError(ValueError):
    pass


# -- optimizer ---------------------------------------------------------------

def adagrad_step(params: ParamSet, lr: float, emb: Optional[EmbeddingTable] = None,
                 emb_lr: float = 0.0) -> None:
    """One AdaGrad update, then clear the gradient buffers.

    ``G += g**2; theta -= lr * g / (sqrt(G) + 1e-10)``. Embedding rows with a
    pending gradient get the same rule with ``emb_lr`` and their own
    accumulators.
    """
    for name, g in params.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter {name}")
    if emb is not None:
        for idx, g in emb.grad.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in embedding row {idx} ({emb.vocab.itos[idx]!r})")

    for name, g in params.grads.items():
        G = params.accum[name]
        G += g * g
        params.values[name] -= lr * g / (np.sqrt(G) + ADAGRAD_EPS)
    params.zero_grad()

    if emb is not None:
        if emb.trainable and emb_lr > 0:
            for idx in sorted(emb.grad):
                g = emb.grad[idx]
                G = emb.accum[idx]
                G += g * g
                emb.matrix[idx] -= emb_lr * g / (np.sqrt(G) + ADAGRAD_EPS)
        emb.zero_grad()


def minibatch_loss_grad(model: Model, batch: Sequence, config: RunConfig,
                        rng: Optional[Rng] = None, stats: Optional[Dict[str, int]] = None):
    """Mean loss over the batch's loss terms plus ``l2/2 * ||theta||^2``.

    Leaves the matching gradient in ``model.params.grads`` (and the embedding
    gradient buffer). Every labeled node of a sentiment tree is one loss term;
    a relatedness pair is one term. Examples with no labeled node are skipped.
    Returns ``(loss, grads)``.
    """
    if not batch:
        raise ValueError("empty minibatch")
    params = model.params
    params.zero_grad()
    model.emb.zero_grad()
    total, terms = 0.0, 0
    for ex in batch:
        loss, n = model.loss_grad(ex, rng)
        if n == 0:
            if stats is not None:
                stats["skipped"] = stats.get("skipped", 0) + 1
            log.warning("skipping example without labeled nodes")
            continue
        total += loss
        terms += n
    if terms:
        scale = 1.0 / terms
        for g in params.grads.values():
            g *= scale
        for g in model.emb.grad.values():
            g *= scale
        total *= scale
    lam = config.l2
    if lam:
        for name, v in params.values.items():
            params.grads[name] += lam * v
        total += 0.5 * lam * params.sq_norm()
    return total, params.grads


def dropout_apply(h: np.ndarray, rate: float, rng: Rng, mode: str = "train") -> np.ndarray:
    """Inverted dropout; identity in eval mode or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if mode == "eval" or rate == 0.0:
        return h
    return h * dropout_mask(h.shape[0], rate, rng)


def count_params(variant: str, d: int, e: int = 300, arity: int = 2, offdiag: bool = True) -> int:
    """Composition-function parameter count (gate W, U and one bias per gate).

    Embeddings and output layers are excluded; the bidirectional variants share
    one set of weights between directions. The N-ary cell counts its leaf
    input matrices, ``arity`` U blocks for each of i, o, u and ``arity**2``
    (or ``arity`` without off-diagonal blocks) for the forget gate.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    encoder, layers, _ = VARIANTS[variant]
    if encoder == "nary":
        f_blocks = arity * arity if offdiag else arity
        return 4 * d * e + (3 * arity + f_blocks) * d * d + 4 * d
    total = 4 * (d * e + d * d + d)
    for _ in range(layers - 1):
        total += 4 * (d * d + d * d + d)
    return total


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(arrays: Mapping[str, np.ndarray], path) -> None:
    """Write ``name -> array`` records (float64, little endian) after a versioned header."""
    if isinstance(arrays, ParamSet):
        arrays = arrays.values
    buf = bytearray(MAGIC)
    buf += struct.pack("<I", len(arrays))
    for name, a in arrays.items():
        raw = name.encode("utf-8")
        buf += struct.pack("<I", len(raw)) + raw
        buf += struct.pack("<I", a.ndim)
        buf += struct.pack(f"<{a.ndim}I", *a.shape)
        buf += np.ascontiguousarray(a, dtype="<f8").tobytes()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(bytes(buf))
    os.replace(tmp, path)


def load_checkpoint(path, expected: Optional[Mapping[str, tuple]] = None) -> Dict[str, np.ndarray]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    With ``expected`` (name -> shape), any missing, extra or reshaped record
    raises :class:`CheckpointError`. Nothing is returned unless the whole file
    parses.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:5] != MAGIC[:5]:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if data[5:6] != MAGIC[5:]:
        raise CheckpointError(f"{path}: unsupported checkpoint version {data[5:6]!r}")
    pos = len(MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"{path}: truncated checkpoint")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    out: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (n,) = struct.unpack("<I", take(4))
        name = take(n).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape)) if rank else 1
        out[name] = np.frombuffer(take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
    if pos != len(data):
        raise CheckpointError(f"{path}: trailing bytes after {count} records")
    if expected is not None:
        expected = dict(expected)
        missing = sorted(set(expected) - set(out))
        extra = sorted(set(out) - set(expected))
        if missing or extra:
            raise CheckpointError(f"{path}: parameter names differ (missing {missing}, unexpected {extra})")
        for name, shape in expected.items():
            if tuple(out[name].shape) != tuple(shape):
                raise CheckpointError(
                    f"{path}: shape mismatch for {name}: file has {out[name].shape}, config needs {tuple(shape)}")
    return out


EMBEDDING_RECORD = "embeddings"


def model_arrays(model: Model) -> Dict[str, np.ndarray]:
    arrays = dict(model.params.values)
    arrays[EMBEDDING_RECORD] = model.emb.matrix
    return arrays


def restore_model(model: Model, path) -> None:
    """Load a checkpoint into ``model`` after checking it matches the configuration."""
    expected = model.params.shapes()
    expected[EMBEDDING_RECORD] = model.emb.matrix.shape
    arrays = load_checkpoint(path, expected)
    model.emb.matrix[...] = arrays.pop(EMBEDDING_RECORD)
    model.params.load_values(arrays)


# -- evaluation inside the loop ---------------------------------------------

def dev_metric(model: Model, dev: Sequence) -> float:
    """Root accuracy (sentiment) or Pearson r (relatedness); NaN if undefined."""
    if not dev:
        return float("nan")
    if model.config.is_sentiment:
        preds, golds = [], []
        for tree in dev:
            preds.append(model.predict_label(tree))
            golds.append(tree.nodes[tree.root].label)
        return accuracy(preds, golds)
    preds = [model.predict_score(ex.left, ex.right) for ex in dev]
    try:
        return regression_metrics(preds, [ex.score for ex in dev])[0]
    except CorrelationUndefined:
        return float("nan")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float
    seconds: Optional[float]

    def row(self) -> str:
        secs = "NA" if self.seconds is None else f"{self.seconds:.3f}"
        return f"{self.epoch}\t{self.train_loss:.17g}\t{self.dev_metric:.17g}\t{secs}"


LOG_HEADER = "epoch\ttrain_loss\tdev_metric\tseconds"


@dataclass
class TrainResult:
    best_metric: float
    best_epoch: int
    history: List[EpochRecord] = field(default_factory=list)
    checkpoint: Optional[str] = None
    skipped: int = 0


def train(model: Model, train_set: Sequence, dev_set: Sequence, config: RunConfig,
          out_dir: Optional[str] = None) -> TrainResult:
    """Epoch loop with seeded shuffling and best-dev checkpointing.

    Stops after ``config.epochs`` epochs, once ``config.patience`` epochs in a
    row fail to improve the dev metric, or once the dev metric reaches
    ``config.target`` when that is set. The best parameters are restored
    into ``model`` before returning.
    """
    if not train_set:
        raise ValueError("empty training set")
    root = Rng(config.seed)
    shuffle_rng = root.spawn(1)
    dropout_rng = root.spawn(2)
    stats: Dict[str, int] = {}
    result = TrainResult(-math.inf, 0)
    best_arrays = {k: v.copy() for k, v in model_arrays(model).items()}
    ckpt = log_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        ckpt = os.path.join(out_dir, "model.ckpt")
        log_path = os.path.join(out_dir, "epochs.tsv")
        with open(log_path, "w", encoding="utf-8") as f:
            f.write(LOG_HEADER + "\n")
    since_best = 0
    n = len(train_set)
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for s in range(0, n, bs):
            batch = [train_set[i] for i in order[s:s + bs]]
            loss, _ = minibatch_loss_grad(model, batch, config, dropout_rng if config.dropout else None, stats)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite training loss in epoch {epoch}")
            adagrad_step(model.params, config.lr, model.emb, config.emb_lr)
            loss_sum += loss * len(batch)
        metric = dev_metric(model, dev_set)
        rec = EpochRecord(epoch, loss_sum / n, metric,
                          time.perf_counter() - start if config.log_time else None)
        result.history.append(rec)
        if log_path:
            with open(log_path, "a", encoding="utf-8") as f:
                f.write(rec.row() + "\n")
        log.info("epoch %d loss %.6f dev %.6f", epoch, rec.train_loss, metric)
        if metric > result.best_metric:
            result.best_metric, result.best_epoch = metric, epoch
            best_arrays = {k: v.copy() for k, v in model_arrays(model).items()}
            since_best = 0
            if ckpt:
                save_checkpoint(best_arrays, ckpt)
        else:
            since_best += 1
            if since_best >= config.patience:
                break
        if config.target is not None and metric >= config.target:
            break
    if ckpt and result.best_epoch == 0:
        save_checkpoint(best_arrays, ckpt)
    model.emb.matrix[...] = best_arrays.pop(EMBEDDING_RECORD)
    model.params.load_values(best_arrays)
    result.checkpoint = ckpt
    result.skipped = stats.get("skipped", 0)
    return result


def training_examples(config: RunConfig, data: Sequence) -> List:
    """Expand sentiment trees into per-span sequences for chain encoders."""
    if config.is_sentiment and config.encoder == "sequence":
        out: List = []
        for tree in data:
            out.extend(span_sequences(tree))
        return out
    return list(data)
