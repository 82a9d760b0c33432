"""Metrics, length-binned curves and nearest-neighbour sentence retrieval."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata


class CorrelationUndefined(ValueError):
    """A correlation was requested for a constant vector."""


def accuracy(preds: Sequence[int], golds: Sequence[int]) -> float:
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions for {len(golds)} gold labels")
    if not preds:
        raise ValueError("accuracy of an empty set")
    return sum(int(p == g) for p, g in zip(preds, golds)) / len(preds)


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("pearson needs two vectors of equal length")
    if a.size < 2:
        raise ValueError("pearson needs at least two points")
    da, db = a - a.mean(), b - b.mean()
    na, nb = math.sqrt(np.dot(da, da)), math.sqrt(np.dot(db, db))
    if na == 0.0 or nb == 0.0:
        raise CorrelationUndefined("correlation is undefined for a constant vector")
    return float(np.clip(np.dot(da, db) / (na * nb), -1.0, 1.0))


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Pearson correlation of average ranks (ties share their mean rank)."""
    return pearson(rankdata(a, method="average"), rankdata(b, method="average"))


def mse(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("mse needs two vectors of equal length")
    return float(np.mean((a - b) ** 2))


def regression_metrics(pred: Sequence[float], gold: Sequence[float]) -> Tuple[float, float, float]:
    """``(pearson r, spearman rho, mse)``.

    Raises :class:`CorrelationUndefined` for a constant input; the exception
    carries the MSE as ``.mse``.
    """
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predictions for {len(gold)} gold scores")
    if len(pred) < 2:
        raise ValueError("need at least two examples")
    err = mse(pred, gold)
    try:
        return pearson(pred, gold), spearman(pred, gold), err
    except CorrelationUndefined as exc:
        exc.mse = err
        raise


@dataclass
class MetricReport:
    task: str
    metrics: Dict[str, float]
    predictions: List = field(default_factory=list)
    seed: Optional[int] = None

    def to_tsv(self) -> str:
        return "".join(f"{k}\t{v:.6f}\n" for k, v in self.metrics.items())


def length_binned(lengths: Sequence[float], preds: Sequence, golds: Sequence,
                  metric: Callable[[Sequence, Sequence], float], half_width: float = 2,
                  final_center: Optional[float] = None,
                  centers: Optional[Sequence[float]] = None) -> List[Tuple[float, float, int]]:
    """Metric over examples whose length lies in ``[l - w, l + w]`` for each center ``l``.

    Centers default to every integer from the shortest length up to
    ``final_center`` (default: the longest length). The final window is open
    on the right, so lengths beyond it are batched there. Bins that are empty,
    or where the metric is undefined, are left out. Returns
    ``(center, value, count)`` triples.
    """
    if not (len(lengths) == len(preds) == len(golds)):
        raise ValueError("lengths, predictions and gold values must align")
    if not lengths:
        return []
    lengths = np.asarray(lengths, dtype=np.float64)
    if final_center is None:
        final_center = math.floor(lengths.max())
    if centers is None:
        centers = range(math.ceil(lengths.min()), int(math.floor(final_center)) + 1)
        centers = list(centers) or [final_center]
    centers = sorted(c for c in centers if c <= final_center)
    if not centers or centers[-1] != final_center:
        centers.append(final_center)
    out = []
    for ell in centers:
        lo = ell - half_width
        if ell == final_center:
            members = np.nonzero(lengths >= lo)[0]
        else:
            members = np.nonzero((lengths >= lo) & (lengths <= ell + half_width))[0]
        if members.size == 0:
            continue
        try:
            value = metric([preds[i] for i in members], [golds[i] for i in members])
        except ValueError:
            continue
        out.append((ell, float(value), int(members.size)))
    return out


def binned_tsv(series: Sequence[Tuple[float, float, int]]) -> str:
    return "ell\tvalue\tcount\n" + "".join(f"{ell:g}\t{v:.6f}\t{n}\n" for ell, v, n in series)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def mean_vector(emb, tokens: Sequence[str]) -> np.ndarray:
    return np.mean([emb.vector(t) for t in tokens], axis=0)


def nearest_neighbors(corpus: Sequence, query, k: int,
                      score: Callable[[object, object], float]) -> List[Tuple[object, float]]:
    """Rank ``corpus`` by ``score(query, item)``, best first; ties keep corpus order."""
    if not corpus:
        raise ValueError("empty corpus")
    if k <= 0:
        return []
    scored = [(item, score(query, item)) for item in corpus]
    order = sorted(range(len(scored)), key=lambda i: -scored[i][1])
    return [scored[i] for i in order[:k]]


def mean_vector_scorer(emb) -> Callable:
    """Cosine similarity of mean word vectors; items are token lists or trees."""
    def tokens(item):
        return item.tokens if hasattr(item, "tokens") else list(item)

    def score(a, b):
        return cosine(mean_vector(emb, tokens(a)), mean_vector(emb, tokens(b)))
    return score


def model_scorer(model) -> Callable:
    """Expected relatedness score from a trained similarity model."""
    return lambda a, b: model.predict_score(a, b)
