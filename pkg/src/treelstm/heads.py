"""Output layers: node-label softmax and the sentence-pair similarity network."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from .tensor import DimensionError, Rng, init_array, log_softmax, sigmoid, softmax


@dataclass
class ClassifierParams:
    W: np.ndarray  # |Y| x d_in
    b: np.ndarray

    def flat(self, prefix="cls."):
        return {prefix + "W": self.W, prefix + "b": self.b}

    @classmethod
    def from_flat(cls, arrays: Mapping[str, np.ndarray], prefix="cls."):
        return cls(arrays[prefix + "W"], arrays[prefix + "b"])


def init_classifier(n_classes: int, d_in: int, rng: Rng, scale: float = 0.05) -> ClassifierParams:
    return ClassifierParams(init_array((n_classes, d_in), scale, rng), np.zeros(n_classes))


def classifier_logits(cp: ClassifierParams, h: np.ndarray) -> np.ndarray:
    if h.shape != (cp.W.shape[1],):
        raise DimensionError(f"classifier expects a {cp.W.shape[1]}-vector, got shape {h.shape}")
    return cp.W @ h + cp.b


def classify(cp: ClassifierParams, h: np.ndarray) -> np.ndarray:
    """Class probabilities ``softmax(W h + b)``."""
    return softmax(classifier_logits(cp, h))


def nll_loss_grad(probs: np.ndarray, gold: int) -> Tuple[float, np.ndarray]:
    """``-log probs[gold]`` and its gradient w.r.t. the logits."""
    if not 0 <= gold < probs.shape[0]:
        raise ValueError(f"gold class {gold} outside 0..{probs.shape[0] - 1}")
    grad = probs.copy()
    grad[gold] -= 1.0
    return -math.log(probs[gold]), grad


def classifier_backward(cp: ClassifierParams, h: np.ndarray, dlogits: np.ndarray,
                        grads: ClassifierParams) -> np.ndarray:
    grads.W += np.outer(dlogits, h)
    grads.b += dlogits
    return cp.W.T @ dlogits


@dataclass
class SimilarityParams:
    W_prod: np.ndarray  # hidden x d
    W_diff: np.ndarray  # hidden x d
    b_h: np.ndarray
    W_p: np.ndarray  # K x hidden
    b_p: np.ndarray

    @property
    def K(self) -> int:
        return self.b_p.shape[0]

    @property
    def r(self) -> np.ndarray:
        return np.arange(1, self.K + 1, dtype=np.float64)

    def flat(self, prefix="sim."):
        return {prefix + k: getattr(self, k) for k in ("W_prod", "W_diff", "b_h", "W_p", "b_p")}

    @classmethod
    def from_flat(cls, arrays: Mapping[str, np.ndarray], prefix="sim."):
        return cls(*(arrays[prefix + k] for k in ("W_prod", "W_diff", "b_h", "W_p", "b_p")))


def init_similarity(d_in: int, rng: Rng, hidden: int = 50, K: int = 5,
                    scale: float = 0.05) -> SimilarityParams:
    return SimilarityParams(
        init_array((hidden, d_in), scale, rng),
        init_array((hidden, d_in), scale, rng),
        np.zeros(hidden),
        init_array((K, hidden), scale, rng),
        np.zeros(K),
    )


@dataclass
class SimilarityTrace:
    hL: np.ndarray
    hR: np.ndarray
    h_prod: np.ndarray
    h_diff: np.ndarray
    h_s: np.ndarray
    logits: np.ndarray
    log_probs: np.ndarray


def similarity_forward(sp: SimilarityParams, hL: np.ndarray, hR: np.ndarray):
    """Score a pair; returns ``(probs, expected score, trace)``."""
    d = sp.W_prod.shape[1]
    if hL.shape != (d,) or hR.shape != (d,):
        raise DimensionError(f"similarity head expects {d}-vectors, got {hL.shape} and {hR.shape}")
    h_prod = hL * hR
    h_diff = np.abs(hL - hR)
    h_s = sigmoid(sp.W_prod @ h_prod + sp.W_diff @ h_diff + sp.b_h)
    logits = sp.W_p @ h_s + sp.b_p
    probs = softmax(logits)
    y_hat = float(sp.r @ probs)
    return probs, y_hat, SimilarityTrace(hL, hR, h_prod, h_diff, h_s, logits, log_softmax(logits))


def similarity_backward(sp: SimilarityParams, trace: SimilarityTrace, dlogits: np.ndarray,
                        grads: SimilarityParams) -> Tuple[np.ndarray, np.ndarray]:
    """Accumulate head gradients; return dL/dhL and dL/dhR."""
    grads.W_p += np.outer(dlogits, trace.h_s)
    grads.b_p += dlogits
    da = (sp.W_p.T @ dlogits) * trace.h_s * (1.0 - trace.h_s)
    grads.W_prod += np.outer(da, trace.h_prod)
    grads.W_diff += np.outer(da, trace.h_diff)
    grads.b_h += da
    d_prod = sp.W_prod.T @ da
    d_diff = (sp.W_diff.T @ da) * np.sign(trace.hL - trace.hR)
    return d_prod * trace.hR + d_diff, d_prod * trace.hL - d_diff


def sparse_target(y: float, K: int) -> np.ndarray:
    """Distribution on ``1..K`` with expected value ``y``.

    Mass ``floor(y) - y + 1`` sits on ``floor(y)`` and ``y - floor(y)`` on the
    next integer; integral ``y`` gives a one-hot vector.
    """
    if K < 2:
        raise ValueError("K must exceed 1")
    if not 1.0 <= y <= K:
        raise ValueError(f"score {y} outside [1, {K}]")
    p = np.zeros(K)
    lo = math.floor(y)
    frac = y - lo
    p[lo - 1] = 1.0 - frac
    if lo < K:
        p[lo] = frac
    return p


def kl_loss_grad(p: np.ndarray, probs: np.ndarray, trace: SimilarityTrace = None) -> Tuple[float, np.ndarray]:
    """``KL(p || probs)`` and its gradient w.r.t. the similarity logits."""
    mask = p > 0
    log_q = trace.log_probs[mask] if trace is not None else np.log(probs[mask])
    loss = float(np.sum(p[mask] * (np.log(p[mask]) - log_q)))
    # rounding can push an exact match a hair below zero
    return max(loss, 0.0), probs - p
