"""Central finite-difference verification of the analytic gradients.

Builds a small random model and example, computes the analytic gradient of the
minibatch objective, and compares every parameter entry and every input word
vector against ``(f(x + eps) - f(x - eps)) / (2 eps)``.

Relative error per entry is ``|a - n| / max(|a|, |n|, floor)``; the floor
(1e-6) keeps entries whose true gradient is essentially zero from being judged
on finite-difference round-off alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .config import VARIANTS, RunConfig
from .embeddings import EmbeddingTable, Vocab
from .model import LabeledSequence, Model, PairExample
from .tensor import Rng
from .train import minibatch_loss_grad
from .trees import Tree, parse_constituency, parse_dependency

HEADS = ("classifier", "similarity")
REL_FLOOR = 1e-6
TOLERANCE = 1e-4


def random_dependency_tree(tokens: List[str], rng: Rng, n_classes: Optional[int] = None) -> Tree:
    n = len(tokens)
    order = rng.permutation(n)  # order[0] is the root position
    heads = [0] * n
    for k in range(1, n):
        heads[order[k]] = int(order[rng.integers(0, k)]) + 1
    tree = parse_dependency([f"{i + 1}\t{tok}\t{heads[i]}" for i, tok in enumerate(tokens)])
    if n_classes:
        tree = tree.relabel({nd.id: int(rng.integers(0, n_classes)) for nd in tree.nodes})
    return tree


def random_binary_tree(tokens: List[str], rng: Rng, n_classes: int = 5) -> Tree:
    def build(lo, hi):
        label = int(rng.integers(0, n_classes))
        if hi - lo == 1:
            return f"({label} {tokens[lo]})"
        mid = int(rng.integers(lo + 1, hi))
        return f"({label} {build(lo, mid)} {build(mid, hi)})"
    return parse_constituency(build(0, len(tokens)))


def random_item(variant: str, rng: Rng, words: List[str], max_nodes: int, n_classes: Optional[int]):
    encoder = VARIANTS[variant][0]
    if encoder == "nary":
        n = int(rng.integers(1, (max_nodes + 1) // 2 + 1))  # 2n - 1 nodes
    else:
        n = int(rng.integers(2, max_nodes + 1))
    tokens = [words[int(rng.integers(0, len(words)))] for _ in range(n)]
    if encoder == "nary":
        return random_binary_tree(tokens, rng, n_classes or 5)
    if encoder == "childsum":
        return random_dependency_tree(tokens, rng, n_classes)
    return tokens


@dataclass
class GradcheckReport:
    variant: str
    head: str
    seed: int
    errors: Dict[str, float] = field(default_factory=dict)  # group -> worst relative error

    @property
    def worst(self) -> float:
        return max(self.errors.values())

    def failures(self, tol: float = TOLERANCE) -> List[str]:
        return [k for k, v in self.errors.items() if not v <= tol]

    @property
    def ok(self) -> bool:
        return not self.failures()


def build_instance(variant: str, head: str, d: int = 8, e: int = 12, seed: int = 1, max_nodes: int = 12,
                   l2: float = 1e-4):
    """Random model (trainable embeddings) plus one example."""
    task = "sentiment-fine" if head == "classifier" else "relatedness"
    cfg = RunConfig(task=task, variant=variant, d=d, e=e, l2=l2, dropout=0.0, emb_lr=0.1,
                    init_scale=0.5, seed=seed, sim_hidden=10).resolved()
    rng = Rng(seed)
    words = [f"w{k}" for k in range(10)]
    vocab = Vocab(words)
    emb = EmbeddingTable(vocab, rng.uniform(-1.0, 1.0, (len(vocab), e)), trainable=True)
    model = Model(cfg, emb, rng=rng)
    if head == "classifier":
        item = random_item(variant, rng, words, max_nodes, cfg.n_classes)
        if isinstance(item, list):
            example = LabeledSequence(item, int(rng.integers(0, cfg.n_classes)))
        else:
            example = item
    else:
        left = random_item(variant, rng, words, max_nodes, None)
        right = random_item(variant, rng, words, max_nodes, None)
        example = PairExample(left, right, float(rng.uniform(1.0, cfg.K)))
    return model, example


def gradcheck(variant: str, head: str, d: int = 8, e: int = 12, seed: int = 1, eps: float = 1e-5,
              max_nodes: int = 12, corrupt: Optional[str] = None) -> GradcheckReport:
    """Compare analytic and finite-difference gradients for one random instance.

    ``corrupt`` names a parameter group (or ``"inputs"``) whose analytic
    gradient is deliberately perturbed, to show the check can fail.
    """
    if head not in HEADS:
        raise ValueError(f"unknown head {head!r}")
    model, example = build_instance(variant, head, d, e, seed, max_nodes)
    cfg = model.config
    minibatch_loss_grad(model, [example], cfg)
    analytic = {k: v.copy() for k, v in model.params.grads.items()}
    input_grads = {idx: g.copy() for idx, g in model.emb.grad.items()}
    model.params.zero_grad()
    model.emb.zero_grad()

    lam = cfg.l2

    def objective() -> float:
        loss, n = model.loss(example)
        return loss / n + 0.5 * lam * model.params.sq_norm()

    def fd(array: np.ndarray, j: int) -> float:
        old = array.flat[j]
        array.flat[j] = old + eps
        up = objective()
        array.flat[j] = old - eps
        down = objective()
        array.flat[j] = old
        return (up - down) / (2 * eps)

    def worst(a: np.ndarray, n: np.ndarray) -> float:
        return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)))

    report = GradcheckReport(variant, head, seed)
    for name, values in model.params.values.items():
        a = analytic[name].ravel()
        if corrupt == name:
            a = a.copy()
            a[0] += 1e-3 + 0.1 * abs(a[0])
        num = np.array([fd(values, j) for j in range(values.size)])
        report.errors[name] = worst(a, num)

    rows = sorted(set(model.emb.vocab.ids(_tokens(example))))
    a_in, n_in = [], []
    for idx in rows:
        row = model.emb.matrix[idx]
        a_in.append(input_grads.get(idx, np.zeros_like(row)))
        n_in.append(np.array([fd(row, j) for j in range(row.size)]))
    a_in = np.concatenate(a_in)
    if corrupt == "inputs":
        a_in[0] += 1e-3 + 0.1 * abs(a_in[0])
    report.errors["inputs"] = worst(a_in, np.concatenate(n_in))
    return report


def _tokens(example) -> List[str]:
    if isinstance(example, PairExample):
        return _tokens(example.left) + _tokens(example.right)
    if isinstance(example, LabeledSequence):
        return list(example.tokens)
    if isinstance(example, Tree):
        return example.tokens
    return list(example)
