"""End-to-end models: an encoder (chain or tree LSTM) plus a task head.

Parameter names in the :class:`ParamSet`:

* ``enc.*`` (or ``enc0.*``, ``enc1.*`` for stacked chains): gate parameters
* ``cls.W``, ``cls.b``: classifier
* ``sim.W_prod``, ``sim.W_diff``, ``sim.b_h``, ``sim.W_p``, ``sim.b_p``: similarity head
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import cells, heads
from .config import RunConfig
from .embeddings import EmbeddingTable
from .params import ParamSet
from .tensor import Rng, dropout_mask
from .trees import Tree

Item = Union[Tree, Sequence[str]]


@dataclass
class LabeledSequence:
    """A token sequence with one label, used to train chain models on sentiment."""

    tokens: List[str]
    label: int


@dataclass
class PairExample:
    left: Item
    right: Item
    score: float


@dataclass
class Encoding:
    rep: np.ndarray  # sentence representation fed to the head
    states: Dict[int, cells.NodeState]  # tree node id or sequence position
    trace: object


def encoder_prefixes(config: RunConfig) -> List[str]:
    if config.encoder == "sequence" and config.layers > 1:
        return [f"enc{k}." for k in range(config.layers)]
    return ["enc."]


def rep_dim(config: RunConfig) -> int:
    return 2 * config.d if config.bidirectional else config.d


def init_params(config: RunConfig, rng: Rng) -> ParamSet:
    """Draw a fresh parameter set. Draw order is fixed: encoder layers, then head."""
    values: Dict[str, np.ndarray] = {}
    arity = 2 if config.encoder == "nary" else None
    e = config.e
    for prefix in encoder_prefixes(config):
        gp = cells.init_gate_params(config.d, e, rng, arity=arity, offdiag=config.offdiag,
                                    scale=config.init_scale, forget_bias=config.forget_bias)
        values.update(gp.flat(prefix))
        e = config.d
    if config.is_sentiment:
        values.update(heads.init_classifier(config.n_classes, rep_dim(config), rng, config.init_scale).flat())
    else:
        values.update(heads.init_similarity(rep_dim(config), rng, config.sim_hidden, config.K,
                                            config.init_scale).flat())
    return ParamSet(values)


def binary_label(label: Optional[int]) -> Optional[int]:
    """Collapse the five sentiment classes: 0,1 -> 0; 3,4 -> 1; neutral dropped."""
    if label is None or label == 2:
        return None
    return 0 if label < 2 else 1


def prepare_sentiment_tree(tree: Tree, task: str) -> Optional[Tree]:
    if task != "sentiment-binary":
        return tree
    relabeled = tree.relabel({n.id: binary_label(n.label) for n in tree.nodes})
    if relabeled.nodes[relabeled.root].label is None and tree.nodes[tree.root].label is not None:
        return None  # neutral sentence
    return relabeled


def span_sequences(tree: Tree) -> List[LabeledSequence]:
    """One training sequence per labeled node, covering that node's tokens."""
    toks = tree.tokens
    out = []
    for nid in tree.labeled_nodes():
        span = sorted(tree.nodes[nid].span)
        out.append(LabeledSequence([toks[i] for i in span], tree.nodes[nid].label))
    return out


class Model:
    def __init__(self, config: RunConfig, emb: EmbeddingTable, params: Optional[ParamSet] = None,
                 rng: Optional[Rng] = None):
        self.config = config
        self.emb = emb
        if emb.dim != config.e:
            raise ValueError(f"embedding dimension {emb.dim} does not match e={config.e}")
        if params is None:
            params = init_params(config, rng if rng is not None else Rng(config.seed))
        self.params = params
        self.arity = 2 if config.encoder == "nary" else None

    # -- parameter views ---------------------------------------------------
    def _enc(self, arrays):
        ps = [cells.GateParams.from_flat(arrays, p, self.arity) for p in encoder_prefixes(self.config)]
        return ps if self.config.encoder == "sequence" else ps[0]

    def _head(self, arrays):
        if self.config.is_sentiment:
            return heads.ClassifierParams.from_flat(arrays)
        return heads.SimilarityParams.from_flat(arrays)

    # -- forward -------------------------------------------------------------
    def encode(self, item: Item) -> Encoding:
        cfg = self.config
        if cfg.encoder == "sequence":
            tokens = item.tokens if isinstance(item, Tree) else list(item)
            ids = self.emb.vocab.ids(tokens)
            xs = [self.emb.matrix[i] for i in ids]
            states, trace = cells.run_sequence(self._enc(self.params.values), xs, cfg.bidirectional, ids)
            if cfg.bidirectional:
                d = cfg.d
                rep = np.concatenate([states[-1].h[:d], states[0].h[d:]])
            else:
                rep = states[-1].h
            return Encoding(rep, dict(enumerate(states)), trace)
        if not isinstance(item, Tree):
            raise TypeError("tree encoders need a Tree")
        if item.kind != cfg.tree_kind:
            raise ValueError(f"variant {cfg.variant} expects {cfg.tree_kind} trees, got {item.kind}")
        states, trace = cells.run_tree(self._enc(self.params.values), item, self.emb, cfg.encoder)
        return Encoding(states[item.root].h, states, trace)

    def _rep_upstream(self, enc: Encoding, g: np.ndarray) -> Dict[int, np.ndarray]:
        """Map a gradient on the sentence representation to per-state upstreams."""
        if self.config.encoder != "sequence":
            return {enc.trace.tree.root: g}
        last = len(enc.states) - 1
        if not self.config.bidirectional:
            return {last: g}
        d = self.config.d
        up = {last: np.concatenate([g[:d], np.zeros(d)])}
        first = np.concatenate([np.zeros(d), g[d:]])
        up[0] = up[0] + first if 0 in up else first
        return up

    def _encoder_backward(self, enc: Encoding, upstream: Dict[int, np.ndarray]) -> None:
        grads = self._enc(self.params.grads)
        _, dxs = cells.backward(enc.trace, upstream, grads=grads)
        if not self.emb.trainable:
            return
        ids = enc.trace.input_ids
        for key, dx in dxs.items():
            self.emb.accumulate(ids[key], dx)

    def predict_probs(self, item: Item) -> np.ndarray:
        return heads.classify(self._head(self.params.values), self.encode(item).rep)

    def predict_label(self, item: Item) -> int:
        return int(np.argmax(self.predict_probs(item)))

    def predict_score(self, left: Item, right: Item) -> float:
        sp = self._head(self.params.values)
        return heads.similarity_forward(sp, self.encode(left).rep, self.encode(right).rep)[1]

    # -- loss and gradients ---------------------------------------------------
    def loss(self, example) -> Tuple[float, int]:
        """Summed loss and term count of one example, forward only, no dropout."""
        cfg = self.config
        if not cfg.is_sentiment:
            probs, _, trace = heads.similarity_forward(
                self._head(self.params.values), self.encode(example.left).rep, self.encode(example.right).rep)
            return heads.kl_loss_grad(heads.sparse_target(example.score, cfg.K), probs, trace)[0], 1
        cp = self._head(self.params.values)
        if isinstance(example, Tree) and cfg.encoder == "sequence":
            parts = [self.loss(seq) for seq in span_sequences(example)]
            return sum(p[0] for p in parts), sum(p[1] for p in parts)
        if isinstance(example, LabeledSequence):
            probs = heads.classify(cp, self.encode(example.tokens).rep)
            return heads.nll_loss_grad(probs, example.label)[0], 1
        labeled = example.labeled_nodes()
        if not labeled:
            return 0.0, 0
        enc = self.encode(example)
        total = sum(heads.nll_loss_grad(heads.classify(cp, enc.states[n].h), example.nodes[n].label)[0]
                    for n in labeled)
        return total, len(labeled)

    def loss_grad(self, example, rng: Optional[Rng] = None) -> Tuple[float, int]:
        """Accumulate the summed loss gradient of one example into ``params.grads``.

        ``rng`` enables dropout on head inputs (training mode). Returns the
        summed loss and the number of loss terms (0 means nothing supervised).
        """
        if self.config.is_sentiment:
            return self._classification_loss_grad(example, rng)
        return self._relatedness_loss_grad(example, rng)

    def _dropout(self, h, rng):
        rate = self.config.dropout
        if rng is None or rate == 0.0:
            return h, None
        mask = dropout_mask(h.shape[0], rate, rng)
        return h * mask, mask

    def _classification_loss_grad(self, example, rng) -> Tuple[float, int]:
        if isinstance(example, Tree) and self.config.encoder == "sequence":
            # chain encoders see each labeled span as its own sequence
            parts = [self._classification_loss_grad(seq, rng) for seq in span_sequences(example)]
            return sum(p[0] for p in parts), sum(p[1] for p in parts)
        cp = self._head(self.params.values)
        cg = self._head(self.params.grads)
        if isinstance(example, LabeledSequence):
            targets = [(None, example.label)]
            enc = self.encode(example.tokens)
        else:
            targets = [(nid, example.nodes[nid].label) for nid in example.labeled_nodes()]
            if not targets:
                return 0.0, 0
            enc = self.encode(example)
        total = 0.0
        upstream: Dict[int, np.ndarray] = {}
        for nid, label in targets:
            h = enc.rep if nid is None else enc.states[nid].h
            h_in, mask = self._dropout(h, rng)
            loss, dlogits = heads.nll_loss_grad(heads.classify(cp, h_in), label)
            total += loss
            dh = heads.classifier_backward(cp, h_in, dlogits, cg)
            if mask is not None:
                dh = dh * mask
            if nid is None:
                for k, g in self._rep_upstream(enc, dh).items():
                    upstream[k] = upstream[k] + g if k in upstream else g
            else:
                upstream[nid] = upstream[nid] + dh if nid in upstream else dh
        self._encoder_backward(enc, upstream)
        return total, len(targets)

    def _relatedness_loss_grad(self, example: PairExample, rng) -> Tuple[float, int]:
        sp = self._head(self.params.values)
        sg = self._head(self.params.grads)
        left, right = self.encode(example.left), self.encode(example.right)
        hL, mL = self._dropout(left.rep, rng)
        hR, mR = self._dropout(right.rep, rng)
        probs, _, trace = heads.similarity_forward(sp, hL, hR)
        target = heads.sparse_target(example.score, self.config.K)
        loss, dlogits = heads.kl_loss_grad(target, probs, trace)
        dL, dR = heads.similarity_backward(sp, trace, dlogits, sg)
        if mL is not None:
            dL, dR = dL * mL, dR * mR
        self._encoder_backward(left, self._rep_upstream(left, dL))
        self._encoder_backward(right, self._rep_upstream(right, dR))
        return loss, 1
