"""LSTM composition functions with hand-derived backward passes.

Four gates ``i, f, o, u`` are parameterized by input matrices ``W_g`` (d x e),
recurrent matrices ``U_g`` and biases ``b_g``. The recurrent part depends on
the cell kind:

* chain LSTM and Child-Sum: one ``U_g`` of shape (d, d). Child-Sum feeds the
  sum of child hidden states to ``i, o, u`` and computes one forget gate per
  child from that child's hidden state alone.
* N-ary: ``U_g`` has shape (N, d, d), one block per child slot. ``U_f`` has
  shape (N, N, d, d) with off-diagonal blocks, or (N, d, d) when they are
  disabled. All forget gates share ``W_f`` and ``b_f``.

Nodes without an input (internal constituency nodes) skip the ``W x`` term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import DimensionError, Rng, init_array, sigmoid
from .trees import CONSTITUENCY, Tree, TreeError

GATES = ("i", "f", "o", "u")


class NodeState(NamedTuple):
    c: np.ndarray
    h: np.ndarray


@dataclass
class GateParams:
    W: Dict[str, np.ndarray]
    U: Dict[str, np.ndarray]
    b: Dict[str, np.ndarray]
    arity: Optional[int] = None

    @property
    def d(self) -> int:
        return self.b["i"].shape[0]

    @property
    def e(self) -> Optional[int]:
        return self.W["i"].shape[1] if self.W else None

    @property
    def offdiag(self) -> bool:
        return self.arity is not None and self.U["f"].ndim == 4

    def flat(self, prefix: str = "") -> Dict[str, np.ndarray]:
        out = {}
        for g in GATES:
            if self.W:
                out[f"{prefix}W_{g}"] = self.W[g]
            out[f"{prefix}U_{g}"] = self.U[g]
            out[f"{prefix}b_{g}"] = self.b[g]
        return out

    @classmethod
    def from_flat(cls, arrays: Mapping[str, np.ndarray], prefix: str = "",
                  arity: Optional[int] = None) -> "GateParams":
        """Wrap the arrays stored under ``prefix`` without copying them."""
        W = {g: arrays[f"{prefix}W_{g}"] for g in GATES if f"{prefix}W_{g}" in arrays}
        U = {g: arrays[f"{prefix}U_{g}"] for g in GATES}
        b = {g: arrays[f"{prefix}b_{g}"] for g in GATES}
        return cls(W, U, b, arity)

    def zeros_like(self) -> "GateParams":
        return GateParams({g: np.zeros_like(a) for g, a in self.W.items()},
                          {g: np.zeros_like(a) for g, a in self.U.items()},
                          {g: np.zeros_like(a) for g, a in self.b.items()}, self.arity)


def init_gate_params(d: int, e: Optional[int], rng: Rng, arity: Optional[int] = None,
                     offdiag: bool = True, scale: float = 0.05,
                     forget_bias: float = 1.0) -> GateParams:
    """Uniform ``[-scale, scale]`` weights, zero biases, forget bias ``forget_bias``."""
    W, U, b = {}, {}, {}
    for g in GATES:
        if e is not None:
            W[g] = init_array((d, e), scale, rng)
        if arity is None:
            shape = (d, d)
        elif g == "f" and offdiag:
            shape = (arity, arity, d, d)
        else:
            shape = (arity, d, d)
        U[g] = init_array(shape, scale, rng)
        b[g] = np.full(d, forget_bias if g == "f" else 0.0)
    return GateParams(W, U, b, arity)


@dataclass
class StepCache:
    """Everything one unit's backward pass needs."""

    kind: str  # "lstm", "childsum" or "nary"
    x: Optional[np.ndarray]
    hs: np.ndarray  # child (or previous) hidden states, K x d
    cs: np.ndarray
    i: np.ndarray
    f: np.ndarray  # one forget gate per child, K x d
    o: np.ndarray
    u: np.ndarray
    c: np.ndarray
    tc: np.ndarray  # tanh(c)
    h: np.ndarray
    h_tilde: Optional[np.ndarray] = None


def _stack(children: Sequence[NodeState], d: int) -> Tuple[np.ndarray, np.ndarray]:
    if not children:
        return np.zeros((0, d)), np.zeros((0, d))
    hs = np.stack([ch.h for ch in children])
    cs = np.stack([ch.c for ch in children])
    if hs.shape[1] != d or cs.shape[1] != d:
        raise DimensionError(f"child state has dimension {hs.shape[1]}, expected {d}")
    return hs, cs


def _input_terms(p: GateParams, x: Optional[np.ndarray]) -> Dict[str, np.ndarray]:
    if x is None:
        return {g: p.b[g] for g in GATES}
    if not p.W:
        raise DimensionError("input given to a cell without input matrices")
    if x.shape != (p.e,):
        raise DimensionError(f"x has shape {x.shape}, expected ({p.e},)")
    return {g: p.W[g] @ x + p.b[g] for g in GATES}


def _finish(kind, x, hs, cs, a_i, a_f, a_o, a_u, h_tilde=None) -> Tuple[NodeState, StepCache]:
    i, f, o = sigmoid(a_i), sigmoid(a_f), sigmoid(a_o)
    u = np.tanh(a_u)
    c = i * u + (f * cs).sum(axis=0)
    tc = np.tanh(c)
    h = o * tc
    return NodeState(c, h), StepCache(kind, x, hs, cs, i, f, o, u, c, tc, h, h_tilde)


def lstm_step(p: GateParams, x: Optional[np.ndarray], prev: NodeState) -> Tuple[NodeState, StepCache]:
    """One transition of the standard chain LSTM."""
    d = p.d
    if prev.h.shape != (d,) or prev.c.shape != (d,):
        raise DimensionError(f"previous state has dimension {prev.h.shape[0]}, expected {d}")
    base = _input_terms(p, x)
    h = prev.h
    a_i = base["i"] + p.U["i"] @ h
    a_f = base["f"] + p.U["f"] @ h
    a_o = base["o"] + p.U["o"] @ h
    a_u = base["u"] + p.U["u"] @ h
    i, f, o = sigmoid(a_i), sigmoid(a_f), sigmoid(a_o)
    u = np.tanh(a_u)
    c = i * u + f * prev.c
    tc = np.tanh(c)
    h_new = o * tc
    cache = StepCache("lstm", x, h[None, :], prev.c[None, :], i, f[None, :], o, u, c, tc, h_new, h)
    return NodeState(c, h_new), cache


def childsum_step(p: GateParams, x: Optional[np.ndarray],
                  children: Sequence[NodeState]) -> Tuple[NodeState, StepCache]:
    """Child-Sum Tree-LSTM unit; order of ``children`` is irrelevant."""
    if p.arity is not None:
        raise ValueError("childsum_step needs chain-shaped parameters (arity None)")
    hs, cs = _stack(children, p.d)
    h_tilde = hs.sum(axis=0) if len(hs) else np.zeros(p.d)
    base = _input_terms(p, x)
    a_i = base["i"] + p.U["i"] @ h_tilde
    a_o = base["o"] + p.U["o"] @ h_tilde
    a_u = base["u"] + p.U["u"] @ h_tilde
    a_f = base["f"][None, :] + hs @ p.U["f"].T
    return _finish("childsum", x, hs, cs, a_i, a_f, a_o, a_u, h_tilde)


def nary_step(p: GateParams, x: Optional[np.ndarray], children: Sequence[NodeState],
              leaf_input_only: bool = False) -> Tuple[NodeState, StepCache]:
    """N-ary Tree-LSTM unit.

    ``children`` fill slots ``0..len-1``; missing trailing slots count as zero
    states. With ``leaf_input_only`` an input at an internal node is an error.
    """
    N = p.arity
    if N is None:
        raise ValueError("nary_step needs slot-shaped parameters (arity N)")
    K = len(children)
    if K > N:
        raise TreeError(f"node has {K} children but the cell supports at most {N}")
    if leaf_input_only and x is not None and K:
        raise TreeError("internal node received an input vector")
    hs, cs = _stack(children, p.d)
    base = _input_terms(p, x)
    a = {g: base[g] + np.einsum("lij,lj->i", p.U[g][:K], hs) for g in ("i", "o", "u")}
    if p.offdiag:
        a_f = base["f"][None, :] + np.einsum("klij,lj->ki", p.U["f"][:K, :K], hs)
    else:
        a_f = base["f"][None, :] + np.einsum("kij,kj->ki", p.U["f"][:K], hs)
    return _finish("nary", x, hs, cs, a["i"], a_f, a["o"], a["u"])


def step_backward(p: GateParams, cache: StepCache, dh: np.ndarray, dc: np.ndarray,
                  grads: GateParams) -> Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    """Backpropagate one unit. Accumulates into ``grads``.

    Returns gradients w.r.t. the input ``x`` (None if the unit had none), the
    child hidden states and the child cells (both K x d).
    """
    i, f, o, u, tc = cache.i, cache.f, cache.o, cache.u, cache.tc
    hs, cs = cache.hs, cache.cs
    d_o = dh * tc
    dct = dc + dh * o * (1.0 - tc * tc)
    da = {
        "i": dct * u * i * (1.0 - i),
        "o": d_o * o * (1.0 - o),
        "u": dct * i * (1.0 - u * u),
    }
    da_f = dct[None, :] * cs * f * (1.0 - f)
    dcs = dct[None, :] * f
    da_f_sum = da_f.sum(axis=0)

    for g in ("i", "o", "u"):
        grads.b[g] += da[g]
    grads.b["f"] += da_f_sum

    dx = None
    if cache.x is not None:
        x = cache.x
        for g in ("i", "o", "u"):
            grads.W[g] += np.outer(da[g], x)
        grads.W["f"] += np.outer(da_f_sum, x)
        dx = (p.W["i"].T @ da["i"] + p.W["o"].T @ da["o"] + p.W["u"].T @ da["u"]
              + p.W["f"].T @ da_f_sum)

    if cache.kind in ("lstm", "childsum"):
        h_tilde = cache.h_tilde
        dht = np.zeros_like(dh)
        for g in ("i", "o", "u"):
            grads.U[g] += np.outer(da[g], h_tilde)
            dht += p.U[g].T @ da[g]
        grads.U["f"] += da_f.T @ hs
        dhs = dht[None, :] + da_f @ p.U["f"]
    else:
        K = hs.shape[0]
        dhs = np.zeros_like(hs)
        for g in ("i", "o", "u"):
            grads.U[g][:K] += np.einsum("i,lj->lij", da[g], hs)
            dhs += np.einsum("lij,i->lj", p.U[g][:K], da[g])
        if p.offdiag:
            grads.U["f"][:K, :K] += np.einsum("ki,lj->klij", da_f, hs)
            dhs += np.einsum("klij,ki->lj", p.U["f"][:K, :K], da_f)
        else:
            grads.U["f"][:K] += np.einsum("ki,kj->kij", da_f, hs)
            dhs += np.einsum("kij,ki->kj", p.U["f"][:K], da_f)
    return dx, dhs, dcs


# -- sequences ---------------------------------------------------------------

@dataclass
class SequenceTrace:
    params: List[GateParams]
    bidirectional: bool
    input_ids: Optional[List[int]]
    # passes[direction][layer][t], t in processing order
    passes: List[List[List[StepCache]]] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.passes[0][0])


def _run_stack(layers: Sequence[GateParams], xs: Sequence[np.ndarray]):
    caches = []
    inputs = list(xs)
    for p in layers:
        state = NodeState(np.zeros(p.d), np.zeros(p.d))
        layer_caches = []
        outs = []
        for x in inputs:
            state, cache = lstm_step(p, x, state)
            layer_caches.append(cache)
            outs.append(state)
        caches.append(layer_caches)
        inputs = [s.h for s in outs]
    return outs, caches


def run_sequence(p: Union[GateParams, Sequence[GateParams]], xs: Sequence[np.ndarray],
                 bidirectional: bool = False,
                 input_ids: Optional[List[int]] = None) -> Tuple[List[NodeState], SequenceTrace]:
    """Run a (possibly stacked, possibly bidirectional) chain LSTM.

    ``p`` is one :class:`GateParams` per layer; layer ``l+1`` reads the
    hidden states of layer ``l``. The bidirectional model runs the same stack
    (shared parameters) over the reversed sequence and reports, per position,
    ``[forward; backward]`` concatenations of the top-layer states.
    """
    layers = [p] if isinstance(p, GateParams) else list(p)
    if not xs:
        raise ValueError("empty sequence")
    if not layers:
        raise ValueError("no layers")
    trace = SequenceTrace(layers, bidirectional, input_ids)
    fwd, caches = _run_stack(layers, xs)
    trace.passes.append(caches)
    if not bidirectional:
        return fwd, trace
    bwd, caches = _run_stack(layers, xs[::-1])
    trace.passes.append(caches)
    bwd = bwd[::-1]
    states = [NodeState(np.concatenate([a.c, b.c]), np.concatenate([a.h, b.h])) for a, b in zip(fwd, bwd)]
    return states, trace


def _stack_backward(layers, caches, dh_top: List[np.ndarray], dc_top: List[np.ndarray], grads):
    """BPTT through one direction; ``dh_top``/``dc_top`` indexed in processing order."""
    T = len(dh_top)
    dh_in = dh_top
    dc_in = dc_top
    dxs: List[Optional[np.ndarray]] = [None] * T
    for layer in range(len(layers) - 1, -1, -1):
        p, g = layers[layer], grads[layer]
        dh_next = np.zeros(p.d)
        dc_next = np.zeros(p.d)
        dxs = [None] * T
        for t in range(T - 1, -1, -1):
            dx, dhs, dcs = step_backward(p, caches[layer][t], dh_in[t] + dh_next, dc_in[t] + dc_next, g)
            dxs[t] = dx
            dh_next, dc_next = dhs[0], dcs[0]
        dh_in = dxs
        dc_in = [np.zeros_like(v) for v in dxs]
    return dxs


def sequence_backward(trace: SequenceTrace, upstream_h: Mapping[int, np.ndarray],
                      upstream_c: Optional[Mapping[int, np.ndarray]] = None,
                      grads: Optional[List[GateParams]] = None):
    layers = trace.params
    if grads is None:
        grads = [p.zeros_like() for p in layers]
    T = trace.length
    d = layers[-1].d
    upstream_c = upstream_c or {}
    out_dim = 2 * d if trace.bidirectional else d

    def gather(src, lo, hi, reverse):
        vals = []
        for t in range(T):
            v = src.get(t)
            if v is not None and v.shape != (out_dim,):
                raise DimensionError(f"upstream gradient at position {t} has shape {v.shape}")
            vals.append(np.zeros(d) if v is None else v[lo:hi])
        return vals[::-1] if reverse else vals

    dxs = _stack_backward(layers, trace.passes[0], gather(upstream_h, 0, d, False),
                          gather(upstream_c, 0, d, False), grads)
    if trace.bidirectional:
        dxb = _stack_backward(layers, trace.passes[1], gather(upstream_h, d, 2 * d, True),
                              gather(upstream_c, d, 2 * d, True), grads)
        dxs = [a + b for a, b in zip(dxs, dxb[::-1])]
    return grads, dict(enumerate(dxs))


# -- trees -------------------------------------------------------------------

@dataclass
class TreeTrace:
    params: GateParams
    tree: Tree
    variant: str
    order: List[int]
    caches: Dict[int, StepCache]
    input_ids: Dict[int, int]


def run_tree(p: GateParams, tree: Tree, emb, variant: str) -> Tuple[Dict[int, NodeState], TreeTrace]:
    """Evaluate every node bottom-up.

    Dependency trees feed each node its own word; constituency trees feed
    leaves only. ``variant`` is ``"childsum"`` or ``"nary"``.
    """
    if variant not in ("childsum", "nary"):
        raise ValueError(f"unknown tree variant {variant!r}")
    leaf_only = tree.kind == CONSTITUENCY
    states: Dict[int, NodeState] = {}
    caches: Dict[int, StepCache] = {}
    ids: Dict[int, int] = {}
    order = tree.postorder()
    for nid in order:
        node = tree.nodes[nid]
        x = None
        if node.token is not None and not (leaf_only and node.children):
            ids[nid] = emb.vocab.id(node.token)
            x = emb.matrix[ids[nid]]
        children = [states[c] for c in node.children]
        if variant == "childsum":
            states[nid], caches[nid] = childsum_step(p, x, children)
        else:
            states[nid], caches[nid] = nary_step(p, x, children, leaf_input_only=leaf_only)
    return states, TreeTrace(p, tree, variant, order, caches, ids)


def tree_backward(trace: TreeTrace, upstream_h: Mapping[int, np.ndarray],
                  upstream_c: Optional[Mapping[int, np.ndarray]] = None,
                  grads: Optional[GateParams] = None):
    p = trace.params
    if grads is None:
        grads = p.zeros_like()
    upstream_c = upstream_c or {}
    d = p.d
    dh = {nid: np.zeros(d) for nid in trace.order}
    dc = {nid: np.zeros(d) for nid in trace.order}
    for src, dst in ((upstream_h, dh), (upstream_c, dc)):
        for nid, g in src.items():
            if nid not in dst:
                raise KeyError(f"no trace entry for node {nid}")
            if g.shape != (d,):
                raise DimensionError(f"upstream gradient for node {nid} has shape {g.shape}")
            dst[nid] += g
    dxs: Dict[int, np.ndarray] = {}
    for nid in reversed(trace.order):
        cache = trace.caches.get(nid)
        if cache is None:
            raise KeyError(f"no trace entry for node {nid}")
        dx, dhs, dcs = step_backward(p, cache, dh[nid], dc[nid], grads)
        if dx is not None:
            dxs[nid] = dx
        for k, child in enumerate(trace.tree.nodes[nid].children):
            dh[child] += dhs[k]
            dc[child] += dcs[k]
    return grads, dxs


def backward(trace, upstream_h, upstream_c=None, grads=None):
    """Gradients of a forward trace given dL/dh (and optionally dL/dc).

    Returns ``(parameter gradients, input gradients)``. For trees the input
    gradients are keyed by node id, for sequences by position; ``trace.input_ids``
    maps those keys to vocabulary ids.
    """
    if isinstance(trace, TreeTrace):
        return tree_backward(trace, upstream_h, upstream_c, grads)
    if isinstance(trace, SequenceTrace):
        return sequence_backward(trace, upstream_h, upstream_c, grads)
    raise TypeError(f"not a forward trace: {type(trace).__name__}")


def as_nary(p: GateParams) -> GateParams:
    """View chain/Child-Sum parameters as a 1-ary cell with identical behaviour."""
    U = {g: p.U[g][None] for g in ("i", "o", "u")}
    U["f"] = p.U["f"][None, None]
    return GateParams(dict(p.W), U, dict(p.b), arity=1)
