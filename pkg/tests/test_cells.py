import numpy as np
import pytest
from conftest import assert_close, random_params, table
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from treelstm.cells import (GateParams, NodeState, as_nary, backward, childsum_step, init_gate_params,
                            lstm_step, nary_step, run_sequence, run_tree)
from treelstm.gradcheck import random_binary_tree, random_dependency_tree
from treelstm.tensor import DimensionError, Rng
from treelstm.trees import chain_tree, parse_constituency

D, E = 4, 3


def zero_state(d=D):
    return NodeState(np.zeros(d), np.zeros(d))


def rand_state(rng, d=D):
    return NodeState(rng.uniform(-1, 1, d), rng.uniform(-1, 1, d))


def test_lstm_zero_params_zero_output(rng):
    p = init_gate_params(D, E, rng)
    for arrs in (p.W, p.U, p.b):
        for a in arrs.values():
            a[...] = 0.0
    s, _ = lstm_step(p, rng.normal(size=E), zero_state())
    np.testing.assert_array_equal(s.h, 0.0)
    np.testing.assert_array_equal(s.c, 0.0)


def test_lstm_saturated_forget_gate(rng):
    p = init_gate_params(D, E, rng)
    for arrs in (p.W, p.U, p.b):
        for a in arrs.values():
            a[...] = 0.0
    p.b["f"][...] = 50.0
    v = rng.uniform(-2, 2, D)
    s, _ = lstm_step(p, rng.normal(size=E), NodeState(v, np.zeros(D)))
    # i = o = 1/2, u = 0, f = 1 to within 1e-15
    assert_close(s.c, v, 1e-14)
    assert_close(s.h, 0.5 * np.tanh(v), 1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lstm_matches_scalar_oracle(seed):
    rng = Rng(seed)
    p = random_params(D, E, rng)
    x, prev = rng.normal(size=E), rand_state(rng)
    s, _ = lstm_step(p, x, prev)
    tolist = lambda m: {g: a.tolist() for g, a in m.items()}  # noqa: E731
    c, h = oracles.lstm_step(tolist(p.W), tolist(p.U), tolist(p.b), x.tolist(), prev.h.tolist(), prev.c.tolist())
    assert_close(s.c, c, 1e-12)
    assert_close(s.h, h, 1e-12)


def test_lstm_dimension_errors(rng):
    p = random_params(D, E, rng)
    with pytest.raises(DimensionError):
        lstm_step(p, np.zeros(E + 1), zero_state())
    with pytest.raises(DimensionError):
        lstm_step(p, np.zeros(E), zero_state(D + 1))


def test_childsum_zero_and_one_child_match_lstm(rng):
    p = random_params(D, E, rng)
    x = rng.normal(size=E)
    a, _ = childsum_step(p, x, [])
    b, _ = lstm_step(p, x, zero_state())
    assert_close(a.h, b.h, 0)
    assert_close(a.c, b.c, 0)
    child = rand_state(rng)
    a, _ = childsum_step(p, x, [child])
    b, _ = lstm_step(p, x, child)
    assert_close(a.h, b.h, 1e-15)
    assert_close(a.c, b.c, 1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.randoms(use_true_random=False))
def test_childsum_permutation_invariant(seed, k, shuffler):
    rng = Rng(seed)
    p = random_params(D, E, rng)
    x = rng.normal(size=E)
    kids = [rand_state(rng) for _ in range(k)]
    a, _ = childsum_step(p, x, kids)
    shuffler.shuffle(kids)
    b, _ = childsum_step(p, x, kids)
    assert_close(a.h, b.h, 1e-15)
    assert_close(a.c, b.c, 1e-15)


def test_nary_unary_chain_matches_lstm(rng):
    p = random_params(D, E, rng)
    x, child = rng.normal(size=E), rand_state(rng)
    a, _ = nary_step(as_nary(p), x, [child])
    b, _ = lstm_step(p, x, child)
    assert_close(a.h, b.h, 1e-15)
    assert_close(a.c, b.c, 1e-15)


def test_nary_without_offdiag_matches_childsum_one_child(rng):
    p = random_params(D, E, rng)
    q = init_gate_params(D, E, rng, arity=2, offdiag=True)
    for g in "iou":
        q.U[g][...] = p.U[g]
    q.U["f"][...] = 0.0
    q.U["f"][0, 0] = p.U["f"]
    q.U["f"][1, 1] = p.U["f"]
    for g in "ifou":
        q.W[g][...] = p.W[g]
        q.b[g][...] = p.b[g]
    x, child = rng.normal(size=E), rand_state(rng)
    a, _ = nary_step(q, x, [child])
    b, _ = childsum_step(p, x, [child])
    assert_close(a.h, b.h, 1e-15)
    assert_close(a.c, b.c, 1e-15)


def test_nary_leaf_cell_is_i_times_u(rng):
    p = random_params(D, E, rng, arity=2)
    x = rng.normal(size=E)
    s, cache = nary_step(p, x, [])
    sig = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
    i = sig(p.W["i"] @ x + p.b["i"])
    u = np.tanh(p.W["u"] @ x + p.b["u"])
    assert_close(s.c, i * u, 1e-15)


def test_nary_underfull_equals_zero_child(rng):
    p = random_params(D, E, rng, arity=2)
    left = rand_state(rng)
    a, _ = nary_step(p, None, [left], leaf_input_only=True)
    b, _ = nary_step(p, None, [left, zero_state()], leaf_input_only=True)
    assert_close(a.h, b.h, 1e-15)
    assert_close(a.c, b.c, 1e-15)


def test_nary_errors(rng):
    p = random_params(D, E, rng, arity=2)
    with pytest.raises(ValueError):
        nary_step(p, None, [rand_state(rng)] * 3)
    with pytest.raises(ValueError):
        nary_step(p, rng.normal(size=E), [rand_state(rng)] * 2, leaf_input_only=True)


def test_offdiag_shapes(rng):
    assert init_gate_params(D, E, rng, arity=2).U["f"].shape == (2, 2, D, D)
    assert init_gate_params(D, E, rng, arity=2, offdiag=False).U["f"].shape == (2, D, D)
    assert init_gate_params(D, E, rng, arity=2).U["i"].shape == (2, D, D)


def test_run_sequence_length_one(rng):
    p = random_params(D, E, rng)
    x = rng.normal(size=E)
    (s,), _ = run_sequence(p, [x])
    t, _ = lstm_step(p, x, zero_state())
    assert_close(s.h, t.h, 0)


def test_run_sequence_empty(rng):
    with pytest.raises(ValueError):
        run_sequence(random_params(D, E, rng), [])


def test_bidirectional_palindrome_mirrors(rng):
    p = random_params(D, E, rng)
    xs = [rng.normal(size=E) for _ in range(3)]
    xs = xs + xs[-2::-1]
    states, _ = run_sequence(p, xs, bidirectional=True)
    T = len(xs)
    for t in range(T):
        assert_close(states[t].h[:D], states[T - 1 - t].h[D:], 0)


def test_two_layer_composes_single_layers(rng):
    p1, p2 = random_params(D, E, rng), random_params(D, D, rng)
    xs = [rng.normal(size=E) for _ in range(5)]
    stacked, _ = run_sequence([p1, p2], xs)
    lower, _ = run_sequence(p1, xs)
    upper, _ = run_sequence(p2, [s.h for s in lower])
    for a, b in zip(stacked, upper):
        assert_close(a.h, b.h, 0)
        assert_close(a.c, b.c, 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_chain_reduction(seed, n):
    rng = Rng(seed)
    p = random_params(D, E, rng)
    words = [f"w{k}" for k in range(n)]
    emb = table(words, E, rng)
    seq, _ = run_sequence(p, [emb.vector(w) for w in words])
    tree = chain_tree(words)
    for variant, params in (("childsum", p), ("nary", as_nary(p))):
        states, _ = run_tree(params, tree, emb, variant)
        for node in tree.nodes:
            assert_close(states[node.id].h, seq[node.index].h, 1e-12)
            assert_close(states[node.id].c, seq[node.index].c, 1e-12)


def test_run_tree_single_node(rng):
    p = random_params(D, E, rng, arity=2)
    emb = table(["a"], E, rng)
    states, trace = run_tree(p, parse_constituency("(1 a)"), emb, "nary")
    s, _ = nary_step(p, emb.vector("a"), [])
    assert_close(states[0].h, s.h, 0)
    assert trace.order == [0]


def test_run_tree_matches_manual_composition(rng):
    p = random_params(D, E, rng, arity=2)
    words = [f"w{k}" for k in range(4)]
    emb = table(words, E, rng)
    tree = random_binary_tree(words, rng)
    assert len(tree) == 7
    states, _ = run_tree(p, tree, emb, "nary")
    manual = {}
    for nid in tree.postorder():
        node = tree.nodes[nid]
        x = emb.vector(node.token) if not node.children else None
        manual[nid], _ = nary_step(p, x, [manual[c] for c in node.children], leaf_input_only=True)
    for nid in manual:
        assert_close(states[nid].h, manual[nid].h, 0)


def test_gate_bounds_over_trees(rng):
    p = random_params(D, E, rng, scale=2.0)
    words = [f"w{k}" for k in range(9)]
    emb = table(words, E, rng)
    _, trace = run_tree(p, random_dependency_tree(words, rng), emb, "childsum")
    for cache in trace.caches.values():
        for g in (cache.i, cache.f, cache.o):
            assert np.all((g > 0) & (g < 1))
        assert np.all(np.abs(cache.u) < 1)
        if len(cache.hs):
            assert_close(cache.h_tilde, cache.hs.sum(axis=0), 0)


def _tree_grads(p, trace, upstream):
    grads, dxs = backward(trace, upstream)
    return np.concatenate([a.ravel() for a in grads.flat().values()]), dxs


def test_backward_zero_upstream_and_additivity(rng):
    p = random_params(D, E, rng)
    words = [f"w{k}" for k in range(6)]
    emb = table(words, E, rng)
    tree = random_dependency_tree(words, rng)
    _, trace = run_tree(p, tree, emb, "childsum")
    g0, _ = _tree_grads(p, trace, {tree.root: np.zeros(D)})
    assert np.all(g0 == 0)
    other = next(n.id for n in tree.nodes if n.id != tree.root)
    up_a = {tree.root: rng.normal(size=D)}
    up_b = {other: rng.normal(size=D)}
    ga, _ = _tree_grads(p, trace, up_a)
    gb, _ = _tree_grads(p, trace, up_b)
    gab, _ = _tree_grads(p, trace, {**up_a, **up_b})
    assert_close(gab, ga + gb, 1e-12)


def test_backward_missing_trace_entry(rng):
    p = random_params(D, E, rng)
    emb = table(["a", "b"], E, rng)
    tree = chain_tree(["a", "b"])
    _, trace = run_tree(p, tree, emb, "childsum")
    with pytest.raises(KeyError):
        backward(trace, {99: np.zeros(D)})


def test_from_flat_shares_memory(rng):
    p = random_params(D, E, rng)
    flat = p.flat("enc.")
    q = GateParams.from_flat(flat, "enc.")
    q.W["i"][0, 0] = 123.0
    assert p.W["i"][0, 0] == 123.0
