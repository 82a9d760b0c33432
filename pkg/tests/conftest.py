import numpy as np
import pytest

from treelstm.cells import init_gate_params
from treelstm.embeddings import EmbeddingTable, Vocab
from treelstm.tensor import Rng


@pytest.fixture
def rng():
    return Rng(1234)


def random_params(d, e, rng, arity=None, offdiag=True, scale=0.5):
    """Gate parameters with nonzero biases so every term matters."""
    p = init_gate_params(d, e, rng, arity=arity, offdiag=offdiag, scale=scale)
    for g in p.b:
        p.b[g][...] = rng.uniform(-scale, scale, d)
    return p


def table(tokens, e, rng, trainable=False):
    vocab = Vocab(tokens)
    return EmbeddingTable(vocab, rng.uniform(-1.0, 1.0, (len(vocab), e)), trainable=trainable)


def assert_close(a, b, tol):
    assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol
