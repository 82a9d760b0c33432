"""Vocabulary and word-vector tables."""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np

from .tensor import Rng

UNK = "<unk>"


class EmbeddingFormatError(ValueError):
    pass


class Vocab:
    """Dense token ids; id 0 is reserved for the unknown token."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: List[str] = [UNK]
        self.stoi: Dict[str, int] = {UNK: 0}
        for tok in tokens:
            self.add(tok)

    unk_id = 0

    def add(self, token: str) -> int:
        idx = self.stoi.get(token)
        if idx is None:
            idx = len(self.itos)
            self.stoi[token] = idx
            self.itos.append(token)
        return idx

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.unk_id)

    def ids(self, tokens: Iterable[str]) -> List[int]:
        return [self.id(t) for t in tokens]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.itos[1:]:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            return cls(line.rstrip("\n") for line in f)


def build_vocab(corpora: Iterable[Iterable[str]]) -> Vocab:
    """Assign ids to tokens in first-seen order across all streams."""
    vocab = Vocab()
    for stream in corpora:
        for tok in stream:
            vocab.add(tok)
    return vocab


class EmbeddingTable:
    """One row per vocabulary id.

    When ``trainable`` the table keeps a sparse gradient buffer (row id ->
    gradient) and per-row AdaGrad accumulators; otherwise gradients passed to
    :meth:`accumulate` are dropped.
    """

    def __init__(self, vocab: Vocab, matrix: np.ndarray, trainable: bool = False):
        if matrix.shape[0] != len(vocab):
            raise ValueError(f"matrix has {matrix.shape[0]} rows for a vocabulary of {len(vocab)}")
        self.vocab = vocab
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self.trainable = trainable
        self.grad: Dict[int, np.ndarray] = {}
        self.accum = np.zeros_like(self.matrix) if trainable else None

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def lookup(self, idx: int) -> np.ndarray:
        if not 0 <= idx < len(self.vocab):
            raise IndexError(f"token id {idx} out of range for vocabulary of size {len(self.vocab)}")
        return self.matrix[idx]

    def vector(self, token: str) -> np.ndarray:
        return self.matrix[self.vocab.id(token)]

    def accumulate(self, idx: int, g: np.ndarray) -> None:
        if not self.trainable:
            return
        buf = self.grad.get(idx)
        if buf is None:
            self.grad[idx] = np.array(g, dtype=np.float64)
        else:
            buf += g

    def zero_grad(self) -> None:
        self.grad.clear()


def lookup(table: EmbeddingTable, idx: int) -> np.ndarray:
    return table.lookup(idx)


def random_embeddings(vocab: Vocab, dim: int, rng: Rng, scale: float = 0.05,
                      trainable: bool = False) -> EmbeddingTable:
    return EmbeddingTable(vocab, rng.uniform(-scale, scale, (len(vocab), dim)), trainable)


def load_embeddings(
    stream: Union[str, TextIO, Iterable[str]],
    vocab: Vocab,
    rng: Rng,
    dim: Optional[int] = None,
    trainable: bool = False,
    scale: float = 0.05,
) -> Tuple[EmbeddingTable, float]:
    """Read ``token v1 ... ve`` lines into a table aligned with ``vocab``.

    Tokens missing from the stream (``<unk>`` included) get rows drawn
    uniformly from ``[-scale, scale]``; the draw happens for the whole table
    up front so results depend only on the seed. Returns the table and the
    fraction of non-unk vocabulary tokens found.
    """
    if isinstance(stream, str):
        with open(stream, encoding="utf-8") as f:
            return load_embeddings(f, vocab, rng, dim, trainable, scale)

    found: Dict[int, np.ndarray] = {}
    for lineno, line in enumerate(stream, 1):
        parts = line.rstrip("\n").rstrip(" ").split(" ")
        if len(parts) == 1 and not parts[0]:
            continue
        if dim is None:
            dim = len(parts) - 1
            if dim < 1:
                raise EmbeddingFormatError(f"line {lineno}: no vector values")
        if len(parts) != dim + 1:
            raise EmbeddingFormatError(f"line {lineno}: expected {dim} values, got {len(parts) - 1}")
        idx = vocab.stoi.get(parts[0])
        if idx is None or idx in found:
            continue
        try:
            found[idx] = np.array(parts[1:], dtype=np.float64)
        except ValueError:
            raise EmbeddingFormatError(f"line {lineno}: non-numeric value") from None
    if dim is None:
        raise EmbeddingFormatError("empty embedding stream")

    matrix = rng.uniform(-scale, scale, (len(vocab), dim))
    for idx, row in found.items():
        matrix[idx] = row
    coverage = len(found) / max(len(vocab) - 1, 1)
    return EmbeddingTable(vocab, matrix, trainable), coverage
