"""Tree structures and readers for the two parse formats.

Constituency trees come one per line as s-expressions, e.g.
``(3 (2 good) (2 movie))``: every node carries an integer label and tokens sit
at the leaves. Dependency trees come as blank-line separated blocks of
``index<TAB>token<TAB>head`` rows (1-based indices, head 0 marks the root).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

MAX_SENTENCE_LENGTH = 400

CONSTITUENCY = "constituency"
DEPENDENCY = "dependency"


class TreeError(ValueError):
    """Malformed or structurally invalid tree input."""


class ParseError(TreeError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at character {offset})")
        self.offset = offset


@dataclass
class Node:
    id: int
    parent: Optional[int]
    children: List[int]
    token: Optional[str] = None
    index: Optional[int] = None  # position of ``token`` in the sentence
    label: Optional[int] = None
    span: frozenset = field(default_factory=frozenset)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class Tree:
    nodes: List[Node]
    root: int
    kind: str

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, node_id: int) -> Node:
        return self.nodes[node_id]

    @property
    def tokens(self) -> List[str]:
        toks = sorted((n.index, n.token) for n in self.nodes if n.token is not None)
        return [t for _, t in toks]

    @property
    def n_tokens(self) -> int:
        return sum(1 for n in self.nodes if n.token is not None)

    def postorder(self) -> List[int]:
        """Children before parents, left to right; iterative."""
        out = []
        stack = [(self.root, False)]
        while stack:
            nid, expanded = stack.pop()
            if expanded:
                out.append(nid)
                continue
            stack.append((nid, True))
            for c in reversed(self.nodes[nid].children):
                stack.append((c, False))
        return out

    def labeled_nodes(self) -> List[int]:
        return [n.id for n in self.nodes if n.label is not None]

    def span_tokens(self, node_id: int) -> List[str]:
        toks = self.tokens
        return [toks[i] for i in sorted(self.nodes[node_id].span)]

    def relabel(self, labels: Mapping[int, Optional[int]]) -> "Tree":
        nodes = [replace(n, children=list(n.children), label=labels.get(n.id, n.label)) for n in self.nodes]
        return Tree(nodes, self.root, self.kind)


def _compute_spans(tree: Tree) -> None:
    for nid in tree.postorder():
        node = tree.nodes[nid]
        span = set()
        if node.index is not None:
            span.add(node.index)
        for c in node.children:
            span |= tree.nodes[c].span
        node.span = frozenset(span)


def _check_length(n: int) -> None:
    if n > MAX_SENTENCE_LENGTH:
        raise TreeError(f"sentence has {n} tokens; the limit is {MAX_SENTENCE_LENGTH}")


# -- constituency ----------------------------------------------------------

def _sexpr_tokens(text: str) -> Iterator[Tuple[str, int]]:
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j], i
            i = j


def parse_constituency(text: str) -> Tree:
    """Parse one binarized, fully labeled s-expression."""
    nodes: List[Node] = []
    stack: List[int] = []  # open node ids
    pending_label: List[bool] = []  # whether the open node still expects its label
    root = None
    n_tokens = 0
    last = 0
    for tok, off in _sexpr_tokens(text):
        last = off
        if root is not None:
            raise ParseError("trailing input after tree", off)
        if tok == "(":
            parent = stack[-1] if stack else None
            if parent is not None and pending_label[-1]:
                raise ParseError("missing node label", off)
            if parent is not None and nodes[parent].token is not None:
                raise ParseError("node mixes a token and subtrees", off)
            node = Node(len(nodes), parent, [])
            nodes.append(node)
            if parent is not None:
                nodes[parent].children.append(node.id)
            stack.append(node.id)
            pending_label.append(True)
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", off)
            nid = stack.pop()
            if pending_label.pop():
                raise ParseError("empty node", off)
            node = nodes[nid]
            if node.token is None and not node.children:
                raise ParseError("empty leaf", off)
            if node.children and len(node.children) != 2:
                raise ParseError(f"internal node has {len(node.children)} children; trees must be binary", off)
            if not stack:
                root = nid
        else:
            if not stack:
                raise ParseError("token outside parentheses", off)
            if pending_label[-1]:
                try:
                    label = int(tok)
                except ValueError:
                    raise ParseError(f"label {tok!r} is not an integer", off) from None
                if label < 0:
                    raise ParseError("labels must be non-negative", off)
                nodes[stack[-1]].label = label
                pending_label[-1] = False
            else:
                node = nodes[stack[-1]]
                if node.token is not None or node.children:
                    raise ParseError("leaf must hold exactly one token", off)
                node.token = tok
                node.index = n_tokens
                n_tokens += 1
    if stack:
        raise ParseError("unbalanced '('", len(text))
    if root is None:
        raise ParseError("no tree found", last)
    _check_length(n_tokens)
    tree = Tree(nodes, root, CONSTITUENCY)
    _compute_spans(tree)
    return tree


def to_sexpr(tree: Tree) -> str:
    """Serialize a constituency tree back to its s-expression."""
    parts: List[str] = []
    stack: List[Tuple[int, bool]] = [(tree.root, False)]
    while stack:
        nid, closing = stack.pop()
        if closing:
            parts.append(")")
            continue
        node = tree.nodes[nid]
        label = "" if node.label is None else str(node.label)
        if node.token is not None:
            parts.append(f"({label} {node.token})")
            continue
        parts.append(f"({label}")
        stack.append((nid, True))
        for c in reversed(node.children):
            stack.append((c, False))
    out = []
    for p in parts:
        if out and p != ")":
            out.append(" ")
        out.append(p)
    return "".join(out)


# -- dependency --------------------------------------------------------------

def parse_dependency(lines: Sequence[str]) -> Tree:
    """Build a tree from ``index<TAB>token<TAB>head`` rows."""
    rows = []
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise TreeError(f"row {lineno}: expected 3 tab-separated fields, got {len(fields)}")
        try:
            idx, head = int(fields[0]), int(fields[2])
        except ValueError:
            raise TreeError(f"row {lineno}: index and head must be integers") from None
        rows.append((idx, fields[1], head, lineno))
    if not rows:
        raise TreeError("empty dependency block")
    n = len(rows)
    _check_length(n)
    for pos, (idx, _, head, lineno) in enumerate(rows):
        if idx != pos + 1:
            raise TreeError(f"row {lineno}: index {idx} out of sequence (expected {pos + 1})")
        if not 0 <= head <= n:
            raise TreeError(f"row {lineno}: head {head} is dangling (sentence has {n} tokens)")
        if head == idx:
            raise TreeError(f"row {lineno}: token is its own head (cycle)")
    roots = [r for r in rows if r[2] == 0]
    if len(roots) != 1:
        which = ", ".join(str(r[3]) for r in roots) or "none"
        raise TreeError(f"expected exactly one root row, found {len(roots)} (rows {which})")

    nodes = [Node(i, None, [], token=tok, index=i) for i, (_, tok, _, _) in enumerate(rows)]
    for i, (_, _, head, _) in enumerate(rows):
        if head:
            nodes[i].parent = head - 1
            nodes[head - 1].children.append(i)
    # every node must reach the root
    root = roots[0][0] - 1
    for i, (_, _, _, lineno) in enumerate(rows):
        seen = set()
        j = i
        while j != root:
            if j in seen:
                raise TreeError(f"row {lineno}: head chain contains a cycle")
            seen.add(j)
            j = nodes[j].parent
    tree = Tree(nodes, root, DEPENDENCY)
    _compute_spans(tree)
    return tree


def _blocks(stream: Iterable[str]) -> Iterator[List[str]]:
    block: List[str] = []
    for line in stream:
        if line.strip():
            block.append(line)
        elif block:
            yield block
            block = []
    if block:
        yield block


def project_labels(tree: Tree, labeled_spans: Mapping[Tuple[int, int], int]) -> Tuple[Tree, float]:
    """Label dependency nodes whose subtree covers exactly a labeled span.

    A node gets label ``L`` iff its token set equals ``range(start, end)`` for a
    span ``(start, end) -> L``. Returns the relabeled tree and the fraction of
    nodes that matched.
    """
    labels: Dict[int, Optional[int]] = {}
    matched = 0
    for node in tree.nodes:
        span = node.span
        label = None
        if span:
            lo, hi = min(span), max(span) + 1
            if hi - lo == len(span):
                label = labeled_spans.get((lo, hi))
        labels[node.id] = label
        matched += label is not None
    return tree.relabel(labels), matched / len(tree.nodes)


# -- files -------------------------------------------------------------------

def read_constituency(path) -> List[Tree]:
    trees = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                trees.append(parse_constituency(line))
            except TreeError as e:
                raise TreeError(f"{path}:{lineno}: {e}") from None
    return trees


def read_dependency(path) -> List[Tree]:
    trees = []
    with open(path, encoding="utf-8") as f:
        for k, block in enumerate(_blocks(f), 1):
            try:
                trees.append(parse_dependency(block))
            except TreeError as e:
                raise TreeError(f"{path}: sentence {k}: {e}") from None
    return trees


def read_span_labels(path) -> List[Dict[Tuple[int, int], int]]:
    """Per-sentence maps ``(start, end) -> label``; end exclusive."""
    out = []
    with open(path, encoding="utf-8") as f:
        for k, block in enumerate(_blocks(f), 1):
            spans = {}
            for line in block:
                fields = line.split()
                if len(fields) != 3:
                    raise TreeError(f"{path}: sentence {k}: bad span row {line.strip()!r}")
                start, end, label = (int(v) for v in fields)
                spans[(start, end)] = label
            out.append(spans)
    return out


@dataclass(frozen=True)
class Pair:
    pair_id: str
    sentence_a: str
    sentence_b: str
    score: float


def read_pairs(path) -> List[Pair]:
    """SICK-style TSV with columns pair_ID, sentence_A, sentence_B, relatedness_score."""
    with open(path, encoding="utf-8", newline="") as f:
        text = f.read()
    reader = csv.DictReader(io.StringIO(text), delimiter="\t", quoting=csv.QUOTE_NONE)
    need = {"pair_ID", "sentence_A", "sentence_B", "relatedness_score"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise TreeError(f"{path}: header must contain {sorted(need)}")
    pairs = []
    for row in reader:
        pairs.append(Pair(row["pair_ID"], row["sentence_A"], row["sentence_B"], float(row["relatedness_score"])))
    return pairs


def index_by_sentence(trees: Iterable[Tree]) -> Dict[str, Tree]:
    return {" ".join(t.tokens): t for t in trees}


def chain_tree(tokens: Sequence[str]) -> Tree:
    """Left-branching chain: token ``t`` is the head of token ``t-1``.

    Every node carries a token, so it is evaluated like a dependency tree.
    """
    if not tokens:
        raise TreeError("empty sentence")
    n = len(tokens)
    nodes = [Node(i, i + 1 if i + 1 < n else None, [i - 1] if i else [], token=tok, index=i)
             for i, tok in enumerate(tokens)]
    tree = Tree(nodes, n - 1, DEPENDENCY)
    _compute_spans(tree)
    return tree
