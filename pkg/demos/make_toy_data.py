"""Regenerate the small synthetic datasets bundled in ``treelstm/data``.

    python demos/make_toy_data.py

Sentiment: 20 binarized, fully labeled constituency trees (10 positive, 10
negative), plus the same sentences as dependency parses with span labels.
Relatedness: 20 sentence pairs scored in [1, 5] by subject/verb/object overlap,
with a dependency parse for every sentence.
"""

import os

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "treelstm", "data")

POS = ["good", "great", "fun", "brilliant", "lovely"]
NEG = ["bad", "awful", "dull", "boring", "terrible"]
NOUNS = ["movie", "film", "plot", "story", "cast"]
DETS = ["the", "a", "this"]


def sentiment_sentences():
    out = []
    for k in range(10):
        for adjs, lab in ((POS, 3), (NEG, 1)):
            adj = adjs[k % 5]
            noun = NOUNS[(k * 3 + lab) % 5]
            det = DETS[k % 3]
            if k % 3 == 0:
                # (det noun) (is adj)
                words = [det, noun, "is", adj]
                tree = f"({lab} (2 (2 {det}) (2 {noun})) ({lab} (2 is) ({lab} {adj})))"
                heads = [2, 4, 4, 0]
            elif k % 3 == 1:
                # det (adj noun)
                words = [det, adj, noun]
                tree = f"({lab} (2 {det}) ({lab} ({lab} {adj}) (2 {noun})))"
                heads = [3, 3, 0]
            else:
                # (det noun) (is (very adj))
                words = [det, noun, "is", "very", adj]
                tree = f"({lab} (2 (2 {det}) (2 {noun})) ({lab} (2 is) ({lab} (2 very) ({lab} {adj}))))"
                heads = [2, 5, 5, 5, 0]
            out.append((words, tree, heads))
    return out


SUBJ = [("a", "man"), ("a", "woman"), ("the", "boy"), ("a", "dog"), ("the", "girl")]
VERB = ["playing", "eating", "cutting", "riding", "watching"]
OBJ = [("a", "guitar"), ("an", "apple"), ("the", "bread"), ("a", "horse"), ("the", "ball")]


def svo(s, v, o):
    (sd, sn), verb, (od, on) = SUBJ[s], VERB[v], OBJ[o]
    words = [sd, sn, "is", verb, od, on]
    heads = [2, 4, 4, 0, 6, 4]
    return words, heads


def relatedness_pairs():
    # (left svo, right svo, score)
    plan = [
        ((0, 0, 0), (0, 0, 0), 5.0), ((0, 0, 0), (1, 0, 0), 4.1), ((0, 0, 0), (0, 1, 0), 3.4),
        ((0, 0, 0), (0, 0, 3), 3.8), ((0, 0, 0), (2, 1, 3), 1.2), ((1, 1, 1), (1, 1, 1), 4.9),
        ((1, 1, 1), (3, 1, 1), 3.9), ((1, 1, 1), (1, 2, 2), 2.6), ((1, 1, 1), (4, 3, 3), 1.0),
        ((2, 3, 3), (2, 3, 3), 4.8), ((2, 3, 3), (4, 3, 3), 4.2), ((2, 3, 3), (2, 4, 4), 2.5),
        ((2, 3, 3), (0, 2, 1), 1.3), ((3, 4, 4), (3, 4, 4), 5.0), ((3, 4, 4), (3, 0, 4), 3.2),
        ((3, 4, 4), (1, 4, 2), 2.8), ((4, 2, 2), (4, 2, 2), 4.7), ((4, 2, 2), (4, 2, 1), 3.7),
        ((4, 2, 2), (0, 2, 2), 3.9), ((4, 2, 2), (3, 0, 0), 1.1),
    ]
    return [(svo(*a), svo(*b), y) for a, b, y in plan]


def conll(words, heads):
    return "".join(f"{i + 1}\t{w}\t{h}\n" for i, (w, h) in enumerate(zip(words, heads))) + "\n"


def main():
    os.makedirs(OUT, exist_ok=True)
    sents = sentiment_sentences()
    with open(os.path.join(OUT, "toy_sentiment.txt"), "w") as f:
        for _, tree, _ in sents:
            f.write(tree + "\n")
    # dependency version: spans come from the constituency trees
    from treelstm.trees import parse_constituency
    with open(os.path.join(OUT, "toy_sentiment.conll"), "w") as f, \
            open(os.path.join(OUT, "toy_sentiment_spans.txt"), "w") as g:
        for words, tree, heads in sents:
            f.write(conll(words, heads))
            t = parse_constituency(tree)
            for node in t.nodes:
                lo, hi = min(node.span), max(node.span) + 1
                g.write(f"{lo}\t{hi}\t{node.label}\n")
            g.write("\n")

    pairs = relatedness_pairs()
    seen = {}
    with open(os.path.join(OUT, "toy_pairs.tsv"), "w") as f:
        f.write("pair_ID\tsentence_A\tsentence_B\trelatedness_score\n")
        for k, ((wa, ha), (wb, hb), y) in enumerate(pairs, 1):
            f.write(f"{k}\t{' '.join(wa)}\t{' '.join(wb)}\t{y}\n")
            seen.setdefault(" ".join(wa), (wa, ha))
            seen.setdefault(" ".join(wb), (wb, hb))
    with open(os.path.join(OUT, "toy_parses.conll"), "w") as f:
        for words, heads in seen.values():
            f.write(conll(words, heads))
    with open(os.path.join(OUT, "toy_corpus.txt"), "w") as f:
        for s in seen:
            f.write(s + "\n")


if __name__ == "__main__":
    main()
