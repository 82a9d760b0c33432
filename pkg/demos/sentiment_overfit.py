"""Fit the bundled toy sentiment treebank with a tree model and a chain model.

    python3 demos/sentiment_overfit.py

The constituency Tree-LSTM composes along the parse; the plain LSTM reads
each labeled span left to right. Both should memorize the 20 sentences, and
the demo prints how many epochs each needed plus a few root predictions.
"""

from treelstm.config import RunConfig
from treelstm.data import prepare_run
from treelstm.train import train, training_examples


def fit(variant: str, seed: int = 1):
    cfg, model, tr, dev = prepare_run(RunConfig(task="sentiment-binary", variant=variant, d=20, e=16, lr=0.05,
                                                batch_size=5, epochs=200, patience=200, target=1.0, seed=seed))
    res = train(model, training_examples(cfg, tr), dev, cfg)
    return model, dev, res


def main():
    for variant in ("nary-const", "lstm"):
        model, dev, res = fit(variant)
        print(f"{variant:12s} root accuracy {res.best_metric:.3f} after {res.best_epoch} epochs")
    model, dev, _ = fit("nary-const")
    print("\nsample predictions (1 = positive):")
    for tree in dev[:6]:
        gold = tree.nodes[tree.root].label
        print(f"  gold {gold} pred {model.predict_label(tree)}  {' '.join(tree.tokens)}")


if __name__ == "__main__":
    main()
