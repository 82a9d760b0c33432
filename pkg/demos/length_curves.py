"""Accuracy as a function of sentence length, for a tree and a chain model.

    python3 demos/length_curves.py

Models are trained briefly so that they still make mistakes. The toy sentences
are 3 to 5 tokens long, so each row holds exactly one length (window half
width 0); the last row also collects everything longer.
"""

from treelstm.config import RunConfig
from treelstm.data import prepare_run
from treelstm.evaluation import accuracy, binned_tsv, length_binned
from treelstm.train import train, training_examples


def main():
    for variant in ("nary-const", "lstm"):
        cfg, model, tr, dev = prepare_run(RunConfig(task="sentiment-binary", variant=variant, d=10, e=8,
                                                    batch_size=5, epochs=1, seed=3))
        train(model, training_examples(cfg, tr), dev, cfg)
        preds = [model.predict_label(t) for t in dev]
        golds = [t.nodes[t.root].label for t in dev]
        series = length_binned([len(t.tokens) for t in dev], preds, golds, accuracy, half_width=0)
        print(f"{variant} (overall {accuracy(preds, golds):.2f})")
        print(binned_tsv(series))


if __name__ == "__main__":
    main()
